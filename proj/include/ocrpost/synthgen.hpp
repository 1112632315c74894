#pragma once

#include <map>
#include <string>
#include <vector>

#include "ocrpost/confusion.hpp"
#include "ocrpost/corpus.hpp"
#include "ocrpost/rng.hpp"

namespace ocrpost::synthgen {

// One element of a compiled rewrite pattern: a literal character or a
// bracketed character class.
struct PatternElement {
    bool is_class = false;
    char32_t literal = 0;
    std::u32string char_class;

    bool matches(char32_t c) const;
};

struct RewriteRule {
    int priority = 0;
    bool anchor_begin = false;  // '^'
    bool anchor_end = false;    // '$'
    std::vector<PatternElement> elements;
    std::u32string replacement;
    std::u32string condition;  // morph-tag prefix; empty = unconditional
    std::u32string pattern_text;
};

// Compiles "priority<TAB>pattern<TAB>replacement[<TAB>condition]".
// Throws InvalidRule on empty patterns, unbalanced brackets, or misplaced
// anchors.
RewriteRule parse_rule(std::string_view line, size_t line_no);

struct OrthographyProfile {
    std::string name;
    std::vector<RewriteRule> rules;  // stable-sorted by priority
    std::map<std::u32string, std::u32string> exceptions;
};

// Loads a rules file (lines as above, '#'-comments allowed) and an optional
// exception lexicon ("modern<TAB>historical" lines). Validates that the
// profile is idempotent on its own exception forms.
OrthographyProfile load_profile(const std::string& name, const std::string& rules_text,
                                const std::string& exceptions_text = "");

struct AnnotatedToken {
    std::u32string surface;
    std::string morph_tag;  // externally produced, may be empty
};

// Exception lookup first; otherwise a single left-to-right pass where at
// each position the longest matching rule fires (ties broken by priority,
// then file order) and unmatched characters are copied through.
std::u32string convert_token(const AnnotatedToken& token, const OrthographyProfile& profile);

std::vector<std::u32string> convert_orthography(const std::vector<AnnotatedToken>& tokens,
                                                const OrthographyProfile& profile);

struct CorruptOptions {
    // When set, whitespace never changes: spaces are not substituted or
    // deleted, no whitespace is inserted, and a draw that would turn a
    // character into whitespace keeps the original.
    bool suppress_whitespace_edits = false;
};

// Corrupts every character via sample_emission; kEpsilon draws delete, and
// the kEpsilon row's share of total mass drives insertions at the gaps
// around each character. Throws EmptyMatrix.
std::u32string corrupt(std::u32string_view sentence, const confusion::ConfusionMatrix& matrix,
                       Rng& rng, const CorruptOptions& options = {});

// Same noise process, but also constructs the aligned streams so the result
// is a valid AlignedRecord (alignment true by construction).
corpus::AlignedRecord corrupt_aligned(std::u32string_view gold,
                                      const confusion::ConfusionMatrix& matrix, Rng& rng,
                                      const CorruptOptions& options, std::string source_id);

// Converts each sentence to the historical orthography, corrupts it, and
// packages the result as labeled SentencePairs. Per-sentence generators are
// seeded with seed + index so output is independent of evaluation order.
// By default a corruption that changes the whitespace token count is
// redrawn up to 5 times, then whitespace edits are suppressed; with
// allow_whitespace_noise the first draw is kept as-is.
std::vector<corpus::SentencePair> generate_pairs(
    const std::vector<std::vector<AnnotatedToken>>& modern_sentences,
    const OrthographyProfile& profile, const confusion::ConfusionMatrix& matrix, uint64_t seed,
    bool allow_whitespace_noise = false);

}  // namespace ocrpost::synthgen
