#include "ocrpost/synthgen.hpp"

#include <algorithm>

#include "ocrpost/errors.hpp"
#include "ocrpost/unicode.hpp"

namespace ocrpost::synthgen {

bool PatternElement::matches(char32_t c) const {
    if (!is_class) return c == literal;
    return char_class.find(c) != std::u32string::npos;
}

RewriteRule parse_rule(std::string_view line, size_t line_no) {
    const auto fail = [&](const std::string& msg) -> InvalidRule {
        return InvalidRule("rule line " + std::to_string(line_no) + ": " + msg);
    };
    std::vector<std::string_view> fields;
    size_t start = 0;
    while (true) {
        size_t tab = line.find('\t', start);
        if (tab == std::string_view::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, tab - start));
        start = tab + 1;
    }
    if (fields.size() < 3 || fields.size() > 4)
        throw fail("expected priority<TAB>pattern<TAB>replacement[<TAB>condition]");

    RewriteRule rule;
    try {
        rule.priority = std::stoi(std::string(fields[0]));
    } catch (const std::exception&) {
        throw fail("bad priority \"" + std::string(fields[0]) + "\"");
    }
    const std::u32string pattern = utf8_decode(fields[1]);
    rule.pattern_text = pattern;
    rule.replacement = utf8_decode(fields[2]);
    if (fields.size() == 4) rule.condition = utf8_decode(fields[3]);

    size_t i = 0, end = pattern.size();
    if (i < end && pattern[i] == U'^') {
        rule.anchor_begin = true;
        ++i;
    }
    if (end > i && pattern[end - 1] == U'$') {
        rule.anchor_end = true;
        --end;
    }
    while (i < end) {
        const char32_t c = pattern[i];
        if (c == U'^' || c == U'$') throw fail("anchor not at pattern edge");
        PatternElement el;
        if (c == U'[') {
            const size_t close = pattern.find(U']', i + 1);
            if (close == std::u32string::npos || close >= end) throw fail("unclosed character class");
            if (close == i + 1) throw fail("empty character class");
            el.is_class = true;
            el.char_class = pattern.substr(i + 1, close - i - 1);
            i = close + 1;
        } else {
            el.literal = c;
            ++i;
        }
        rule.elements.push_back(std::move(el));
    }
    if (rule.elements.empty()) throw fail("empty pattern");
    return rule;
}

namespace {

// Match length at position pos, or 0 when the rule does not apply there.
size_t match_at(const RewriteRule& rule, std::u32string_view token, size_t pos,
                std::string_view morph_tag) {
    if (!rule.condition.empty()) {
        const std::string cond = utf8_encode(rule.condition);
        if (morph_tag.substr(0, cond.size()) != cond) return 0;
    }
    if (rule.anchor_begin && pos != 0) return 0;
    const size_t len = rule.elements.size();
    if (pos + len > token.size()) return 0;
    for (size_t k = 0; k < len; ++k)
        if (!rule.elements[k].matches(token[pos + k])) return 0;
    if (rule.anchor_end && pos + len != token.size()) return 0;
    return len;
}

std::u32string apply_rules(std::u32string_view token, const OrthographyProfile& profile,
                           std::string_view morph_tag) {
    std::u32string out;
    out.reserve(token.size());
    size_t i = 0;
    while (i < token.size()) {
        const RewriteRule* best = nullptr;
        size_t best_len = 0;
        for (const auto& rule : profile.rules) {
            const size_t len = match_at(rule, token, i, morph_tag);
            if (len > best_len) {
                best = &rule;
                best_len = len;
            }
        }
        if (best) {
            out += best->replacement;
            i += best_len;
        } else {
            out.push_back(token[i]);
            ++i;
        }
    }
    return out;
}

}  // namespace

OrthographyProfile load_profile(const std::string& name, const std::string& rules_text,
                                const std::string& exceptions_text) {
    OrthographyProfile profile;
    profile.name = name;

    size_t start = 0, line_no = 1;
    std::string_view text = rules_text;
    while (start < text.size()) {
        size_t end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(start, end - start);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (!line.empty() && line.front() != '#') profile.rules.push_back(parse_rule(line, line_no));
        start = end + 1;
        ++line_no;
    }
    std::stable_sort(profile.rules.begin(), profile.rules.end(),
                     [](const RewriteRule& a, const RewriteRule& b) { return a.priority < b.priority; });

    text = exceptions_text;
    start = 0;
    line_no = 1;
    while (start < text.size()) {
        size_t end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(start, end - start);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (!line.empty() && line.front() != '#') {
            const size_t tab = line.find('\t');
            if (tab == std::string_view::npos)
                throw InvalidRule("exception line " + std::to_string(line_no) +
                                  ": expected modern<TAB>historical");
            profile.exceptions[utf8_decode(line.substr(0, tab))] = utf8_decode(line.substr(tab + 1));
        }
        start = end + 1;
        ++line_no;
    }

    // The shipped profiles must be stable on their own output; the exception
    // forms are the historical words we can check at load time.
    for (const auto& [modern, historical] : profile.exceptions) {
        (void)modern;
        const std::u32string again = apply_rules(historical, profile, "");
        if (again != historical)
            throw InvalidRule("profile " + name + " is not idempotent: exception form \"" +
                              utf8_encode(historical) + "\" rewrites to \"" + utf8_encode(again) +
                              "\"");
    }
    return profile;
}

std::u32string convert_token(const AnnotatedToken& token, const OrthographyProfile& profile) {
    auto ex = profile.exceptions.find(token.surface);
    if (ex != profile.exceptions.end()) return ex->second;
    return apply_rules(token.surface, profile, token.morph_tag);
}

std::vector<std::u32string> convert_orthography(const std::vector<AnnotatedToken>& tokens,
                                                const OrthographyProfile& profile) {
    std::vector<std::u32string> out;
    out.reserve(tokens.size());
    for (const auto& t : tokens) out.push_back(convert_token(t, profile));
    return out;
}

namespace {

corpus::AlignedRecord corrupt_impl(std::u32string_view gold,
                                   const confusion::ConfusionMatrix& matrix, Rng& rng,
                                   const CorruptOptions& options, std::string source_id) {
    if (matrix.empty()) throw EmptyMatrix("corrupt: empty confusion matrix");
    const uint64_t eps_total = matrix.row_total(confusion::kEpsilon);
    const double p_insert =
        eps_total == 0 ? 0.0 : static_cast<double>(eps_total) / static_cast<double>(matrix.total);

    corpus::AlignedRecord rec;
    rec.source_id = std::move(source_id);
    for (size_t gap = 0; gap <= gold.size(); ++gap) {
        if (p_insert > 0.0 && rng.uniform01() < p_insert) {
            const char32_t ins = sample_emission(matrix, confusion::kEpsilon, rng);
            if (ins != confusion::kEpsilon &&
                !(options.suppress_whitespace_edits && is_space(ins))) {
                rec.ocr_aligned.push_back(ins);
                rec.gs_aligned.push_back(corpus::kPadding);
            }
        }
        if (gap == gold.size()) break;
        const char32_t ch = gold[gap];
        if (options.suppress_whitespace_edits && is_space(ch)) {
            rec.ocr_aligned.push_back(ch);
            rec.gs_aligned.push_back(ch);
            continue;
        }
        char32_t emitted = sample_emission(matrix, ch, rng);
        if (options.suppress_whitespace_edits && emitted != confusion::kEpsilon &&
            is_space(emitted) && !is_space(ch))
            emitted = ch;
        if (emitted == confusion::kEpsilon) {
            rec.ocr_aligned.push_back(corpus::kPadding);
            rec.gs_aligned.push_back(ch);
        } else {
            rec.ocr_aligned.push_back(emitted);
            rec.gs_aligned.push_back(ch);
        }
    }
    rec.ocr_raw = corpus::strip_padding(rec.ocr_aligned);
    return rec;
}

}  // namespace

std::u32string corrupt(std::u32string_view sentence, const confusion::ConfusionMatrix& matrix,
                       Rng& rng, const CorruptOptions& options) {
    return corrupt_impl(sentence, matrix, rng, options, "").ocr_raw;
}

corpus::AlignedRecord corrupt_aligned(std::u32string_view gold,
                                      const confusion::ConfusionMatrix& matrix, Rng& rng,
                                      const CorruptOptions& options, std::string source_id) {
    return corrupt_impl(gold, matrix, rng, options, std::move(source_id));
}

std::vector<corpus::SentencePair> generate_pairs(
    const std::vector<std::vector<AnnotatedToken>>& modern_sentences,
    const OrthographyProfile& profile, const confusion::ConfusionMatrix& matrix, uint64_t seed,
    bool allow_whitespace_noise) {
    std::vector<corpus::SentencePair> out;
    out.reserve(modern_sentences.size());
    for (size_t idx = 0; idx < modern_sentences.size(); ++idx) {
        const auto converted = convert_orthography(modern_sentences[idx], profile);
        const std::u32string gold = join_tokens(converted);
        const size_t n_tokens = split_ws(gold).size();
        Rng rng(seed + idx);
        const std::string source_id = "synth-" + std::to_string(idx);

        corpus::AlignedRecord rec;
        if (allow_whitespace_noise) {
            rec = corrupt_aligned(gold, matrix, rng, {}, source_id);
        } else {
            bool accepted = false;
            for (int attempt = 0; attempt < 5 && !accepted; ++attempt) {
                rec = corrupt_aligned(gold, matrix, rng, {}, source_id);
                accepted = split_ws(rec.ocr_raw).size() == n_tokens;
            }
            if (!accepted) {
                CorruptOptions suppress;
                suppress.suppress_whitespace_edits = true;
                rec = corrupt_aligned(gold, matrix, rng, suppress, source_id);
            }
        }
        out.push_back(corpus::align_tokens(rec));
    }
    return out;
}

}  // namespace ocrpost::synthgen
