#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace ocrpost::corpus {

// Alignment padding symbol inserted where one stream is missing a character.
constexpr char32_t kPadding = U'@';
// Uncertainty marker; stripped like padding when tokens are compared.
constexpr char32_t kUncertain = U'#';

struct AlignedRecord {
    std::string source_id;
    std::u32string ocr_raw;      // raw OCR output (no '@')
    std::u32string ocr_aligned;  // same length as gs_aligned
    std::u32string gs_aligned;
};

struct TokenPair {
    std::u32string ocr_token;  // '@'/'#' stripped
    std::u32string gs_token;   // '@'/'#' stripped
    int label = 0;             // 1 iff ocr_token != gs_token
    size_t span_begin = 0;     // half-open range into the aligned streams
    size_t span_end = 0;
};

struct SentencePair {
    AlignedRecord record;
    std::vector<TokenPair> tokens;
    double norm_lev = 0.0;  // between the marker-stripped sentences
};

struct CorpusStats {
    size_t n_sentences = 0;
    size_t n_words = 0;
    size_t n_errors = 0;
    double mean_cer = 0.0;  // percent
    double std_cer = 0.0;   // population standard deviation, percent
};

// Removes '@' and '#'.
std::u32string strip_markers(std::u32string_view s);
// Removes '@' only (the raw-stream invariant).
std::u32string strip_padding(std::u32string_view s);

// Parses the aligned triplet format: per record the three lines
//   [OCR_toInput] <raw>
//   [OCR_aligned] <aligned>
//   [GS_aligned] <aligned>
// separated by blank lines. Throws MalformedRecord with a 1-based line
// number on missing tags, aligned-length mismatches, or a raw line that is
// not the '@'-stripped aligned line.
std::vector<AlignedRecord> parse_aligned(std::string_view text);

std::string write_aligned(const std::vector<AlignedRecord>& records);

// Splits the gold stream on whitespace and slices the same character spans
// from the OCR stream; markers are stripped after slicing and labels are
// set by exact comparison.
SentencePair align_tokens(const AlignedRecord& record);

std::vector<SentencePair> align_corpus(const std::vector<AlignedRecord>& records,
                                       size_t threads = 1);

// Keeps sentences with norm_lev < threshold, order preserved.
std::vector<SentencePair> filter_by_noise(const std::vector<SentencePair>& sentences,
                                          double threshold = 0.5);

// Per-sentence CER over the marker-stripped streams. Throws EmptyReference
// when the stripped gold sentence is empty.
double sentence_cer(const SentencePair& s);

// Sentences with an empty stripped gold side are excluded from the CER
// mean/std but still counted in n_sentences.
CorpusStats corpus_stats(const std::vector<SentencePair>& sentences);

// Line-delimited token-pair export: one JSON object per TokenPair with
// fields {source_id, index, ocr_token, gs_token, label}.
std::string tokens_to_jsonl(const std::vector<SentencePair>& sentences);

}  // namespace ocrpost::corpus
