#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace ocrpost::corpus {
struct SentencePair;
}

namespace ocrpost::metrics {

// Unit-cost edit distance over Unicode scalar values.
size_t levenshtein(std::u32string_view a, std::u32string_view b);
size_t levenshtein_utf8(std::string_view a, std::string_view b);

// levenshtein(a, b) / max(|a|, |b|); 0 when both strings are empty.
double normalized_levenshtein(std::u32string_view a, std::u32string_view b);

// Character error rate in percent: levenshtein(ocr, gs) / |gs| * 100.
// Throws EmptyReference when gs is empty.
double cer(std::u32string_view ocr, std::u32string_view gs);

struct DetectionReport {
    size_t tp = 0, fp = 0, fn = 0, tn = 0;
    double precision = 0.0, recall = 0.0, f1 = 0.0;
    // Set when the corresponding denominator was zero and the score was
    // reported as 0 instead of aborting the sweep.
    bool degenerate_precision = false;
    bool degenerate_recall = false;
};

// Positive class is "erroneous" (label 1). Throws LengthMismatch.
DetectionReport detection_scores(const std::vector<int>& predictions,
                                 const std::vector<int>& labels);

struct CorrectionTriple {
    std::u32string ocr;
    std::u32string corrected;
    std::u32string gs;
};

struct ImprovementReport {
    size_t lev_ocr_sum = 0;
    size_t lev_corrected_sum = 0;
    size_t gs_len_sum = 0;
    // (lev_ocr_sum - lev_corrected_sum) / gs_len_sum; positive means the
    // corrector improved the text.
    double improvement_pct = 0.0;
};

// Throws EmptyReference when any gold string is empty.
ImprovementReport improvement_pct(const std::vector<CorrectionTriple>& triples,
                                  size_t threads = 1);

enum class ErrorType {
    misrecognized_character,
    missing_character,
    hallucination,
    run_on,
    incorrect_split,
};

const char* to_string(ErrorType t);

// Classifies one mismatch site. Token cardinalities decide the
// segmentation classes: 1 OCR token over 2 gold tokens is a run-on,
// 2 OCR tokens over 1 gold token an incorrect split. For 1:1 pairs the
// character alignment decides. Throws NotAnError when the site has no
// mismatch.
ErrorType classify_error_type(const std::vector<std::u32string>& ocr_tokens,
                              const std::vector<std::u32string>& gs_tokens);

struct SegmentationCensus {
    size_t total = 0;            // erroneous tokens (label 1)
    size_t run_on = 0;           // lost word boundaries
    size_t incorrect_split = 0;  // spurious word boundaries
    size_t word_segmentation() const { return run_on + incorrect_split; }
    size_t other() const {
        const size_t seg = word_segmentation();
        return total > seg ? total - seg : 0;
    }
};

SegmentationCensus segmentation_error_census(const std::vector<corpus::SentencePair>& sentences);

}  // namespace ocrpost::metrics
