#include "ocrpost/metrics.hpp"

#include <algorithm>
#include <atomic>

#include "ocrpost/corpus.hpp"
#include "ocrpost/errors.hpp"
#include "ocrpost/parallel.hpp"
#include "ocrpost/unicode.hpp"

namespace ocrpost::metrics {

size_t levenshtein(std::u32string_view a, std::u32string_view b) {
    if (a.size() > b.size()) std::swap(a, b);  // keep the row short
    const size_t n = a.size(), m = b.size();
    if (n == 0) return m;
    std::vector<size_t> row(n + 1);
    for (size_t j = 0; j <= n; ++j) row[j] = j;
    for (size_t i = 1; i <= m; ++i) {
        size_t diag = row[0];
        row[0] = i;
        for (size_t j = 1; j <= n; ++j) {
            const size_t sub = diag + (a[j - 1] == b[i - 1] ? 0 : 1);
            diag = row[j];
            row[j] = std::min({row[j] + 1, row[j - 1] + 1, sub});
        }
    }
    return row[n];
}

size_t levenshtein_utf8(std::string_view a, std::string_view b) {
    return levenshtein(utf8_decode(a), utf8_decode(b));
}

double normalized_levenshtein(std::u32string_view a, std::u32string_view b) {
    const size_t denom = std::max(a.size(), b.size());
    if (denom == 0) return 0.0;
    return static_cast<double>(levenshtein(a, b)) / static_cast<double>(denom);
}

double cer(std::u32string_view ocr, std::u32string_view gs) {
    if (gs.empty()) throw EmptyReference("cer: empty gold standard string");
    return 100.0 * static_cast<double>(levenshtein(ocr, gs)) / static_cast<double>(gs.size());
}

DetectionReport detection_scores(const std::vector<int>& predictions,
                                 const std::vector<int>& labels) {
    if (predictions.size() != labels.size())
        throw LengthMismatch("detection_scores: " + std::to_string(predictions.size()) +
                             " predictions vs " + std::to_string(labels.size()) + " labels");
    DetectionReport r;
    for (size_t i = 0; i < labels.size(); ++i) {
        const bool p = predictions[i] != 0, l = labels[i] != 0;
        if (p && l)
            ++r.tp;
        else if (p && !l)
            ++r.fp;
        else if (!p && l)
            ++r.fn;
        else
            ++r.tn;
    }
    if (r.tp + r.fp > 0)
        r.precision = static_cast<double>(r.tp) / static_cast<double>(r.tp + r.fp);
    else
        r.degenerate_precision = true;
    if (r.tp + r.fn > 0)
        r.recall = static_cast<double>(r.tp) / static_cast<double>(r.tp + r.fn);
    else
        r.degenerate_recall = true;
    if (r.precision + r.recall > 0)
        r.f1 = 2.0 * r.precision * r.recall / (r.precision + r.recall);
    return r;
}

ImprovementReport improvement_pct(const std::vector<CorrectionTriple>& triples, size_t threads) {
    for (const auto& t : triples)
        if (t.gs.empty()) throw EmptyReference("improvement_pct: empty gold standard string");
    std::vector<size_t> lev_ocr(triples.size()), lev_cor(triples.size());
    parallel_for(triples.size(), threads, [&](size_t i) {
        lev_ocr[i] = levenshtein(triples[i].ocr, triples[i].gs);
        lev_cor[i] = levenshtein(triples[i].corrected, triples[i].gs);
    });
    ImprovementReport r;
    for (size_t i = 0; i < triples.size(); ++i) {
        r.lev_ocr_sum += lev_ocr[i];
        r.lev_corrected_sum += lev_cor[i];
        r.gs_len_sum += triples[i].gs.size();
    }
    if (r.gs_len_sum == 0) throw EmptyReference("improvement_pct: no gold characters");
    r.improvement_pct = (static_cast<double>(r.lev_ocr_sum) - static_cast<double>(r.lev_corrected_sum)) /
                        static_cast<double>(r.gs_len_sum);
    return r;
}

const char* to_string(ErrorType t) {
    switch (t) {
        case ErrorType::misrecognized_character: return "misrecognized_character";
        case ErrorType::missing_character: return "missing_character";
        case ErrorType::hallucination: return "hallucination";
        case ErrorType::run_on: return "run_on";
        case ErrorType::incorrect_split: return "incorrect_split";
    }
    return "?";
}

namespace {

bool is_subsequence(std::u32string_view needle, std::u32string_view haystack) {
    size_t i = 0;
    for (char32_t c : haystack) {
        if (i < needle.size() && needle[i] == c) ++i;
    }
    return i == needle.size();
}

}  // namespace

ErrorType classify_error_type(const std::vector<std::u32string>& ocr_tokens,
                              const std::vector<std::u32string>& gs_tokens) {
    const size_t no = ocr_tokens.size(), ng = gs_tokens.size();
    if (no == 1 && ng == 2) return ErrorType::run_on;
    if (no == 2 && ng == 1) return ErrorType::incorrect_split;
    if (no != 1 || ng != 1)
        throw Error("classify_error_type: unsupported token grouping " + std::to_string(no) +
                    ":" + std::to_string(ng));
    const std::u32string& ocr = ocr_tokens[0];
    const std::u32string& gs = gs_tokens[0];
    if (ocr == gs) throw NotAnError("classify_error_type: tokens are equal");
    if (ocr.size() < gs.size() && is_subsequence(ocr, gs)) return ErrorType::missing_character;
    if (ocr.size() > gs.size() && is_subsequence(gs, ocr)) return ErrorType::hallucination;
    return ErrorType::misrecognized_character;
}

SegmentationCensus segmentation_error_census(const std::vector<corpus::SentencePair>& sentences) {
    SegmentationCensus census;
    for (const auto& s : sentences) {
        for (const auto& t : s.tokens)
            if (t.label) ++census.total;
        // Boundary events are visible only in the aligned character streams:
        // a gold whitespace aligned against a non-whitespace OCR position is
        // a lost boundary, the reverse a spurious one.
        const auto& gs = s.record.gs_aligned;
        const auto& ocr = s.record.ocr_aligned;
        for (size_t i = 0; i < gs.size(); ++i) {
            const bool gw = is_space(gs[i]), ow = is_space(ocr[i]);
            if (gw && !ow)
                ++census.run_on;
            else if (ow && !gw)
                ++census.incorrect_split;
        }
    }
    return census;
}

}  // namespace ocrpost::metrics
