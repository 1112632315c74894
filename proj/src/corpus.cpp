#include "ocrpost/corpus.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

#include "ocrpost/errors.hpp"
#include "ocrpost/metrics.hpp"
#include "ocrpost/parallel.hpp"
#include "ocrpost/unicode.hpp"

namespace ocrpost::corpus {

namespace {

constexpr std::string_view kTagRaw = "[OCR_toInput]";
constexpr std::string_view kTagOcr = "[OCR_aligned]";
constexpr std::string_view kTagGs = "[GS_aligned]";

struct Line {
    std::string_view text;
    size_t number;  // 1-based
};

std::vector<Line> split_lines(std::string_view text) {
    std::vector<Line> lines;
    size_t start = 0, number = 1;
    while (start <= text.size()) {
        size_t end = text.find('\n', start);
        if (end == std::string_view::npos) {
            if (start < text.size()) lines.push_back({text.substr(start), number});
            break;
        }
        std::string_view line = text.substr(start, end - start);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        lines.push_back({line, number});
        start = end + 1;
        ++number;
    }
    return lines;
}

bool is_blank(std::string_view s) {
    return s.find_first_not_of(" \t") == std::string_view::npos;
}

// Returns the payload after "<tag> " (or "" when the line is exactly the tag).
std::string_view expect_tag(const Line& line, std::string_view tag) {
    if (line.text.substr(0, tag.size()) != tag)
        throw MalformedRecord("expected tag " + std::string(tag), line.number);
    std::string_view rest = line.text.substr(tag.size());
    if (rest.empty()) return rest;
    if (rest.front() != ' ')
        throw MalformedRecord("tag " + std::string(tag) + " must be followed by a space",
                              line.number);
    return rest.substr(1);
}

std::u32string decode_at(std::string_view s, size_t line_number) {
    try {
        return utf8_decode(s);
    } catch (const Utf8Error& e) {
        throw MalformedRecord(e.what(), line_number);
    }
}

}  // namespace

std::u32string strip_markers(std::u32string_view s) {
    std::u32string out;
    out.reserve(s.size());
    for (char32_t c : s)
        if (c != kPadding && c != kUncertain) out.push_back(c);
    return out;
}

std::u32string strip_padding(std::u32string_view s) {
    std::u32string out;
    out.reserve(s.size());
    for (char32_t c : s)
        if (c != kPadding) out.push_back(c);
    return out;
}

std::vector<AlignedRecord> parse_aligned(std::string_view text) {
    std::vector<AlignedRecord> records;
    const auto lines = split_lines(text);
    size_t i = 0;
    while (i < lines.size()) {
        if (is_blank(lines[i].text)) {
            ++i;
            continue;
        }
        if (i + 2 >= lines.size())
            throw MalformedRecord("incomplete record: expected 3 tagged lines", lines[i].number);
        AlignedRecord rec;
        rec.source_id = "rec-" + std::to_string(records.size());
        rec.ocr_raw = decode_at(expect_tag(lines[i], kTagRaw), lines[i].number);
        rec.ocr_aligned = decode_at(expect_tag(lines[i + 1], kTagOcr), lines[i + 1].number);
        rec.gs_aligned = decode_at(expect_tag(lines[i + 2], kTagGs), lines[i + 2].number);
        if (rec.ocr_aligned.size() != rec.gs_aligned.size())
            throw MalformedRecord("aligned length mismatch: OCR " +
                                      std::to_string(rec.ocr_aligned.size()) + " vs GS " +
                                      std::to_string(rec.gs_aligned.size()),
                                  lines[i + 1].number);
        if (rec.ocr_raw != strip_padding(rec.ocr_aligned))
            throw MalformedRecord("raw OCR line does not match the '@'-stripped aligned line",
                                  lines[i].number);
        records.push_back(std::move(rec));
        i += 3;
        if (i < lines.size() && !is_blank(lines[i].text))
            throw MalformedRecord("expected blank line between records", lines[i].number);
    }
    return records;
}

std::string write_aligned(const std::vector<AlignedRecord>& records) {
    std::string out;
    for (size_t i = 0; i < records.size(); ++i) {
        if (i) out += "\n";
        out += std::string(kTagRaw) + " " + utf8_encode(records[i].ocr_raw) + "\n";
        out += std::string(kTagOcr) + " " + utf8_encode(records[i].ocr_aligned) + "\n";
        out += std::string(kTagGs) + " " + utf8_encode(records[i].gs_aligned) + "\n";
    }
    return out;
}

SentencePair align_tokens(const AlignedRecord& record) {
    SentencePair sp;
    sp.record = record;
    const auto& gs = record.gs_aligned;
    const auto& ocr = record.ocr_aligned;
    size_t i = 0;
    while (i < gs.size()) {
        while (i < gs.size() && is_space(gs[i])) ++i;
        size_t b = i;
        while (i < gs.size() && !is_space(gs[i])) ++i;
        if (i == b) break;
        TokenPair tp;
        tp.span_begin = b;
        tp.span_end = i;
        tp.gs_token = strip_markers(std::u32string_view(gs).substr(b, i - b));
        tp.ocr_token = strip_markers(std::u32string_view(ocr).substr(b, i - b));
        tp.label = tp.ocr_token != tp.gs_token ? 1 : 0;
        sp.tokens.push_back(std::move(tp));
    }
    sp.norm_lev = metrics::normalized_levenshtein(strip_markers(ocr), strip_markers(gs));
    return sp;
}

std::vector<SentencePair> align_corpus(const std::vector<AlignedRecord>& records,
                                       size_t threads) {
    std::vector<SentencePair> out(records.size());
    parallel_for(records.size(), threads, [&](size_t i) { out[i] = align_tokens(records[i]); });
    return out;
}

std::vector<SentencePair> filter_by_noise(const std::vector<SentencePair>& sentences,
                                          double threshold) {
    std::vector<SentencePair> out;
    out.reserve(sentences.size());
    for (const auto& s : sentences)
        if (s.norm_lev < threshold) out.push_back(s);
    return out;
}

double sentence_cer(const SentencePair& s) {
    return metrics::cer(strip_markers(s.record.ocr_aligned), strip_markers(s.record.gs_aligned));
}

CorpusStats corpus_stats(const std::vector<SentencePair>& sentences) {
    CorpusStats stats;
    stats.n_sentences = sentences.size();
    std::vector<double> cers;
    cers.reserve(sentences.size());
    for (const auto& s : sentences) {
        stats.n_words += s.tokens.size();
        for (const auto& t : s.tokens)
            if (t.label) ++stats.n_errors;
        if (!strip_markers(s.record.gs_aligned).empty()) cers.push_back(sentence_cer(s));
    }
    if (!cers.empty()) {
        double sum = 0.0;
        for (double c : cers) sum += c;
        stats.mean_cer = sum / static_cast<double>(cers.size());
        double var = 0.0;
        for (double c : cers) var += (c - stats.mean_cer) * (c - stats.mean_cer);
        stats.std_cer = std::sqrt(var / static_cast<double>(cers.size()));
    }
    return stats;
}

std::string tokens_to_jsonl(const std::vector<SentencePair>& sentences) {
    std::string out;
    for (const auto& s : sentences) {
        for (size_t i = 0; i < s.tokens.size(); ++i) {
            nlohmann::json j;
            j["source_id"] = s.record.source_id;
            j["index"] = i;
            j["ocr_token"] = utf8_encode(s.tokens[i].ocr_token);
            j["gs_token"] = utf8_encode(s.tokens[i].gs_token);
            j["label"] = s.tokens[i].label;
            out += j.dump();
            out += "\n";
        }
    }
    return out;
}

}  // namespace ocrpost::corpus
