#include "ocrpost/confusion.hpp"

#include "ocrpost/errors.hpp"
#include "ocrpost/unicode.hpp"

namespace ocrpost::confusion {

namespace {

bool is_marker(char32_t c) {
    return c == corpus::kPadding || c == corpus::kUncertain;
}

std::string write_cell(char32_t c) {
    if (c == kEpsilon) return "<eps>";
    switch (c) {
        case U'\t': return "\\t";
        case U'\n': return "\\n";
        case U'\\': return "\\\\";
        default: return utf8_encode(c);
    }
}

char32_t read_cell(std::string_view s, size_t line_no) {
    if (s == "<eps>") return kEpsilon;
    if (s == "\\t") return U'\t';
    if (s == "\\n") return U'\n';
    if (s == "\\\\") return U'\\';
    const std::u32string u = utf8_decode(s);
    if (u.size() != 1)
        throw MalformedRecord("confusion cell must be a single character, got \"" +
                                  std::string(s) + "\"",
                              line_no);
    return u[0];
}

}  // namespace

void ConfusionMatrix::add(char32_t source, char32_t emitted, uint64_t n) {
    rows[source][emitted] += n;
    total += n;
}

uint64_t ConfusionMatrix::count(char32_t source, char32_t emitted) const {
    auto row = rows.find(source);
    if (row == rows.end()) return 0;
    auto it = row->second.find(emitted);
    return it == row->second.end() ? 0 : it->second;
}

uint64_t ConfusionMatrix::row_total(char32_t source) const {
    auto row = rows.find(source);
    if (row == rows.end()) return 0;
    uint64_t sum = 0;
    for (const auto& [_, n] : row->second) sum += n;
    return sum;
}

ConfusionMatrix build_confusion(const std::vector<corpus::AlignedRecord>& records,
                                bool substitutions_only) {
    ConfusionMatrix m;
    for (const auto& rec : records) {
        for (size_t i = 0; i < rec.gs_aligned.size(); ++i) {
            char32_t g = rec.gs_aligned[i], o = rec.ocr_aligned[i];
            if (substitutions_only && (is_marker(g) || is_marker(o))) continue;
            if (is_marker(g)) g = kEpsilon;
            if (is_marker(o)) o = kEpsilon;
            m.add(g, o);
        }
    }
    return m;
}

double error_rate(const ConfusionMatrix& matrix) {
    if (matrix.empty()) throw EmptyMatrix("error_rate: empty confusion matrix");
    uint64_t identity = 0;
    for (const auto& [src, row] : matrix.rows) {
        auto it = row.find(src);
        if (it != row.end()) identity += it->second;
    }
    return 1.0 - static_cast<double>(identity) / static_cast<double>(matrix.total);
}

char32_t sample_emission(const ConfusionMatrix& matrix, char32_t source_char, Rng& rng) {
    auto row = matrix.rows.find(source_char);
    if (row == matrix.rows.end() || row->second.empty()) return source_char;
    uint64_t total = 0;
    for (const auto& [_, n] : row->second) total += n;
    const double u = rng.uniform01();
    auto target = static_cast<uint64_t>(u * static_cast<double>(total));
    if (target >= total) target = total - 1;
    uint64_t acc = 0;
    for (const auto& [emitted, n] : row->second) {
        acc += n;
        if (target < acc) return emitted;
    }
    return row->second.rbegin()->first;  // unreachable
}

std::string serialize(const ConfusionMatrix& matrix) {
    std::string out;
    for (const auto& [src, row] : matrix.rows) {
        for (const auto& [emitted, n] : row) {
            out += write_cell(src);
            out += '\t';
            out += write_cell(emitted);
            out += '\t';
            out += std::to_string(n);
            out += '\n';
        }
    }
    return out;
}

ConfusionMatrix parse_matrix(std::string_view text) {
    ConfusionMatrix m;
    size_t start = 0, line_no = 1;
    while (start < text.size()) {
        size_t end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(start, end - start);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (!line.empty()) {
            const size_t t1 = line.find('\t');
            const size_t t2 = t1 == std::string_view::npos ? t1 : line.find('\t', t1 + 1);
            if (t2 == std::string_view::npos)
                throw MalformedRecord("expected source<TAB>emitted<TAB>count", line_no);
            const char32_t src = read_cell(line.substr(0, t1), line_no);
            const char32_t emitted = read_cell(line.substr(t1 + 1, t2 - t1 - 1), line_no);
            uint64_t n = 0;
            const std::string count_str(line.substr(t2 + 1));
            try {
                n = std::stoull(count_str);
            } catch (const std::exception&) {
                throw MalformedRecord("bad count \"" + count_str + "\"", line_no);
            }
            m.add(src, emitted, n);
        }
        start = end + 1;
        ++line_no;
    }
    return m;
}

}  // namespace ocrpost::confusion
