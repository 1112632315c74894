#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ocrpost/corpus.hpp"
#include "ocrpost/rng.hpp"

namespace ocrpost::confusion {

// Distinguished symbol for deletion/insertion mass; outside the Unicode
// scalar range so it can never collide with a real character.
constexpr char32_t kEpsilon = 0x110000;

// Rows are gold (true) characters, columns the characters the OCR emitted,
// so probability(row -> col) is P(emitted | true).
struct ConfusionMatrix {
    std::map<char32_t, std::map<char32_t, uint64_t>> rows;
    uint64_t total = 0;

    void add(char32_t source, char32_t emitted, uint64_t n = 1);
    uint64_t count(char32_t source, char32_t emitted) const;
    uint64_t row_total(char32_t source) const;
    bool empty() const { return total == 0; }
};

// Counts every aligned position, identity pairs included; positions where
// either side is '@'/'#' contribute under kEpsilon. With substitutions_only
// those positions are skipped entirely.
ConfusionMatrix build_confusion(const std::vector<corpus::AlignedRecord>& records,
                                bool substitutions_only = false);

// 1 - identity mass / total mass. Throws EmptyMatrix.
double error_rate(const ConfusionMatrix& matrix);

// Draws from the row distribution of source_char; kEpsilon means "delete".
// Unseen characters are returned unchanged.
char32_t sample_emission(const ConfusionMatrix& matrix, char32_t source_char, Rng& rng);

// Plain-text rows "source<TAB>emitted<TAB>count", lexicographic by code
// point; kEpsilon spelled "<eps>", tab/newline/backslash escaped.
std::string serialize(const ConfusionMatrix& matrix);
ConfusionMatrix parse_matrix(std::string_view text);

}  // namespace ocrpost::confusion
