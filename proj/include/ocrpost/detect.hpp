#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "ocrpost/rng.hpp"

namespace ocrpost::detect {

// Word -> frequency map. Entries are case-folded at insertion; lookup is
// exact match on the folded form (no fuzzy matching, no punctuation
// stripping).
struct Lexicon {
    std::unordered_map<std::u32string, uint64_t> entries;

    void add(std::u32string_view word, uint64_t count = 1);
    bool contains(std::u32string_view word) const;
    uint64_t frequency(std::u32string_view word) const;

    // "word[<TAB>count]" lines; '#'-comments allowed; duplicates sum.
    static Lexicon parse(std::string_view text);
    std::string serialize() const;
};

// 0 if the folded token is a lexicon entry, else 1.
int dict_detect(std::u32string_view token, const Lexicon& lexicon);

struct NgramConfig {
    int min_n = 1;
    int max_n = 5;
    int bits = 20;        // weight vector has 2^bits buckets
    bool context = true;  // include neighbor-token n-grams
    int epochs = 10;
    double learning_rate = 0.1;
    uint64_t seed = 42;
};

struct TokenContext {
    std::u32string prev;
    std::u32string next;
};

// Hashed binary features: character n-grams of "<token>" plus, when
// context is enabled, n-grams of the boundary-marked neighbors under
// distinct hash namespaces. Returns sorted unique bucket indices.
std::vector<uint32_t> featurize(std::u32string_view token, const TokenContext& context,
                                const NgramConfig& config);

struct NgramDetectorModel {
    std::vector<double> weights;
    double bias = 0.0;
    int min_n = 1, max_n = 5, bits = 20;
    bool context = true;

    NgramConfig feature_config() const;
    double raw_score(std::u32string_view token, const TokenContext& context) const;
    // sigmoid(raw_score): probability that the token is erroneous.
    double probability(std::u32string_view token, const TokenContext& context) const;

    void save(const std::string& path) const;
    static NgramDetectorModel load(const std::string& path);
};

struct LabeledToken {
    std::u32string token;
    TokenContext context;
    int label = 0;
};

struct DetectorTraining {
    NgramDetectorModel model;
    std::vector<double> epoch_loss;  // mean log-loss after each epoch
};

// Logistic regression by SGD; deterministic under a fixed seed. Throws
// DegenerateData when only one class is present.
DetectorTraining train_ngram_detector(const std::vector<LabeledToken>& data,
                                      const NgramConfig& config);

// 1 iff probability >= threshold.
int ngram_detect(std::u32string_view token, const TokenContext& context,
                 const NgramDetectorModel& model, double threshold = 0.5);

struct SubtokenGroup {
    size_t token_index = 0;
    std::vector<int> predictions;
};

// Per-token OR over sub-token predictions. Groups must cover token indices
// 0..n-1; throws GapInGroups otherwise.
std::vector<int> merge_subtoken_labels(const std::vector<SubtokenGroup>& groups);

// "__label__<0|1> <word>" lines (no context).
std::vector<LabeledToken> parse_fasttext_format(std::string_view text);
std::string to_fasttext_format(const std::vector<LabeledToken>& data);

}  // namespace ocrpost::detect
