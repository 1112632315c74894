#include "ocrpost/detect.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "ocrpost/errors.hpp"
#include "ocrpost/unicode.hpp"

namespace ocrpost::detect {

void Lexicon::add(std::u32string_view word, uint64_t count) {
    if (count == 0) count = 1;
    entries[fold_case(word)] += count;
}

bool Lexicon::contains(std::u32string_view word) const {
    return entries.count(fold_case(word)) > 0;
}

uint64_t Lexicon::frequency(std::u32string_view word) const {
    auto it = entries.find(fold_case(word));
    return it == entries.end() ? 0 : it->second;
}

Lexicon Lexicon::parse(std::string_view text) {
    Lexicon lex;
    size_t start = 0;
    while (start < text.size()) {
        size_t end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(start, end - start);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (!line.empty() && line.front() != '#') {
            const size_t tab = line.find('\t');
            if (tab == std::string_view::npos) {
                lex.add(utf8_decode(line));
            } else {
                uint64_t count = 1;
                try {
                    count = std::stoull(std::string(line.substr(tab + 1)));
                } catch (const std::exception&) {
                    count = 1;
                }
                lex.add(utf8_decode(line.substr(0, tab)), count);
            }
        }
        start = end + 1;
    }
    return lex;
}

std::string Lexicon::serialize() const {
    std::vector<std::pair<std::u32string, uint64_t>> sorted(entries.begin(), entries.end());
    std::sort(sorted.begin(), sorted.end());
    std::string out;
    for (const auto& [word, count] : sorted)
        out += utf8_encode(word) + "\t" + std::to_string(count) + "\n";
    return out;
}

int dict_detect(std::u32string_view token, const Lexicon& lexicon) {
    return lexicon.contains(token) ? 0 : 1;
}

namespace {

constexpr uint64_t kFnvOffset = 1469598103934665603ULL;
constexpr uint64_t kFnvPrime = 1099511628211ULL;

uint64_t fnv1a(std::string_view bytes, uint8_t ns) {
    uint64_t h = kFnvOffset;
    h ^= ns;
    h *= kFnvPrime;
    for (char b : bytes) {
        h ^= static_cast<unsigned char>(b);
        h *= kFnvPrime;
    }
    return h;
}

void add_grams(std::u32string_view token, uint8_t ns, const NgramConfig& cfg,
               std::vector<uint32_t>& out) {
    std::u32string marked;
    marked.reserve(token.size() + 2);
    marked.push_back(U'<');
    marked += token;
    marked.push_back(U'>');
    const uint32_t mask = (1u << cfg.bits) - 1;
    for (int n = cfg.min_n; n <= cfg.max_n; ++n) {
        if (static_cast<size_t>(n) > marked.size()) break;
        for (size_t i = 0; i + n <= marked.size(); ++i) {
            const std::string gram = utf8_encode(marked.substr(i, n));
            out.push_back(static_cast<uint32_t>(fnv1a(gram, ns)) & mask);
        }
    }
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double score_features(const NgramDetectorModel& m, const std::vector<uint32_t>& feats) {
    double s = m.bias;
    for (uint32_t f : feats) s += m.weights[f];
    return s;
}

}  // namespace

std::vector<uint32_t> featurize(std::u32string_view token, const TokenContext& context,
                                const NgramConfig& config) {
    std::vector<uint32_t> feats;
    add_grams(token, 0, config, feats);
    if (config.context) {
        if (!context.prev.empty()) add_grams(context.prev, 1, config, feats);
        if (!context.next.empty()) add_grams(context.next, 2, config, feats);
    }
    std::sort(feats.begin(), feats.end());
    feats.erase(std::unique(feats.begin(), feats.end()), feats.end());
    return feats;
}

NgramConfig NgramDetectorModel::feature_config() const {
    NgramConfig cfg;
    cfg.min_n = min_n;
    cfg.max_n = max_n;
    cfg.bits = bits;
    cfg.context = context;
    return cfg;
}

double NgramDetectorModel::raw_score(std::u32string_view token, const TokenContext& ctx) const {
    return score_features(*this, featurize(token, ctx, feature_config()));
}

double NgramDetectorModel::probability(std::u32string_view token, const TokenContext& ctx) const {
    return sigmoid(raw_score(token, ctx));
}

DetectorTraining train_ngram_detector(const std::vector<LabeledToken>& data,
                                      const NgramConfig& config) {
    bool has_pos = false, has_neg = false;
    for (const auto& d : data) (d.label ? has_pos : has_neg) = true;
    if (!has_pos || !has_neg)
        throw DegenerateData("train_ngram_detector: need at least one example of each class");

    DetectorTraining out;
    auto& model = out.model;
    model.min_n = config.min_n;
    model.max_n = config.max_n;
    model.bits = config.bits;
    model.context = config.context;
    model.weights.assign(size_t{1} << config.bits, 0.0);

    std::vector<std::vector<uint32_t>> features(data.size());
    for (size_t i = 0; i < data.size(); ++i)
        features[i] = featurize(data[i].token, data[i].context, config);

    std::vector<size_t> order(data.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        Rng rng(config.seed + static_cast<uint64_t>(epoch));
        rng.shuffle(order);
        for (size_t i : order) {
            const double p = sigmoid(score_features(model, features[i]));
            const double grad = p - static_cast<double>(data[i].label);
            const double step = config.learning_rate * grad;
            model.bias -= step;
            for (uint32_t f : features[i]) model.weights[f] -= step;
        }
        double loss = 0.0;
        for (size_t i = 0; i < data.size(); ++i) {
            const double p = sigmoid(score_features(model, features[i]));
            const double eps = 1e-12;
            loss -= data[i].label ? std::log(p + eps) : std::log(1.0 - p + eps);
        }
        out.epoch_loss.push_back(loss / static_cast<double>(data.size()));
    }
    return out;
}

int ngram_detect(std::u32string_view token, const TokenContext& context,
                 const NgramDetectorModel& model, double threshold) {
    return model.probability(token, context) >= threshold ? 1 : 0;
}

std::vector<int> merge_subtoken_labels(const std::vector<SubtokenGroup>& groups) {
    if (groups.empty()) return {};
    size_t max_index = 0;
    for (const auto& g : groups) max_index = std::max(max_index, g.token_index);
    std::vector<int> merged(max_index + 1, -1);
    for (const auto& g : groups) {
        if (g.predictions.empty())
            throw GapInGroups("merge_subtoken_labels: empty prediction list for token " +
                              std::to_string(g.token_index));
        int any = 0;
        for (int p : g.predictions) any |= (p != 0);
        if (merged[g.token_index] < 0)
            merged[g.token_index] = any;
        else
            merged[g.token_index] |= any;
    }
    for (size_t i = 0; i < merged.size(); ++i)
        if (merged[i] < 0)
            throw GapInGroups("merge_subtoken_labels: no group for token " + std::to_string(i));
    return merged;
}

std::vector<LabeledToken> parse_fasttext_format(std::string_view text) {
    std::vector<LabeledToken> out;
    size_t start = 0, line_no = 1;
    constexpr std::string_view kPrefix = "__label__";
    while (start < text.size()) {
        size_t end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(start, end - start);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (!line.empty()) {
            if (line.substr(0, kPrefix.size()) != kPrefix || line.size() < kPrefix.size() + 3)
                throw MalformedRecord("expected __label__<0|1> <word>", line_no);
            const char lbl = line[kPrefix.size()];
            if ((lbl != '0' && lbl != '1') || line[kPrefix.size() + 1] != ' ')
                throw MalformedRecord("expected __label__<0|1> <word>", line_no);
            LabeledToken t;
            t.label = lbl == '1' ? 1 : 0;
            t.token = utf8_decode(line.substr(kPrefix.size() + 2));
            out.push_back(std::move(t));
        }
        start = end + 1;
        ++line_no;
    }
    return out;
}

std::string to_fasttext_format(const std::vector<LabeledToken>& data) {
    std::string out;
    for (const auto& d : data) {
        out += "__label__";
        out += d.label ? '1' : '0';
        out += ' ';
        out += utf8_encode(d.token);
        out += '\n';
    }
    return out;
}

namespace {

constexpr char kModelMagic[4] = {'N', 'G', 'D', '1'};

template <typename T>
void write_pod(std::ofstream& f, const T& v) {
    f.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void read_pod(std::ifstream& f, T& v) {
    f.read(reinterpret_cast<char*>(&v), sizeof(T));
}

}  // namespace

void NgramDetectorModel::save(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw CheckpointError("cannot open " + path + " for writing");
    f.write(kModelMagic, 4);
    const uint32_t version = 1;
    write_pod(f, version);
    write_pod(f, static_cast<int32_t>(min_n));
    write_pod(f, static_cast<int32_t>(max_n));
    write_pod(f, static_cast<int32_t>(bits));
    write_pod(f, static_cast<uint8_t>(context ? 1 : 0));
    write_pod(f, bias);
    const uint64_t n = weights.size();
    write_pod(f, n);
    f.write(reinterpret_cast<const char*>(weights.data()),
            static_cast<std::streamsize>(n * sizeof(double)));
    if (!f) throw CheckpointError("short write to " + path);
}

NgramDetectorModel NgramDetectorModel::load(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw CheckpointError("cannot open " + path);
    char magic[4];
    f.read(magic, 4);
    if (!f || std::memcmp(magic, kModelMagic, 4) != 0)
        throw CheckpointError(path + ": not an n-gram detector model");
    uint32_t version = 0;
    read_pod(f, version);
    if (version != 1) throw CheckpointError(path + ": unsupported model version");
    NgramDetectorModel m;
    int32_t v = 0;
    read_pod(f, v);
    m.min_n = v;
    read_pod(f, v);
    m.max_n = v;
    read_pod(f, v);
    m.bits = v;
    uint8_t ctx = 0;
    read_pod(f, ctx);
    m.context = ctx != 0;
    read_pod(f, m.bias);
    uint64_t n = 0;
    read_pod(f, n);
    if (!f || n != (uint64_t{1} << m.bits)) throw CheckpointError(path + ": corrupt model header");
    m.weights.resize(n);
    f.read(reinterpret_cast<char*>(m.weights.data()),
           static_cast<std::streamsize>(n * sizeof(double)));
    if (!f) throw CheckpointError(path + ": truncated weight block");
    return m;
}

}  // namespace ocrpost::detect
