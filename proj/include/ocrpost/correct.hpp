#pragma once

#include <functional>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "ocrpost/detect.hpp"
#include "ocrpost/numkit.hpp"

namespace ocrpost::correct {

// ---------- kNN / Levenshtein baseline ----------

// Candidates are lexicon entries at Levenshtein distance 1, falling back to
// distance 2; ties broken by higher frequency, then lexicographically. An
// exact lexicon hit, or no candidate within distance 2, returns the token
// unchanged. Lookup is by symmetric deletion indexing, verified with exact
// edit distance.
class KnnCorrector {
public:
    explicit KnnCorrector(const detect::Lexicon& lexicon);

    std::u32string correct(std::u32string_view token) const;

private:
    struct Entry {
        std::u32string word;
        uint64_t freq;
    };
    std::vector<Entry> entries_;
    std::vector<uint32_t> long_entries_;  // too long for deletion indexing
    std::unordered_map<std::u32string, std::vector<uint32_t>> delete_index_;
    const detect::Lexicon* lexicon_;
};

// One-shot convenience wrapper around KnnCorrector.
std::u32string knn_correct(std::u32string_view token, const detect::Lexicon& lexicon);

// ---------- character vocabulary ----------

struct Vocab {
    static constexpr int kPad = 0, kSos = 1, kEos = 2, kUnk = 3;

    std::vector<char32_t> id_to_char;  // slots 0..3 hold 0
    std::unordered_map<char32_t, int> char_to_id;

    static Vocab build(const std::vector<std::u32string>& texts);

    size_t size() const { return id_to_char.size(); }
    int id(char32_t c) const;  // kUnk for out-of-vocabulary characters
    char32_t char_at(int id) const { return id_to_char[static_cast<size_t>(id)]; }
    bool is_special(int id) const { return id < 4; }

    std::string manifest() const;  // "char<TAB>id" lines
    static Vocab from_manifest(std::string_view text);
};

// ---------- model ----------

struct CorrectorConfig {
    size_t embed_dim = 32;
    size_t hidden_dim = 64;     // per encoder direction; decoder state is 2H
    size_t attn_dim = 0;        // 0 = hidden_dim
    size_t diag_window = 3;     // m
    size_t beam_width = 4;
    size_t max_output_len = 64;
    double lambda_diag = 1.0;
    double lambda_cov = 1.0;
    size_t epochs = 60;
    size_t patience = 5;
    double learning_rate = 1e-3;
    uint64_t seed = 42;
    bool teacher_forcing = true;
    bool use_copy = true;
    bool use_coverage = true;   // coverage term in attention + L_c
    double dev_fraction = 0.1;  // 0 = early-stop on the training loss
    size_t max_pairs = 0;       // 0 = no cap

    size_t attention_dim() const { return attn_dim == 0 ? hidden_dim : attn_dim; }
};

struct Seq2SeqParams {
    Vocab vocab;
    size_t embed_dim = 0, hidden_dim = 0, attn_dim = 0;
    bool use_copy = true, use_coverage = true;

    numkit::Tensor embedding;  // V x E, shared by encoder and decoder
    numkit::Tensor enc_fwd_wx, enc_fwd_wh, enc_fwd_b;
    numkit::Tensor enc_bwd_wx, enc_bwd_wh, enc_bwd_b;
    numkit::Tensor dec_wx, dec_wh, dec_b;
    numkit::Tensor att_w1, att_w2, att_wg, att_v;
    numkit::Tensor out_w, out_b;
    numkit::Tensor copy_wc, copy_ws, copy_wx, copy_b;

    static Seq2SeqParams init(const Vocab& vocab, const CorrectorConfig& config);

    // Stable name/tensor ordering used for checkpoints, gradient collection,
    // and the optimizer.
    std::vector<std::pair<std::string, numkit::Tensor*>> entries();
    std::vector<std::pair<std::string, const numkit::Tensor*>> entries() const;

    // Writes the parameter checkpoint at `path` and the vocab manifest at
    // `path + ".vocab"`.
    void save(const std::string& path) const;
    static Seq2SeqParams load(const std::string& path);
};

// Tape handles for one forward pass over the parameters.
struct ParamVars {
    const Seq2SeqParams* ref = nullptr;
    numkit::Var embedding;
    numkit::Var enc_fwd_wx, enc_fwd_wh, enc_fwd_b;
    numkit::Var enc_bwd_wx, enc_bwd_wh, enc_bwd_b;
    numkit::Var dec_wx, dec_wh, dec_b;
    numkit::Var att_w1, att_w2, att_wg, att_v;
    numkit::Var out_w, out_b;
    numkit::Var copy_wc, copy_ws, copy_wx, copy_b;

    std::vector<numkit::Var> ordered() const;
};

ParamVars bind(numkit::Tape& tape, const Seq2SeqParams& params);
// Rebinds externally created leaves (entries() order); used by the
// finite-difference harness.
ParamVars bind_vars(const Seq2SeqParams& ref, const std::vector<numkit::Var>& leaves);

// ---------- forward pieces ----------

struct EncodedSource {
    std::u32string surface;
    std::vector<int> ids;
    numkit::Var h_matrix;    // N x 2H, h_i rows
    numkit::Var h_matrix_t;  // 2H x N
    numkit::Var w2h;         // N x A, precomputed W2 h_i
    numkit::Var s0, c0;      // decoder initial state
};

// Bidirectional encoder; throws EmptyInput on an empty token.
EncodedSource encode(numkit::Tape& tape, const ParamVars& pv, std::u32string_view chars);

struct AttentionResult {
    numkit::Var alpha;    // N
    numkit::Var context;  // 2H
};

// e_i = v . tanh(W1 s_prev + W2 h_i + wg g_i); alpha = softmax(e);
// context = sum_i alpha_i h_i. The coverage term is used only when the
// model was built with use_coverage.
AttentionResult attention_step(numkit::Tape& tape, const ParamVars& pv, numkit::Var s_prev,
                               const EncodedSource& enc, numkit::Var coverage);

struct LstmState {
    numkit::Var h, c;
};

struct DecodeResult {
    AttentionResult att;
    LstmState state;
    numkit::Var p_vocab;  // V
    numkit::Var p_gen;    // scalar; meaningful when use_copy
    numkit::Var x;        // embedded input
};

DecodeResult decode_step(numkit::Tape& tape, const ParamVars& pv, int prev_char_id,
                         const LstmState& state, const EncodedSource& enc, numkit::Var coverage);

// Full mixed output distribution at one step (inference path):
// P_final(w) = P_g P_vocab(w) + (1 - P_g) sum_{i: source_i = w} alpha_i.
struct StepDistribution {
    std::vector<double> vocab_probs;          // indexed by vocab id
    std::map<char32_t, double> oov_copy;      // copy-only characters
    double p_gen = 1.0;
};

StepDistribution mix_distribution(const std::vector<double>& p_vocab, double p_gen,
                                  const std::vector<double>& alpha,
                                  const std::u32string& surface, const Vocab& vocab,
                                  bool use_copy);

// ---------- losses ----------

// Attention mass outside the band |i - t| < m, positions and steps
// 1-indexed; alphas is T x N.
double loss_diag(const std::vector<std::vector<double>>& alphas, size_t m);

// sum_t sum_i min(alpha_t,i, g_t,i) with g_1 = 0 and g_{t+1} = g_t + alpha_t.
double loss_coverage(const std::vector<std::vector<double>>& alphas);

// Mean attention mass inside the band |i - t| < m.
double band_mass(const std::vector<std::vector<double>>& alphas, size_t m);

struct TrainPair {
    std::u32string src, tgt;
};

struct PairLossResult {
    numkit::Var total, ce, diag, cov;
    std::vector<numkit::Var> alphas;
};

// Teacher-forced composite loss for one pair:
// L = mean_t(-log P_final(gold_t)) + lambda_diag L_diag + lambda_cov L_c.
PairLossResult pair_loss(numkit::Tape& tape, const ParamVars& pv, const TrainPair& pair,
                         const CorrectorConfig& config);

// finite_diff_check entry point: builds the composite loss from external
// leaves (entries() order).
numkit::Var build_pair_loss(numkit::Tape& tape, const Seq2SeqParams& shape_ref,
                            const std::vector<numkit::Var>& leaves, const TrainPair& pair,
                            const CorrectorConfig& config);

// Teacher-forced attention matrix (T x N) for diagnostic use.
std::vector<std::vector<double>> forced_attention(const Seq2SeqParams& params,
                                                  const TrainPair& pair);

// ---------- training ----------

struct TrainReport {
    std::vector<double> train_loss;  // per epoch
    std::vector<double> dev_loss;
    size_t best_epoch = 0;  // 1-based
    double best_dev = 0.0;
    bool stopped_early = false;
    size_t pairs_used = 0;
    size_t pairs_dev = 0;
};

struct TrainResult {
    Seq2SeqParams params;
    TrainReport report;
};

// Splits pairs 90/10 (dev_fraction), minimizes the composite loss with an
// adaptive per-parameter learning rate, early-stops when the dev loss fails
// to improve for `patience` epochs, and returns the best-dev checkpoint.
// Deterministic under a fixed seed. Throws DegenerateData when fewer than
// two usable pairs remain. warm_start continues from existing parameters
// (vocabulary and shapes must match).
TrainResult train(const std::vector<TrainPair>& pairs, const CorrectorConfig& config,
                  const Seq2SeqParams* warm_start = nullptr);

// ---------- inference ----------

struct BeamCandidate {
    std::u32string text;
    double log_prob = 0.0;
    double score = 0.0;  // length-normalized
};

// Width-B beam over decode steps; hypotheses end at EOS or max_output_len;
// ranked by log-probability / emitted length. Returns up to k candidates.
std::vector<BeamCandidate> beam_search(const Seq2SeqParams& params, std::u32string_view token,
                                       const CorrectorConfig& config, size_t k = 1);

std::u32string beam_search_correct(const Seq2SeqParams& params, std::u32string_view token,
                                   const CorrectorConfig& config);

// Runs the detector over the tokens and replaces exactly the flagged ones
// with corrector output.
std::vector<std::u32string> pipeline_correct(
    const std::vector<std::u32string>& tokens,
    const std::function<std::vector<int>(const std::vector<std::u32string>&)>& detector,
    const std::function<std::u32string(std::u32string_view)>& corrector);

}  // namespace ocrpost::correct
