#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "intra/config.hpp"
#include "intra/linalg.hpp"

namespace intra {

// Projections use the row convention y = W x, so activations multiply by Wᵀ.
struct SelfAttnWeights {
    Mat wq;  // (n_h·d_h) × d
    Mat wk;  // (n_kv·d_h) × d
    Mat wv;  // (n_kv·d_h) × d
    Mat wo;  // d × (n_h·d_h)
    Vec norm;
};

struct CrossAttnWeights {
    Mat wq;               // (n_h·d_h) × d
    std::vector<Mat> wk;  // n_kv blocks, each d × d_h
    Vec gamma_k;          // d_h
    Mat wv;               // (n_kv·d_h) × d
    Mat wo;               // d × (n_h·d_h)
    Vec norm;
};

struct FfnWeights {
    Mat w1;  // ffn_dim × d
    Mat w2;  // d × ffn_dim
    Vec norm;
};

struct EncoderLayer {
    SelfAttnWeights attn;
    FfnWeights ffn;
};

struct DecoderLayer {
    SelfAttnWeights attn;
    CrossAttnWeights cross;
    FfnWeights ffn;
};

struct ModelWeights {
    ModelConfig cfg;
    Mat embed;  // vocab × d
    std::vector<EncoderLayer> enc;
    std::vector<DecoderLayer> dec;
    Vec final_norm;
    Mat out_head;  // vocab × d
};

// N(0, 0.02) projections, N(0, 1) embeddings, unit norm scales and γ_K.
ModelWeights init_random(const ModelConfig& cfg, uint64_t seed);
// Hand-wired weights for the synthetic two-hop task plus the same noise.
// Needs d ≥ 118, d_h ≥ 80 and vocab ≥ 64.
ModelWeights init_structured(const ModelConfig& cfg, uint64_t seed);
// "random" or "structured".
ModelWeights init_weights(const ModelConfig& cfg, const std::string& kind, uint64_t seed);

// Shape and finiteness check; throws Errc::data.
void validate_weights(const ModelWeights& w);

// Calls f(name, data, shape) for every tensor in a fixed order.
template <typename W, typename F>
void visit_tensors(W& w, F&& f);

uint64_t weights_checksum(const ModelWeights& w);
void save_weights(const ModelWeights& w, const std::string& path);
ModelWeights load_weights(const std::string& path);

Vec rms_norm(const Vec& x, double eps);
Mat rms_norm_rows(const Mat& x, double eps);

// Rotates (even, odd) coordinate pairs of row by the given angles (one per pair).
void rope_rotate(double* row, const double* cos_t, const double* sin_t, int d_h, bool inverse = false);
// Angle for pair j at a position: position · base^(−2j/d_h).
std::vector<double> rope_angles(int position, int d_h, double base);
// q is n_h × d_h; every head row is rotated for the same position.
Mat rope_apply(const Mat& q, int position, const ModelConfig& cfg);

// Token rows of the embedding table; validates ids.
Mat embed_tokens(const ModelWeights& w, const std::vector<int>& tokens);
// Final encoder hidden states, L_t × d (not normalized).
Mat encode(const ModelWeights& w, const std::vector<int>& tokens);

// Full cross-attention sub-block on the residual stream `hidden` (P × d): returns
// hidden + attention. Empty context returns hidden unchanged.
Mat cross_attention_rqwk(const ModelWeights& w, int layer, const Mat& hidden, const Mat& context,
                         const std::vector<int>& positions);
// Same sub-block through standard_keys. Reference for equivalence tests.
Mat cross_attention_standard(const ModelWeights& w, int layer, const Mat& hidden, const Mat& context,
                             const std::vector<int>& positions);

// Lifted queries, row (l·n_h + h)·P + p holds layer l, head h, position p.
struct ExposedQueries {
    int L_dec = 0, n_h = 0, P = 0, d = 0;
    Mat rows;
    Eigen::Index index(int l, int h, int p) const { return (static_cast<Eigen::Index>(l) * n_h + h) * P + p; }
};

struct DecoderOptions {
    std::vector<int> expose;      // positions whose lifted queries are collected
    bool logits = true;           // all positions
    bool last_logits_only = false;
    bool hidden_checksum = false;
    bool skip_cross = false;      // run with the cross-attention sub-blocks removed
};

struct DecoderResult {
    Mat logits;
    ExposedQueries exposed;
    uint64_t hidden_checksum = 0;
};

struct DecoderTape;  // decoder_grad.hpp

DecoderResult decoder_forward(const ModelWeights& w, const Mat& input, const Mat& context, const DecoderOptions& opt,
                              DecoderTape* tape = nullptr);

// Lowest token id wins ties; stops at EOS or max_len.
std::vector<int> greedy_decode(const ModelWeights& w, const std::vector<int>& question, const Mat& context,
                               int max_len);

}  // namespace intra

#include "intra/model_visit.hpp"
