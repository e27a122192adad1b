#pragma once

#include <vector>

#include "intra/model.hpp"

namespace intra {

// Intermediates recorded by decoder_forward for the reverse pass.
struct SelfAttnTape {
    Mat x;           // residual stream entering the block
    Mat a;           // normalized input
    Mat q, k, v;     // projected, q and k rotated
    std::vector<Mat> p;  // per-head attention probabilities
};

struct CrossAttnTape {
    Mat x;
    Mat c;           // normalized input
    Mat q;           // rotated head queries before γ_K and the lift
    Mat vctx;        // context values, N × (n_kv·d_h)
    std::vector<Mat> p;
};

struct FfnTape {
    Mat x;
    Mat f;           // normalized input
    Mat u;           // pre-activation
};

struct DecoderLayerTape {
    SelfAttnTape attn;
    CrossAttnTape cross;
    FfnTape ffn;
};

struct DecoderTape {
    std::vector<DecoderLayerTape> layers;
    Mat context;
};

// Gradient of a scalar w.r.t. the decoder input rows, given its gradient w.r.t.
// the exposed query rows (same layout as ExposedQueries::rows). Weights are frozen.
Mat decoder_backward(const ModelWeights& w, const DecoderTape& tape, const std::vector<int>& positions,
                     const Mat& grad_exposed);

// Building blocks, shared with the forward pass.
namespace nn {
Mat norm_scaled(const Mat& x, const Vec& scale, double eps);
// Backward of y = rms_norm(x) ⊙ scale.
Mat norm_scaled_backward(const Mat& x, const Vec& scale, double eps, const Mat& gy);
double gelu(double x);
double gelu_grad(double x);
// Rotates every d_h slice of every row; row t uses position t.
void rope_rows(Mat& m, int d_h, double base, bool inverse = false);
// row0 offsets the causal mask when s holds a block of query rows.
void softmax_rows(Mat& s, bool causal, Eigen::Index row0 = 0);
Mat softmax_backward(const Mat& p, const Mat& gp);
}  // namespace nn

}  // namespace intra
