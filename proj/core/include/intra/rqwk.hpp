#pragma once

// Reverse-QWK: lift per-head cross-attention queries into the shared
// normalized key space so every layer scores against the same stored rows.

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "intra/error.hpp"

namespace intra {

template <typename T>
using MatT = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using VecT = Eigen::Matrix<T, Eigen::Dynamic, 1>;

// q̃ = W_K (q ⊙ γ_K), with W_K the d × d_h block of the head's KV group.
template <typename T>
VecT<T> reverse_qwk_transform(const VecT<T>& q_head, const VecT<T>& gamma_k, const MatT<T>& w_k_block) {
    require(q_head.size() == gamma_k.size() && w_k_block.cols() == q_head.size(), Errc::config,
            "reverse_qwk_transform: shape mismatch");
    return w_k_block * q_head.cwiseProduct(gamma_k);
}

// k^(g)_j = (k̄_j W_K^(g)) ⊙ γ_K. Reference path only.
template <typename T>
std::vector<MatT<T>> standard_keys(const MatT<T>& kbar, const VecT<T>& gamma_k,
                                   const std::vector<MatT<T>>& w_k_blocks) {
    std::vector<MatT<T>> out;
    out.reserve(w_k_blocks.size());
    for (const auto& w : w_k_blocks) {
        require(w.rows() == kbar.cols() && w.cols() == gamma_k.size(), Errc::config,
                "standard_keys: shape mismatch");
        out.push_back((kbar * w) * gamma_k.asDiagonal());
    }
    return out;
}

// Scaled logits for every head: rows of q_heads are heads (n_h × d_h), result n_h × L.
template <typename T>
MatT<T> rqwk_logits(const MatT<T>& q_heads, const VecT<T>& gamma_k, const std::vector<MatT<T>>& w_k_blocks,
                    const MatT<T>& kbar) {
    const auto n_h = q_heads.rows();
    const auto n_kv = static_cast<Eigen::Index>(w_k_blocks.size());
    require(n_kv >= 1 && n_h % n_kv == 0, Errc::config, "rqwk_logits: n_h must be a multiple of n_kv");
    const auto n_rep = n_h / n_kv;
    const T scale = T(1) / std::sqrt(static_cast<T>(q_heads.cols()));
    MatT<T> out(n_h, kbar.rows());
    for (Eigen::Index h = 0; h < n_h; ++h) {
        VecT<T> lifted = reverse_qwk_transform<T>(q_heads.row(h).transpose(), gamma_k, w_k_blocks[h / n_rep]);
        out.row(h) = (kbar * lifted).transpose() * scale;
    }
    return out;
}

template <typename T>
MatT<T> standard_logits(const MatT<T>& q_heads, const VecT<T>& gamma_k, const std::vector<MatT<T>>& w_k_blocks,
                        const MatT<T>& kbar) {
    const auto n_h = q_heads.rows();
    const auto n_kv = static_cast<Eigen::Index>(w_k_blocks.size());
    require(n_kv >= 1 && n_h % n_kv == 0, Errc::config, "standard_logits: n_h must be a multiple of n_kv");
    const auto n_rep = n_h / n_kv;
    const T scale = T(1) / std::sqrt(static_cast<T>(q_heads.cols()));
    auto keys = standard_keys<T>(kbar, gamma_k, w_k_blocks);
    MatT<T> out(n_h, kbar.rows());
    for (Eigen::Index h = 0; h < n_h; ++h)
        out.row(h) = (keys[h / n_rep] * q_heads.row(h).transpose()).transpose() * scale;
    return out;
}

}  // namespace intra
