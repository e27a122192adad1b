#pragma once

#include <cstdint>
#include <string>

namespace intra {

struct ModelConfig {
    int d = 32;
    int d_h = 8;
    int n_h = 4;
    int n_kv = 2;
    int L_enc = 2;
    int L_dec = 2;
    int vocab_size = 256;
    int max_positions = 16384;
    double rmsnorm_eps = 1e-6;
    double rope_base = 1e4;
    int ffn_mult = 4;

    int n_rep() const { return n_h / n_kv; }
    double attn_scale() const;
    int ffn_dim() const { return ffn_mult * d; }

    // Throws Errc::config on any violated invariant.
    void validate() const;

    bool operator==(const ModelConfig&) const = default;
};

// Default desk-scale config (d=32, d_h=8, n_h=4, n_kv=2, 2+2 layers, V=256).
ModelConfig toy_config();
// Wider config the structured synthetic-task weights are built for.
ModelConfig synthetic_config();
// "toy" or "synthetic".
ModelConfig preset_config(const std::string& name);

// Token-id classes shared by the synthetic corpus and the structured weights.
struct VocabLayout {
    int pad = 0, unk = 1, eos = 2, sep = 3;
    int fill_begin = 4, fill_end = 16;
    int ans_begin = 16, ans_end = 48;
    int ent_begin = 48, ent_end = 192;
    int link_begin = 192, link_end = 256;

    bool is_answer(int t) const { return t >= ans_begin && t < ans_end; }
    bool is_link(int t) const { return t >= link_begin && t < link_end; }
};

// Proportional split of [4, V); V must be at least 64.
VocabLayout vocab_layout(int vocab_size);

}  // namespace intra
