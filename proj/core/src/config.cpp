#include "intra/config.hpp"

#include <cmath>

#include "intra/error.hpp"

namespace intra {

double ModelConfig::attn_scale() const { return 1.0 / std::sqrt(static_cast<double>(d_h)); }

void ModelConfig::validate() const {
    require(d >= 1 && d_h >= 1 && n_h >= 1 && n_kv >= 1 && L_enc >= 1 && L_dec >= 1 && vocab_size >= 1,
            Errc::config, "model dimensions must be >= 1");
    require(n_h % n_kv == 0, Errc::config, "n_h must be a multiple of n_kv");
    require(d_h % 2 == 0, Errc::config, "d_h must be even for rotary embeddings");
    require(rmsnorm_eps > 0.0, Errc::config, "rmsnorm_eps must be positive");
    require(max_positions >= 1, Errc::config, "max_positions must be >= 1");
    require(rope_base > 1.0, Errc::config, "rope_base must exceed 1");
    require(ffn_mult >= 1, Errc::config, "ffn_mult must be >= 1");
}

ModelConfig toy_config() { return ModelConfig{}; }

ModelConfig synthetic_config() {
    ModelConfig c;
    c.d = 128;
    c.d_h = 128;
    return c;
}

ModelConfig preset_config(const std::string& name) {
    if (name == "toy") return toy_config();
    if (name == "synthetic") return synthetic_config();
    fail(Errc::config, "unknown model preset '" + name + "' (expected toy or synthetic)");
}

VocabLayout vocab_layout(int V) {
    require(V >= 64, Errc::config, "vocab_size must be >= 64 for the synthetic layout");
    VocabLayout v;
    const int n_fill = V * 12 / 256;
    const int n_ans = V / 8;
    const int n_link = V / 4;
    v.fill_begin = 4;
    v.fill_end = v.fill_begin + n_fill;
    v.ans_begin = v.fill_end;
    v.ans_end = v.ans_begin + n_ans;
    v.link_begin = V - n_link;
    v.link_end = V;
    v.ent_begin = v.ans_end;
    v.ent_end = v.link_begin;
    return v;
}

}  // namespace intra
