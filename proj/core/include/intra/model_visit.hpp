#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace intra {

namespace detail {
template <typename M, typename F>
void visit_mat(const std::string& name, M& m, F& f) {
    f(name, m.data(), std::vector<uint32_t>{static_cast<uint32_t>(m.rows()), static_cast<uint32_t>(m.cols())});
}
template <typename V, typename F>
void visit_vec(const std::string& name, V& v, F& f) {
    f(name, v.data(), std::vector<uint32_t>{static_cast<uint32_t>(v.size())});
}
template <typename A, typename F>
void visit_attn(const std::string& p, A& a, F& f) {
    visit_mat(p + "wq", a.wq, f);
    visit_mat(p + "wk", a.wk, f);
    visit_mat(p + "wv", a.wv, f);
    visit_mat(p + "wo", a.wo, f);
    visit_vec(p + "norm", a.norm, f);
}
template <typename N, typename F>
void visit_ffn(const std::string& p, N& n, F& f) {
    visit_mat(p + "w1", n.w1, f);
    visit_mat(p + "w2", n.w2, f);
    visit_vec(p + "norm", n.norm, f);
}
}  // namespace detail

template <typename W, typename F>
void visit_tensors(W& w, F&& f) {
    detail::visit_mat("embed", w.embed, f);
    for (size_t i = 0; i < w.enc.size(); ++i) {
        const std::string p = "enc." + std::to_string(i) + ".";
        detail::visit_attn(p + "attn.", w.enc[i].attn, f);
        detail::visit_ffn(p + "ffn.", w.enc[i].ffn, f);
    }
    for (size_t i = 0; i < w.dec.size(); ++i) {
        const std::string p = "dec." + std::to_string(i) + ".";
        auto& l = w.dec[i];
        detail::visit_attn(p + "attn.", l.attn, f);
        detail::visit_mat(p + "cross.wq", l.cross.wq, f);
        for (size_t g = 0; g < l.cross.wk.size(); ++g)
            detail::visit_mat(p + "cross.wk." + std::to_string(g), l.cross.wk[g], f);
        detail::visit_vec(p + "cross.gamma_k", l.cross.gamma_k, f);
        detail::visit_mat(p + "cross.wv", l.cross.wv, f);
        detail::visit_mat(p + "cross.wo", l.cross.wo, f);
        detail::visit_vec(p + "cross.norm", l.cross.norm, f);
        detail::visit_ffn(p + "ffn.", l.ffn, f);
    }
    detail::visit_vec("final_norm", w.final_norm, f);
    detail::visit_mat("out_head", w.out_head, f);
}

}  // namespace intra
