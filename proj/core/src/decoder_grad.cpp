#include "intra/decoder_grad.hpp"

#include <cmath>

#include "intra/error.hpp"

namespace intra {

namespace nn {

Mat norm_scaled_backward(const Mat& x, const Vec& scale, double eps, const Mat& gy) {
    const double d = static_cast<double>(x.cols());
    Mat gx(x.rows(), x.cols());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const double r2 = x.row(i).squaredNorm() / d + eps;
        const double r = std::sqrt(r2);
        if (r == 0.0) {
            gx.row(i) = gy.row(i).cwiseProduct(scale.transpose());
            continue;
        }
        Eigen::RowVectorXd ws = gy.row(i).cwiseProduct(scale.transpose());
        const double dot = ws.dot(x.row(i));
        gx.row(i) = ws / r - x.row(i) * (dot / (d * r2 * r));
    }
    return gx;
}

double gelu_grad(double x) {
    constexpr double k = 0.7978845608028654;
    const double inner = k * (x + 0.044715 * x * x * x);
    const double t = std::tanh(inner);
    return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * k * (1.0 + 3.0 * 0.044715 * x * x);
}

Mat softmax_backward(const Mat& p, const Mat& gp) {
    Mat gs = p.cwiseProduct(gp);
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
        const double s = gs.row(i).sum();
        gs.row(i) -= p.row(i) * s;
    }
    return gs;
}

}  // namespace nn

namespace {

void check_finite(const Mat& g, int layer, const char* where) {
    if (!g.allFinite())
        fail(Errc::non_finite, "non-finite gradient in decoder layer " + std::to_string(layer) + " (" + where + ")");
}

}  // namespace

Mat decoder_backward(const ModelWeights& w, const DecoderTape& tape, const std::vector<int>& positions,
                     const Mat& grad_exposed) {
    const ModelConfig& c = w.cfg;
    require(static_cast<int>(tape.layers.size()) == c.L_dec, Errc::internal, "decoder tape does not match config");
    const int dh = c.d_h, nrep = c.n_rep(), P = static_cast<int>(positions.size());
    require(grad_exposed.rows() == static_cast<Eigen::Index>(c.L_dec) * c.n_h * P && grad_exposed.cols() == c.d,
            Errc::internal, "exposed-query gradient has the wrong shape");
    const Mat& ctx = tape.context;
    const bool has_ctx = ctx.rows() > 0;
    const double scale = c.attn_scale();
    const Eigen::Index T = tape.layers[0].attn.x.rows();

    Mat g = Mat::Zero(T, c.d);
    bool live = false;  // g is identically zero above the top exposed layer
    for (int l = c.L_dec - 1; l >= 0; --l) {
        const auto& layer = w.dec[l];
        const auto& lt = tape.layers[l];

        if (live) {
            Mat gu = g * layer.ffn.w2;
            for (Eigen::Index i = 0; i < gu.size(); ++i) gu.data()[i] *= nn::gelu_grad(lt.ffn.u.data()[i]);
            g += nn::norm_scaled_backward(lt.ffn.x, layer.ffn.norm, c.rmsnorm_eps, gu * layer.ffn.w1);
            check_finite(g, l, "feed-forward");
        }

        Mat gq = Mat::Zero(T, c.n_h * dh);
        for (int h = 0; h < c.n_h; ++h) {
            const int grp = h / nrep;
            Mat gqt = Mat::Zero(T, c.d);
            if (has_ctx && live) {
                Mat go = g * layer.cross.wo.middleCols(h * dh, dh);
                Mat gp = go * lt.cross.vctx.middleCols(grp * dh, dh).transpose();
                gqt += nn::softmax_backward(lt.cross.p[h], gp) * ctx * scale;
            }
            for (int p = 0; p < P; ++p)
                gqt.row(positions[p]) += grad_exposed.row((static_cast<Eigen::Index>(l) * c.n_h + h) * P + p);
            gq.middleCols(h * dh, dh) = (gqt * layer.cross.wk[grp]) * layer.cross.gamma_k.asDiagonal();
        }
        nn::rope_rows(gq, dh, c.rope_base, true);
        g += nn::norm_scaled_backward(lt.cross.x, layer.cross.norm, c.rmsnorm_eps, gq * layer.cross.wq);
        live = true;
        check_finite(g, l, "cross-attention");

        const auto& at = lt.attn;
        Mat go = g * layer.attn.wo;
        Mat gqs = Mat::Zero(T, c.n_h * dh);
        Mat gk = Mat::Zero(T, c.n_kv * dh);
        Mat gv = Mat::Zero(T, c.n_kv * dh);
        for (int h = 0; h < c.n_h; ++h) {
            const int grp = h / nrep;
            auto goh = go.middleCols(h * dh, dh);
            Mat gp = goh * at.v.middleCols(grp * dh, dh).transpose();
            Mat gs = nn::softmax_backward(at.p[h], gp) * scale;
            gqs.middleCols(h * dh, dh) = gs * at.k.middleCols(grp * dh, dh);
            gk.middleCols(grp * dh, dh) += gs.transpose() * at.q.middleCols(h * dh, dh);
            gv.middleCols(grp * dh, dh) += at.p[h].transpose() * goh;
        }
        nn::rope_rows(gqs, dh, c.rope_base, true);
        nn::rope_rows(gk, dh, c.rope_base, true);
        Mat ga = gqs * layer.attn.wq + gk * layer.attn.wk + gv * layer.attn.wv;
        g += nn::norm_scaled_backward(at.x, layer.attn.norm, c.rmsnorm_eps, ga);
        check_finite(g, l, "self-attention");
    }
    return g;
}

}  // namespace intra
