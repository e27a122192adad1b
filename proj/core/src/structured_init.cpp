// Hand-wired weights for the synthetic two-hop task.
//
// The residual stream is split into orthonormal subspaces: token content (U),
// chunk link identity (Lk), link carried into the decoder (W), bag of chunk
// content (Bg), pointer features (S) and four flag directions. The circuit:
//   encoder 0     every token picks up its chunk's link and a bag of the chunk's content
//   decoder 0 SA  a relative pointer over question tokens (ρ steers where it lands)
//                 plus a uniform bag head
//   cross group 0 content + bag matching; writes the matched chunk's link (layer 0)
//   cross group 1 link matching (bridge) and, from SEP, answer-flagged tokens
//   output head   copies answer content, then emits EOS
// Everything else is the usual N(0, 0.02) noise.

#include <cmath>
#include <random>

#include "intra/error.hpp"
#include "intra/model.hpp"

namespace intra {

namespace {

struct Knobs {
    int nu = 36, nl = 24, nb = 24, ns = 6;
    int n_stable = 72, n_ptr_pairs = 3;
    double c0 = 2.0, cf = 3.0, ca = 3.0, cs = 3.0;
    double gap_e = 10.0, enc_w = 0.4, bag_e = 1.0;
    double beta_p = 6.0, bag_d = 1.0;
    double beta_x = 3.0, beta_g = 3.0, beta_b = 6.0, beta_b2 = 1.0, beta_a = 10.0, xo = 1.0, xa = 1.0;
    double beta_o = 4.0, beta_eos = 8.0, beta_sup = 8.0;
};

Mat randn(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c) {
    std::normal_distribution<double> nd(0.0, 1.0);
    Mat m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = nd(rng);
    return m;
}

Mat orthonormal_columns(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c) {
    Eigen::MatrixXd a = randn(rng, r, c);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(r, c);
    return q;
}

Eigen::RowVectorXd rmsn(const Eigen::RowVectorXd& v) {
    return v / std::sqrt(v.squaredNorm() / static_cast<double>(v.size()));
}

}  // namespace

ModelWeights init_structured(const ModelConfig& cfg, uint64_t seed) {
    const Knobs k;
    const int d = cfg.d, dh = cfg.d_h, nh = cfg.n_h, nrep = cfg.n_rep(), V = cfg.vocab_size;
    const int need_d = k.nu + 2 * k.nl + k.nb + k.ns + 4;
    require(d >= need_d, Errc::config, "structured init needs d >= " + std::to_string(need_d));
    require(dh >= k.n_stable + 2 * k.n_ptr_pairs, Errc::config,
            "structured init needs d_h >= " + std::to_string(k.n_stable + 2 * k.n_ptr_pairs));
    require(cfg.n_kv >= 2 && nrep >= 2, Errc::config, "structured init needs n_kv >= 2 and n_h / n_kv >= 2");
    const VocabLayout voc = vocab_layout(V);

    ModelWeights w = init_random(cfg, seed);
    std::mt19937_64 rng(seed ^ 0x9E3779B97F4A7C15ULL);

    const Mat qb = orthonormal_columns(rng, d, d);
    int off = 0;
    auto take = [&](int n) {
        Mat m = qb.middleCols(off, n);
        off += n;
        return m;
    };
    const Mat U = take(k.nu), Lk = take(k.nl), W = take(k.nl), Bg = take(k.nb), S = take(k.ns);
    const Eigen::RowVectorXd u0 = take(1).transpose(), fdir = take(1).transpose(), fans = take(1).transpose(),
                             fsep = take(1).transpose();

    Mat E = randn(rng, V, k.nu) * U.transpose();
    E.rowwise() += k.c0 * u0;
    {
        const int n_link = voc.link_end - voc.link_begin;
        Mat links = randn(rng, n_link, k.nl) * Lk.transpose();
        links.rowwise() += k.c0 * u0 + k.cf * fdir;
        E.middleRows(voc.link_begin, n_link) = links;
    }
    for (int t = voc.ans_begin; t < voc.ans_end; ++t) E.row(t) += k.ca * fans;
    E.row(voc.sep) += k.cs * fsep;
    E.row(voc.eos) += k.ca * fans;
    w.embed = E;

    std::vector<int> ptr(2 * k.n_ptr_pairs), stab(k.n_stable);
    for (int i = 0; i < 2 * k.n_ptr_pairs; ++i) ptr[i] = i;
    for (int i = 0; i < k.n_stable; ++i) stab[i] = dh - k.n_stable + i;
    const Mat Pb = orthonormal_columns(rng, k.nu, k.nb);
    const Mat bag = Bg * Pb.transpose();  // d × nu: content coords → bag subspace

    const double cu = rmsn(E.row(voc.ent_begin)).dot(u0);
    const double cfl = rmsn(E.row(voc.link_begin)).dot(fdir);

    // Encoder layer 0: link propagation (group 0) and content bag (group 1).
    {
        auto& a = w.enc[0].attn;
        for (int h = 0; h < nrep; ++h) a.wq.row(h * dh + stab[0]) += k.gap_e * std::sqrt(double(dh)) / (cu * cfl) * u0;
        a.wk.row(0 * dh + stab[0]) += fdir;
        a.wv.middleRows(0 * dh, k.nl) += Lk.transpose();
        a.wv.middleRows(1 * dh, k.nu) += U.transpose();
        for (int h = 0; h < nh; ++h) {
            if (h / nrep == 0)
                a.wo.block(0, h * dh, d, k.nl) += k.enc_w * Lk / nrep;
            else if (h / nrep == 1)
                a.wo.block(0, h * dh, d, k.nu) += k.bag_e * bag / nrep;
        }
    }

    // Decoder layer 0 self-attention: RoPE pointer and a uniform bag.
    {
        auto& a = w.dec[0].attn;
        const Mat pq = randn(rng, static_cast<Eigen::Index>(ptr.size()), k.ns) / std::sqrt(double(k.ns));
        const Mat ptr_rows = k.beta_p * (pq * S.transpose());
        for (int h = 0; h < nrep; ++h)
            for (size_t i = 0; i < ptr.size(); ++i) a.wq.row(h * dh + ptr[i]) += ptr_rows.row(static_cast<Eigen::Index>(i));
        for (size_t i = 0; i < ptr.size(); i += 2) a.wk.row(0 * dh + ptr[i]) += u0;
        for (int g = 0; g < cfg.n_kv; ++g) a.wv.middleRows(g * dh, k.nu) += U.transpose();
        for (int h = 0; h < nh; ++h) {
            if (h / nrep == 0)
                a.wo.block(0, h * dh, d, k.nu) += U / nrep;
            else if (h / nrep == 1)
                a.wo.block(0, h * dh, d, k.nu) += k.bag_d * bag / nrep;
        }
    }

    // Cross-attention, every decoder layer.
    for (int l = 0; l < cfg.L_dec; ++l) {
        auto& x = w.dec[l].cross;
        for (int i = 0; i < k.nu; ++i) x.wk[0].col(stab[i]) += U.col(i);
        for (int i = 0; i < k.nb; ++i) x.wk[0].col(stab[k.nu + i]) += Bg.col(i);
        for (int i = 0; i < k.nl; ++i) x.wk[1].col(stab[i]) += Lk.col(i);
        x.wk[1].col(stab[k.nl]) += fans.transpose();
        x.wv.middleRows(0 * dh, k.nl) += Lk.transpose();
        x.wv.middleRows(1 * dh, k.nu) += U.transpose();
        for (int h = 0; h < nh; ++h) {
            const int g = h / nrep;
            if (g == 0) {
                for (int i = 0; i < k.nu; ++i) x.wq.row(h * dh + stab[i]) += k.beta_x * U.col(i).transpose();
                for (int i = 0; i < k.nb; ++i) x.wq.row(h * dh + stab[k.nu + i]) += k.beta_g * Bg.col(i).transpose();
                if (l == 0) x.wo.block(0, h * dh, d, k.nl) += k.xo * W / nrep;
            } else if (g == 1) {
                if (h % nrep == 0) {
                    for (int i = 0; i < k.nl; ++i) x.wq.row(h * dh + stab[i]) += k.beta_b * W.col(i).transpose();
                } else {
                    for (int i = 0; i < k.nl; ++i) x.wq.row(h * dh + stab[i]) += k.beta_b2 * W.col(i).transpose();
                    x.wq.row(h * dh + stab[k.nl]) += k.beta_a * fsep;
                    if (l == cfg.L_dec - 1) x.wo.block(0, h * dh, d, k.nu) += k.xa * U;
                }
            }
        }
    }

    // Output head: copy answer content, stop once an answer-flagged token is read.
    const Mat UUt = U * U.transpose();
    for (int t = voc.ans_begin; t < voc.ans_end; ++t) {
        w.out_head.row(t) += k.beta_o * (E.row(t) * UUt) / std::sqrt(double(k.nu));
        w.out_head.row(t) -= k.beta_sup * fans;
    }
    w.out_head.row(voc.eos) += k.beta_eos * fans;

    visit_tensors(w, [](const std::string&, double* data, const std::vector<uint32_t>& shape) {
        size_t n = 1;
        for (auto s : shape) n *= s;
        for (size_t i = 0; i < n; ++i) data[i] = static_cast<double>(static_cast<float>(data[i]));
    });
    return w;
}

}  // namespace intra
