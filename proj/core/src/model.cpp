#include "intra/model.hpp"

#include <cmath>
#include <random>

#include "intra/binio.hpp"
#include "intra/decoder_grad.hpp"
#include "intra/error.hpp"
#include "intra/rqwk.hpp"

namespace intra {

namespace {

constexpr char kWeightsMagic[8] = {'I', 'N', 'T', 'R', 'A', 'W', 'T', '1'};
constexpr uint32_t kWeightsVersion = 1;
constexpr int kEos = 2;

bool is_unit_tensor(const std::string& name) {
    auto ends = [&](const char* s) {
        const std::string suf(s);
        return name.size() >= suf.size() && name.compare(name.size() - suf.size(), suf.size(), suf) == 0;
    };
    return ends("norm") || ends("gamma_k");
}

SelfAttnWeights alloc_attn(const ModelConfig& c) {
    SelfAttnWeights a;
    a.wq = Mat::Zero(c.n_h * c.d_h, c.d);
    a.wk = Mat::Zero(c.n_kv * c.d_h, c.d);
    a.wv = Mat::Zero(c.n_kv * c.d_h, c.d);
    a.wo = Mat::Zero(c.d, c.n_h * c.d_h);
    a.norm = Vec::Ones(c.d);
    return a;
}

FfnWeights alloc_ffn(const ModelConfig& c) {
    return {Mat::Zero(c.ffn_dim(), c.d), Mat::Zero(c.d, c.ffn_dim()), Vec::Ones(c.d)};
}

ModelWeights allocate(const ModelConfig& c) {
    c.validate();
    ModelWeights w;
    w.cfg = c;
    w.embed = Mat::Zero(c.vocab_size, c.d);
    for (int i = 0; i < c.L_enc; ++i) w.enc.push_back({alloc_attn(c), alloc_ffn(c)});
    for (int i = 0; i < c.L_dec; ++i) {
        CrossAttnWeights x;
        x.wq = Mat::Zero(c.n_h * c.d_h, c.d);
        x.wk.assign(c.n_kv, Mat::Zero(c.d, c.d_h));
        x.gamma_k = Vec::Ones(c.d_h);
        x.wv = Mat::Zero(c.n_kv * c.d_h, c.d);
        x.wo = Mat::Zero(c.d, c.n_h * c.d_h);
        x.norm = Vec::Ones(c.d);
        w.dec.push_back({alloc_attn(c), std::move(x), alloc_ffn(c)});
    }
    w.final_norm = Vec::Ones(c.d);
    w.out_head = Mat::Zero(c.vocab_size, c.d);
    return w;
}

size_t shape_numel(const std::vector<uint32_t>& shape) {
    size_t n = 1;
    for (auto s : shape) n *= s;
    return n;
}

std::vector<int> iota_positions(Eigen::Index n) {
    std::vector<int> p(static_cast<size_t>(n));
    for (size_t i = 0; i < p.size(); ++i) p[i] = static_cast<int>(i);
    return p;
}

void check_input(const ModelConfig& c, const Mat& x, const Mat& ctx) {
    require(x.rows() >= 1, Errc::data, "decoder input is empty");
    require(x.cols() == c.d, Errc::data, "decoder input width does not match d");
    require(x.rows() <= c.max_positions, Errc::data, "decoder input exceeds max_positions");
    require(ctx.rows() == 0 || ctx.cols() == c.d, Errc::data, "context width does not match d");
}

// Causal or full GQA self-attention with RoPE on queries and keys. Returns the
// block output (to be added to the residual stream).
Mat self_attention(const SelfAttnWeights& a, const ModelConfig& c, const Mat& x, bool causal, SelfAttnTape* tape) {
    const int dh = c.d_h, nrep = c.n_rep();
    Mat an = nn::norm_scaled(x, a.norm, c.rmsnorm_eps);
    Mat q = an * a.wq.transpose();
    Mat k = an * a.wk.transpose();
    Mat v = an * a.wv.transpose();
    nn::rope_rows(q, dh, c.rope_base);
    nn::rope_rows(k, dh, c.rope_base);
    const double scale = c.attn_scale();
    Mat o(x.rows(), c.n_h * dh);
    if (tape) tape->p.resize(c.n_h);
    // Without a tape, query rows go in blocks so the score block stays in cache.
    const Eigen::Index n = x.rows(), block = tape ? n : std::min<Eigen::Index>(n, 64);
    Mat s;
    for (int h = 0; h < c.n_h; ++h) {
        const int g = h / nrep;
        for (Eigen::Index r0 = 0; r0 < n; r0 += block) {
            const Eigen::Index nr = std::min(block, n - r0);
            s.noalias() = q.block(r0, h * dh, nr, dh) * k.middleCols(g * dh, dh).transpose();
            s *= scale;
            nn::softmax_rows(s, causal, r0);
            o.block(r0, h * dh, nr, dh).noalias() = s * v.middleCols(g * dh, dh);
        }
        if (tape) tape->p[h] = std::move(s);
    }
    Mat out = o * a.wo.transpose();
    if (tape) {
        tape->x = x;
        tape->a = std::move(an);
        tape->q = std::move(q);
        tape->k = std::move(k);
        tape->v = std::move(v);
    }
    return out;
}

Mat ffn_block(const FfnWeights& f, const ModelConfig& c, const Mat& x, FfnTape* tape) {
    Mat fn = nn::norm_scaled(x, f.norm, c.rmsnorm_eps);
    Mat u = fn * f.w1.transpose();
    Mat act = u.unaryExpr([](double v) { return nn::gelu(v); });
    Mat out = act * f.w2.transpose();
    if (tape) {
        tape->x = x;
        tape->f = std::move(fn);
        tape->u = std::move(u);
    }
    return out;
}

// Cross-attention through lifted queries. Returns the block output (zero rows
// when the context is empty) and, if requested, the lifted queries per head.
Mat cross_block(const CrossAttnWeights& xw, const ModelConfig& c, const Mat& x, const Mat& ctx,
                const std::vector<int>& positions, std::vector<Mat>* lifted, CrossAttnTape* tape) {
    const int dh = c.d_h, nrep = c.n_rep();
    Mat cn = nn::norm_scaled(x, xw.norm, c.rmsnorm_eps);
    Mat q = cn * xw.wq.transpose();
    for (Eigen::Index t = 0; t < q.rows(); ++t) {
        auto ang = rope_angles(positions[static_cast<size_t>(t)], dh, c.rope_base);
        std::vector<double> cs(ang.size()), sn(ang.size());
        for (size_t j = 0; j < ang.size(); ++j) {
            cs[j] = std::cos(ang[j]);
            sn[j] = std::sin(ang[j]);
        }
        for (int h = 0; h < c.n_h; ++h) rope_rotate(q.row(t).data() + h * dh, cs.data(), sn.data(), dh);
    }
    const bool has_ctx = ctx.rows() > 0;
    Mat out = Mat::Zero(x.rows(), c.d);
    Mat vctx;
    if (has_ctx) vctx = ctx * xw.wv.transpose();
    if (lifted) lifted->resize(c.n_h);
    if (tape) tape->p.assign(has_ctx ? c.n_h : 0, Mat());
    const double scale = c.attn_scale();
    for (int h = 0; h < c.n_h; ++h) {
        const int g = h / nrep;
        // q̃ = W_K^(g) (q ⊙ γ_K), one row per position
        Mat qt = (q.middleCols(h * dh, dh) * xw.gamma_k.asDiagonal()) * xw.wk[g].transpose();
        if (has_ctx) {
            Mat s = qt * ctx.transpose() * scale;
            require(s.allFinite(), Errc::non_finite, "NaN in cross-attention logits");
            nn::softmax_rows(s, false);
            out.noalias() += (s * vctx.middleCols(g * dh, dh)) * xw.wo.middleCols(h * dh, dh).transpose();
            if (tape) tape->p[h] = std::move(s);
        }
        if (lifted) (*lifted)[h] = std::move(qt);
    }
    if (tape) {
        tape->x = x;
        tape->c = std::move(cn);
        tape->q = std::move(q);
        tape->vctx = std::move(vctx);
    }
    return out;
}

uint64_t hash_mat(const Mat& m, uint64_t h) { return fnv1a(m.data(), sizeof(double) * m.size(), h); }

}  // namespace

// ---------------------------------------------------------------- primitives

namespace nn {

Mat norm_scaled(const Mat& x, const Vec& scale, double eps) {
    Mat y = rms_norm_rows(x, eps);
    y.array().rowwise() *= scale.transpose().array();
    return y;
}

double gelu(double x) {
    constexpr double k = 0.7978845608028654;  // sqrt(2/pi)
    return 0.5 * x * (1.0 + std::tanh(k * (x + 0.044715 * x * x * x)));
}

void rope_rows(Mat& m, int d_h, double base, bool inverse) {
    const int heads = static_cast<int>(m.cols()) / d_h;
    std::vector<double> inv(d_h / 2), cs(d_h / 2), sn(d_h / 2);
    for (int j = 0; j < d_h / 2; ++j) inv[j] = std::pow(base, -2.0 * j / d_h);
    for (Eigen::Index t = 0; t < m.rows(); ++t) {
        for (int j = 0; j < d_h / 2; ++j) {
            cs[j] = std::cos(static_cast<double>(t) * inv[j]);
            sn[j] = std::sin(static_cast<double>(t) * inv[j]);
        }
        for (int h = 0; h < heads; ++h) rope_rotate(m.row(t).data() + h * d_h, cs.data(), sn.data(), d_h, inverse);
    }
}

void softmax_rows(Mat& s, bool causal, Eigen::Index row0) {
    for (Eigen::Index i = 0; i < s.rows(); ++i) {
        const Eigen::Index n = causal ? std::min<Eigen::Index>(row0 + i + 1, s.cols()) : s.cols();
        auto row = s.row(i);
        const double mx = row.head(n).maxCoeff();
        double sum = 0.0;
        for (Eigen::Index j = 0; j < n; ++j) {
            row[j] = std::exp(row[j] - mx);
            sum += row[j];
        }
        row.head(n) /= sum;
        for (Eigen::Index j = n; j < s.cols(); ++j) row[j] = 0.0;
    }
}

}  // namespace nn

Vec rms_norm(const Vec& x, double eps) {
    require(x.allFinite(), Errc::non_finite, "non-finite activation");
    const double ms = x.size() ? x.squaredNorm() / static_cast<double>(x.size()) : 0.0;
    const double r = std::sqrt(ms + eps);
    if (r == 0.0) return x;  // zero vector with eps = 0
    return x / r;
}

Mat rms_norm_rows(const Mat& x, double eps) {
    require(x.allFinite(), Errc::non_finite, "non-finite activation");
    Mat y(x.rows(), x.cols());
    const double inv_d = 1.0 / static_cast<double>(x.cols());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const double r = std::sqrt(x.row(i).squaredNorm() * inv_d + eps);
        if (r == 0.0)
            y.row(i) = x.row(i);
        else
            y.row(i) = x.row(i) / r;
    }
    return y;
}

void rope_rotate(double* row, const double* cos_t, const double* sin_t, int d_h, bool inverse) {
    for (int j = 0; j < d_h / 2; ++j) {
        const double a = row[2 * j], b = row[2 * j + 1];
        const double s = inverse ? -sin_t[j] : sin_t[j];
        row[2 * j] = a * cos_t[j] - b * s;
        row[2 * j + 1] = a * s + b * cos_t[j];
    }
}

std::vector<double> rope_angles(int position, int d_h, double base) {
    require(d_h % 2 == 0, Errc::config, "d_h must be even for rotary embeddings");
    std::vector<double> a(d_h / 2);
    for (int j = 0; j < d_h / 2; ++j) a[j] = static_cast<double>(position) * std::pow(base, -2.0 * j / d_h);
    return a;
}

Mat rope_apply(const Mat& q, int position, const ModelConfig& cfg) {
    require(cfg.d_h % 2 == 0, Errc::config, "d_h must be even for rotary embeddings");
    require(q.cols() == cfg.d_h, Errc::config, "rope_apply: head width does not match d_h");
    require(position >= 0 && position < cfg.max_positions, Errc::config, "rope_apply: position out of range");
    auto ang = rope_angles(position, cfg.d_h, cfg.rope_base);
    std::vector<double> cs(ang.size()), sn(ang.size());
    for (size_t j = 0; j < ang.size(); ++j) {
        cs[j] = std::cos(ang[j]);
        sn[j] = std::sin(ang[j]);
    }
    Mat out = q;
    for (Eigen::Index h = 0; h < out.rows(); ++h) rope_rotate(out.row(h).data(), cs.data(), sn.data(), cfg.d_h);
    return out;
}

// ---------------------------------------------------------------- weights

ModelWeights init_random(const ModelConfig& cfg, uint64_t seed) {
    ModelWeights w = allocate(cfg);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0.0, 0.02);
    visit_tensors(w, [&](const std::string& name, double* data, const std::vector<uint32_t>& shape) {
        const size_t n = shape_numel(shape);
        // Unit-variance embeddings keep hidden states well above the norm eps.
        const double gain = name == "embed" ? 50.0 : 1.0;
        for (size_t i = 0; i < n; ++i)
            data[i] = is_unit_tensor(name) ? 1.0 : static_cast<double>(static_cast<float>(gain * nd(rng)));
    });
    return w;
}

ModelWeights init_weights(const ModelConfig& cfg, const std::string& kind, uint64_t seed) {
    if (kind == "random") return init_random(cfg, seed);
    if (kind == "structured") return init_structured(cfg, seed);
    fail(Errc::config, "unknown weight init '" + kind + "' (expected random or structured)");
}

void validate_weights(const ModelWeights& w) {
    const ModelConfig& c = w.cfg;
    c.validate();
    const ModelWeights ref = allocate(c);
    std::vector<std::vector<uint32_t>> want;
    visit_tensors(ref, [&](const std::string&, const double*, const std::vector<uint32_t>& s) { want.push_back(s); });
    size_t i = 0;
    visit_tensors(w, [&](const std::string& name, const double* data, const std::vector<uint32_t>& s) {
        require(i < want.size() && s == want[i], Errc::data, "weight tensor " + name + " has the wrong shape");
        ++i;
        for (size_t j = 0; j < shape_numel(s); ++j)
            require(std::isfinite(data[j]), Errc::data, "weight tensor " + name + " is not finite");
    });
    require(i == want.size(), Errc::data, "weight tensor count does not match config");
}

uint64_t weights_checksum(const ModelWeights& w) {
    uint64_t h = 1469598103934665603ULL;
    visit_tensors(w, [&](const std::string& name, const double* data, const std::vector<uint32_t>& shape) {
        h = fnv1a(name.data(), name.size(), h);
        h = fnv1a(data, sizeof(double) * shape_numel(shape), h);
    });
    return h;
}

void save_weights(const ModelWeights& w, const std::string& path) {
    ByteWriter out;
    out.put_bytes(kWeightsMagic, 8);
    out.put<uint32_t>(kWeightsVersion);
    const ModelConfig& c = w.cfg;
    for (int v : {c.d, c.d_h, c.n_h, c.n_kv, c.L_enc, c.L_dec, c.vocab_size, c.max_positions, c.ffn_mult})
        out.put<int32_t>(v);
    out.put<double>(c.rmsnorm_eps);
    out.put<double>(c.rope_base);
    uint32_t count = 0;
    visit_tensors(w, [&](const std::string&, const double*, const std::vector<uint32_t>&) { ++count; });
    out.put<uint32_t>(count);
    visit_tensors(w, [&](const std::string& name, const double* data, const std::vector<uint32_t>& shape) {
        out.put_str(name);
        out.put<uint32_t>(static_cast<uint32_t>(shape.size()));
        for (auto s : shape) out.put<uint32_t>(s);
        for (size_t i = 0; i < shape_numel(shape); ++i) out.put<float>(static_cast<float>(data[i]));
    });
    write_file_atomic(path, out.bytes().data(), out.size());
}

ModelWeights load_weights(const std::string& path) {
    ByteReader in(read_file(path));
    char magic[8];
    in.get_bytes(magic, 8);
    if (std::memcmp(magic, kWeightsMagic, 8) != 0) fail(Errc::bad_magic, "bad magic in weights file " + path);
    const auto version = in.get<uint32_t>();
    if (version != kWeightsVersion) fail(Errc::bad_version, "unsupported weights version " + std::to_string(version));
    ModelConfig c;
    for (int* f : {&c.d, &c.d_h, &c.n_h, &c.n_kv, &c.L_enc, &c.L_dec, &c.vocab_size, &c.max_positions, &c.ffn_mult})
        *f = in.get<int32_t>();
    c.rmsnorm_eps = in.get<double>();
    c.rope_base = in.get<double>();
    try {
        c.validate();
    } catch (const Error& e) {
        fail(Errc::data, std::string("weights header: ") + e.what());
    }
    ModelWeights w = allocate(c);
    const auto count = in.get<uint32_t>();
    uint32_t seen = 0;
    visit_tensors(w, [&](const std::string& name, double* data, const std::vector<uint32_t>& shape) {
        ++seen;
        require(seen <= count, Errc::data, "weights file is missing tensor " + name);
        const std::string got = in.get_str();
        require(got == name, Errc::data, "expected tensor " + name + ", found " + got);
        const auto nd = in.get<uint32_t>();
        std::vector<uint32_t> s(nd);
        for (auto& v : s) v = in.get<uint32_t>();
        require(s == shape, Errc::data, "tensor " + name + " has the wrong shape");
        for (size_t i = 0; i < shape_numel(shape); ++i) data[i] = static_cast<double>(in.get<float>());
    });
    require(seen == count, Errc::data, "weights file has extra tensors");
    validate_weights(w);
    return w;
}

// ---------------------------------------------------------------- forward

Mat embed_tokens(const ModelWeights& w, const std::vector<int>& tokens) {
    Mat x(static_cast<Eigen::Index>(tokens.size()), w.cfg.d);
    for (size_t i = 0; i < tokens.size(); ++i) {
        const int t = tokens[i];
        require(t >= 0 && t < w.cfg.vocab_size, Errc::data, "token id " + std::to_string(t) + " out of range");
        x.row(static_cast<Eigen::Index>(i)) = w.embed.row(t);
    }
    return x;
}

Mat encode(const ModelWeights& w, const std::vector<int>& tokens) {
    require(!tokens.empty(), Errc::data, "encode: empty input");
    require(static_cast<int>(tokens.size()) <= w.cfg.max_positions, Errc::data, "encode: input exceeds max_positions");
    Mat x = embed_tokens(w, tokens);
    for (const auto& layer : w.enc) {
        x += self_attention(layer.attn, w.cfg, x, false, nullptr);
        x += ffn_block(layer.ffn, w.cfg, x, nullptr);
    }
    return x;
}

Mat cross_attention_rqwk(const ModelWeights& w, int layer, const Mat& hidden, const Mat& context,
                         const std::vector<int>& positions) {
    require(layer >= 0 && layer < w.cfg.L_dec, Errc::config, "cross_attention_rqwk: layer out of range");
    require(static_cast<Eigen::Index>(positions.size()) == hidden.rows(), Errc::config,
            "cross_attention_rqwk: one position per hidden row required");
    check_input(w.cfg, hidden, context);
    if (context.rows() == 0) return hidden;
    return hidden + cross_block(w.dec[layer].cross, w.cfg, hidden, context, positions, nullptr, nullptr);
}

Mat cross_attention_standard(const ModelWeights& w, int layer, const Mat& hidden, const Mat& context,
                             const std::vector<int>& positions) {
    require(layer >= 0 && layer < w.cfg.L_dec, Errc::config, "cross_attention_standard: layer out of range");
    require(static_cast<Eigen::Index>(positions.size()) == hidden.rows(), Errc::config,
            "cross_attention_standard: one position per hidden row required");
    check_input(w.cfg, hidden, context);
    if (context.rows() == 0) return hidden;
    const ModelConfig& c = w.cfg;
    const auto& xw = w.dec[layer].cross;
    const int dh = c.d_h, nrep = c.n_rep();
    Mat cn = nn::norm_scaled(hidden, xw.norm, c.rmsnorm_eps);
    Mat q = cn * xw.wq.transpose();
    for (Eigen::Index t = 0; t < q.rows(); ++t) {
        Mat heads = Eigen::Map<Mat>(q.row(t).data(), c.n_h, dh);
        q.row(t) = Eigen::Map<const Eigen::RowVectorXd>(rope_apply(heads, positions[t], c).data(), c.n_h * dh);
    }
    auto keys = standard_keys<double>(context, xw.gamma_k, xw.wk);
    Mat vctx = context * xw.wv.transpose();
    Mat out = hidden;
    for (int h = 0; h < c.n_h; ++h) {
        const int g = h / nrep;
        Mat s = q.middleCols(h * dh, dh) * keys[g].transpose() * c.attn_scale();
        nn::softmax_rows(s, false);
        out.noalias() += (s * vctx.middleCols(g * dh, dh)) * xw.wo.middleCols(h * dh, dh).transpose();
    }
    return out;
}

DecoderResult decoder_forward(const ModelWeights& w, const Mat& input, const Mat& context, const DecoderOptions& opt,
                              DecoderTape* tape) {
    const ModelConfig& c = w.cfg;
    check_input(c, input, context);
    for (int p : opt.expose)
        require(p >= 0 && p < input.rows(), Errc::config, "exposed position " + std::to_string(p) + " out of range");
    const Mat empty_ctx(0, c.d);
    const Mat& ctx = opt.skip_cross ? empty_ctx : context;
    const auto positions = iota_positions(input.rows());

    DecoderResult res;
    const int P = static_cast<int>(opt.expose.size());
    if (P > 0) {
        res.exposed = {c.L_dec, c.n_h, P, c.d, Mat(static_cast<Eigen::Index>(c.L_dec) * c.n_h * P, c.d)};
    }
    if (tape) {
        tape->layers.assign(c.L_dec, DecoderLayerTape{});
        tape->context = ctx;
    }
    uint64_t hh = 1469598103934665603ULL;
    Mat x = input;
    std::vector<Mat> lifted;
    for (int l = 0; l < c.L_dec; ++l) {
        const auto& layer = w.dec[l];
        DecoderLayerTape* lt = tape ? &tape->layers[l] : nullptr;
        x += self_attention(layer.attn, c, x, true, lt ? &lt->attn : nullptr);
        Mat z = cross_block(layer.cross, c, x, ctx, positions, P > 0 ? &lifted : nullptr, lt ? &lt->cross : nullptr);
        for (int h = 0; h < c.n_h && P > 0; ++h)
            for (int p = 0; p < P; ++p) res.exposed.rows.row(res.exposed.index(l, h, p)) = lifted[h].row(opt.expose[p]);
        if (ctx.rows() > 0) x += z;
        x += ffn_block(layer.ffn, c, x, lt ? &lt->ffn : nullptr);
        if (opt.hidden_checksum) hh = hash_mat(x, hh);
    }
    res.hidden_checksum = opt.hidden_checksum ? hh : 0;
    if (opt.logits) {
        if (opt.last_logits_only) {
            Mat last = x.bottomRows(1);
            res.logits = nn::norm_scaled(last, w.final_norm, c.rmsnorm_eps) * w.out_head.transpose();
        } else {
            res.logits = nn::norm_scaled(x, w.final_norm, c.rmsnorm_eps) * w.out_head.transpose();
        }
    }
    return res;
}

std::vector<int> greedy_decode(const ModelWeights& w, const std::vector<int>& question, const Mat& context,
                               int max_len) {
    require(max_len >= 1, Errc::config, "greedy_decode: max_len must be >= 1");
    require(!question.empty(), Errc::data, "greedy_decode: empty question");
    std::vector<int> seq = question, out;
    DecoderOptions opt;
    opt.last_logits_only = true;
    while (static_cast<int>(out.size()) < max_len) {
        if (static_cast<int>(seq.size()) >= w.cfg.max_positions) break;
        auto res = decoder_forward(w, embed_tokens(w, seq), context, opt);
        const auto row = res.logits.row(0);
        int best = 0;
        for (int t = 1; t < row.size(); ++t)
            if (row[t] > row[best]) best = t;
        if (best == kEos) break;
        out.push_back(best);
        seq.push_back(best);
    }
    return out;
}

}  // namespace intra
