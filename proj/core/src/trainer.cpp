#include "intra/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "intra/error.hpp"

namespace intra {

namespace {

void check_oracle(size_t M, const std::vector<int>& oracle) {
    require(!oracle.empty(), Errc::data, "empty oracle set");
    for (int o : oracle) require(o >= 0 && static_cast<size_t>(o) < M, Errc::data, "oracle index out of range");
}

double logsumexp(const std::vector<double>& s) {
    const double mx = *std::max_element(s.begin(), s.end());
    double sum = 0.0;
    for (double v : s) sum += std::exp(v - mx);
    return mx + std::log(sum);
}

}  // namespace

void TrainConfig::validate() const {
    require(steps >= 1, Errc::config, "train steps must be >= 1");
    require(lr >= 0.0 && std::isfinite(lr), Errc::config, "learning rate must be finite and >= 0");
    require(warmup >= 0, Errc::config, "warmup must be >= 0");
    require(batch >= 1, Errc::config, "batch size must be >= 1");
    require(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1 && eps > 0, Errc::config, "bad Adam hyperparameters");
    require(weight_decay >= 0, Errc::config, "weight_decay must be >= 0");
    require(n0 >= 0, Errc::config, "n0 must be >= 0");
}

double TrainConfig::lr_at(int step) const {
    if (warmup <= 0) return lr;
    return lr * std::min(1.0, static_cast<double>(step + 1) / warmup);
}

double retrieval_loss(const std::vector<double>& scores, const std::vector<int>& oracle) {
    check_oracle(scores.size(), oracle);
    const double lse = logsumexp(scores);
    double acc = 0.0;
    for (int o : oracle) acc += lse - scores[static_cast<size_t>(o)];
    return acc / static_cast<double>(oracle.size());
}

double retrieval_loss(const ScoreVector& scores, const std::vector<int64_t>& oracle_ids, const ChunkPool& pool) {
    std::vector<int> idx;
    for (auto id : oracle_ids) idx.push_back(static_cast<int>(pool.index_of(id)));
    return retrieval_loss(scores.s, idx);
}

std::vector<double> retrieval_loss_grad(const std::vector<double>& scores, const std::vector<int>& oracle) {
    check_oracle(scores.size(), oracle);
    const double lse = logsumexp(scores);
    std::vector<double> g(scores.size());
    for (size_t i = 0; i < scores.size(); ++i) g[i] = std::exp(scores[i] - lse);
    const double t = 1.0 / static_cast<double>(oracle.size());
    for (int o : oracle) g[static_cast<size_t>(o)] -= t;
    return g;
}

GradReport grad_retrieval_params(const TrainExample& ex, const RetrievalParams& params, const ChunkPool& pool,
                                 const PooledIndex& pooled, const ModelWeights& model) {
    const ModelConfig& c = model.cfg;
    auto pass = intra_pass(ex.question, params, ex.s0, pool, pooled, model, true);
    const auto& s = pass.scores.s;
    GradReport rep;
    rep.loss = retrieval_loss(s, ex.oracle);
    const auto gs = retrieval_loss_grad(s, ex.oracle);
    const size_t M = s.size();
    const int R = params.R();
    const Eigen::Index G = pass.table.ms.rows();

    rep.d_alpha = Mat::Zero(c.L_dec, c.n_h);
    for (Eigen::Index g = 0; g < G; ++g) {
        double acc = 0.0;
        for (size_t i = 0; i < M; ++i) acc += gs[i] * pass.table.ms(g, static_cast<Eigen::Index>(i));
        rep.d_alpha.data()[g] = acc;
    }

    const double scale = c.attn_scale();
    Mat gq = Mat::Zero(pass.queries.rows.rows(), c.d);
    for (Eigen::Index r = 0; r < gq.rows(); ++r) {
        const double a = params.alpha.data()[r / R] * scale;
        if (a == 0.0) continue;
        const int32_t* arg = pass.table.arg.data() + static_cast<size_t>(r) * M;
        for (size_t i = 0; i < M; ++i) gq.row(r) += (gs[i] * a) * pooled.rows.row(arg[i]);
    }
    const Mat gx = decoder_backward(model, *pass.tape, pass.positions, gq);
    rep.d_rho = gx.bottomRows(R);
    require(rep.d_alpha.allFinite(), Errc::non_finite, "non-finite gradient for alpha");
    return rep;
}

double loss_fixed_argmax(const TrainExample& ex, const RetrievalParams& params, const ChunkPool& pool,
                         const PooledIndex& pooled, const ModelWeights& model, const std::vector<int32_t>& arg) {
    const ModelConfig& c = model.cfg;
    const Mat x = retrieval_input(model, ex.question, params);
    const int Lq = static_cast<int>(ex.question.size()), R = params.R();
    DecoderOptions opt;
    opt.logits = false;
    for (int r = 0; r < R; ++r) opt.expose.push_back(Lq + r);
    const auto res = decoder_forward(model, x, gather_context(pool, ex.s0), opt);
    const Mat& q = res.exposed.rows;
    const size_t M = pooled.M();
    require(arg.size() == static_cast<size_t>(q.rows()) * M, Errc::internal, "argmax table does not match queries");
    std::vector<double> s(M, 0.0);
    const double scale = c.attn_scale();
    for (Eigen::Index r = 0; r < q.rows(); ++r) {
        const double a = params.alpha.data()[r / R] * scale;
        for (size_t i = 0; i < M; ++i) s[i] += a * q.row(r).dot(pooled.rows.row(arg[static_cast<size_t>(r) * M + i]));
    }
    return retrieval_loss(s, ex.oracle);
}

double fd_max_rel_error(const std::function<double(const Mat&)>& loss, const Mat& theta, const Mat& grad,
                        const std::vector<Eigen::Index>& coords, double eps) {
    require(eps > 0, Errc::config, "finite-difference step must be > 0");
    double worst = 0.0;
    Mat t = theta;
    for (auto k : coords) {
        const double orig = t.data()[k];
        t.data()[k] = orig + eps;
        const double lp = loss(t);
        t.data()[k] = orig - eps;
        const double lm = loss(t);
        t.data()[k] = orig;
        const double fd = (lp - lm) / (2.0 * eps);
        const double an = grad.data()[k];
        const double rel = std::abs(fd - an) / (std::max(std::abs(fd), std::abs(an)) + 1e-12);
        worst = std::max(worst, rel);
    }
    return worst;
}

FiniteDiffReport finite_diff_check(const TrainExample& ex, const RetrievalParams& params, const ChunkPool& pool,
                                   const PooledIndex& pooled, const ModelWeights& model, double eps_alpha,
                                   double eps_rho, int n_rho, uint64_t seed) {
    const GradReport g = grad_retrieval_params(ex, params, pool, pooled, model);
    const auto arg = intra_pass(ex.question, params, ex.s0, pool, pooled, model, true).table.arg;
    FiniteDiffReport rep;

    std::vector<Eigen::Index> a_coords(static_cast<size_t>(params.alpha.size()));
    std::iota(a_coords.begin(), a_coords.end(), 0);
    rep.alpha_coords = static_cast<int>(a_coords.size());
    rep.alpha_max_rel = fd_max_rel_error(
        [&](const Mat& a) {
            RetrievalParams p{params.rho, a};
            return loss_fixed_argmax(ex, p, pool, pooled, model, arg);
        },
        params.alpha, g.d_alpha, a_coords, eps_alpha);

    std::mt19937_64 rng(seed);
    std::vector<Eigen::Index> all(static_cast<size_t>(params.rho.size()));
    std::iota(all.begin(), all.end(), 0);
    std::shuffle(all.begin(), all.end(), rng);
    all.resize(std::min<size_t>(all.size(), static_cast<size_t>(std::max(0, n_rho))));
    rep.rho_coords = static_cast<int>(all.size());
    rep.rho_max_rel = fd_max_rel_error(
        [&](const Mat& r) {
            RetrievalParams p{r, params.alpha};
            return loss_fixed_argmax(ex, p, pool, pooled, model, arg);
        },
        params.rho, g.d_rho, all, eps_rho);
    return rep;
}

std::vector<TrainExample> prepare_examples(const std::vector<std::vector<int>>& questions,
                                           const std::vector<std::vector<int64_t>>& oracle_ids,
                                           const ChunkPool& pool, const PooledIndex& pooled,
                                           const ModelWeights& model, int n0) {
    require(questions.size() == oracle_ids.size(), Errc::internal, "questions and oracle lists differ in length");
    std::vector<TrainExample> out;
    out.reserve(questions.size());
    for (size_t k = 0; k < questions.size(); ++k) {
        TrainExample ex;
        ex.question = questions[k];
        require(!oracle_ids[k].empty(), Errc::data, "example has an empty oracle set");
        for (auto id : oracle_ids[k]) ex.oracle.push_back(static_cast<int>(pool.index_of(id)));
        ex.s0 = initial_selection(ex.question, pool, pooled, model, n0).set;
        out.push_back(std::move(ex));
    }
    return out;
}

TrainResult train(const std::vector<TrainExample>& data, const RetrievalParams& init, const ChunkPool& pool,
                  const PooledIndex& pooled, const ModelWeights& model, const TrainConfig& cfg,
                  const std::function<void(int, double)>& on_step) {
    cfg.validate();
    require(!data.empty(), Errc::data, "training set is empty");
    validate_params(init, model.cfg);
    TrainResult res;
    res.params = init;
    Mat& rho = res.params.rho;
    Mat& alpha = res.params.alpha;
    Mat m_r = Mat::Zero(rho.rows(), rho.cols()), v_r = m_r;
    Mat m_a = Mat::Zero(alpha.rows(), alpha.cols()), v_a = m_a;

    std::mt19937_64 rng(cfg.seed);
    std::vector<size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    size_t cursor = 0;

    for (int step = 0; step < cfg.steps; ++step) {
        Mat g_r = Mat::Zero(rho.rows(), rho.cols());
        Mat g_a = Mat::Zero(alpha.rows(), alpha.cols());
        double loss = 0.0;
        for (int b = 0; b < cfg.batch; ++b) {
            if (cursor == order.size()) {
                std::shuffle(order.begin(), order.end(), rng);
                cursor = 0;
            }
            const auto g = grad_retrieval_params(data[order[cursor++]], res.params, pool, pooled, model);
            g_r += g.d_rho;
            g_a += g.d_alpha;
            loss += g.loss;
        }
        const double inv = 1.0 / cfg.batch;
        g_r *= inv;
        g_a *= inv;
        loss *= inv;
        if (!std::isfinite(loss)) fail(Errc::non_finite, "training diverged at step " + std::to_string(step));

        const double lr = cfg.lr_at(step);
        const double bc1 = 1.0 - std::pow(cfg.beta1, step + 1), bc2 = 1.0 - std::pow(cfg.beta2, step + 1);
        auto adam = [&](Mat& p, Mat& m, Mat& v, const Mat& g) {
            m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
            v = cfg.beta2 * v + (1.0 - cfg.beta2) * g.cwiseProduct(g);
            if (cfg.weight_decay > 0) p -= lr * cfg.weight_decay * p;
            p.array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + cfg.eps);
        };
        adam(rho, m_r, v_r, g_r);
        adam(alpha, m_a, v_a, g_a);
        res.history.loss.push_back(loss);
        res.history.lr.push_back(lr);
        if (on_step) on_step(step, loss);
    }
    return res;
}

double mean_loss(const std::vector<TrainExample>& data, const RetrievalParams& params, const ChunkPool& pool,
                 const PooledIndex& pooled, const ModelWeights& model) {
    require(!data.empty(), Errc::data, "empty example set");
    double acc = 0.0;
    for (const auto& ex : data)
        acc += retrieval_loss(intra_scores(ex.question, params, ex.s0, pool, pooled, model).s, ex.oracle);
    return acc / static_cast<double>(data.size());
}

std::string loss_csv(const TrainHistory& h) {
    std::ostringstream os;
    os.precision(17);
    os << "step,loss,lr\n";
    for (size_t i = 0; i < h.loss.size(); ++i) os << i << ',' << h.loss[i] << ',' << h.lr[i] << '\n';
    return os.str();
}

}  // namespace intra
