#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "intra/error.hpp"
#include "intra/synthetic.hpp"
#include "intra/trainer.hpp"

using namespace intra;

TEST_CASE("retrieval loss values") {
    CHECK(retrieval_loss({0, 0, 0, 0}, {0, 1}) == doctest::Approx(1.3862943611198906).epsilon(1e-14));
    CHECK(retrieval_loss({10, 0, 0}, {0}) == doctest::Approx(9.079573746717529e-05).epsilon(1e-10));
    for (int M : {3, 17, 200}) {
        std::vector<int> all(static_cast<size_t>(M));
        for (int i = 0; i < M; ++i) all[static_cast<size_t>(i)] = i;
        CHECK(std::abs(retrieval_loss(std::vector<double>(static_cast<size_t>(M), 0.7), all) - std::log(M)) <= 1e-12);
    }
    const std::vector<double> s{1.0, -2.0, 0.5};
    const double lse = std::log(std::exp(1.0) + std::exp(-2.0) + std::exp(0.5));
    CHECK(retrieval_loss(s, {0, 1, 2}) == doctest::Approx(lse - (1.0 - 2.0 + 0.5) / 3).epsilon(1e-14));
    CHECK_THROWS_AS(retrieval_loss(s, {}), Error);
    CHECK_THROWS_AS(retrieval_loss(s, {5}), Error);

    const auto g = retrieval_loss_grad(s, {0, 2});
    double sum = 0;
    for (double v : g) sum += v;
    CHECK(std::abs(sum) < 1e-15);
}

TEST_CASE("finite differences on a quadratic stub are exact") {
    Mat theta(2, 3);
    theta << 0.3, -1.2, 2.0, 0.1, 0.0, -0.7;
    const Mat grad = 2.0 * theta;
    std::vector<Eigen::Index> coords{0, 1, 2, 3, 4, 5};
    const double err = fd_max_rel_error([](const Mat& a) { return a.squaredNorm(); }, theta, grad, coords, 1e-4);
    CHECK(err <= 1e-9);
}

namespace {

struct Setup {
    ModelWeights w = init_random(toy_config(), 21);
    std::vector<Chunk> chunks = testing_util::random_chunks(30, 8, 256, 22);
    ChunkPool pool = build_pool(chunks, w);
    PooledIndex pooled = build_pooled(pool, 3);
    TrainExample ex;
    RetrievalParams params = init_params(w.cfg, 4, 23, 0.5);

    Setup() {
        ex.question = testing_util::random_tokens(7, 256, 24);
        ex.oracle = {3, 11};
        ex.s0 = initial_selection(ex.question, pool, pooled, w, 4).set;
        std::mt19937_64 rng(25);
        std::uniform_real_distribution<double> u(0.2, 1.0);
        for (Eigen::Index i = 0; i < params.alpha.size(); ++i) params.alpha.data()[i] = u(rng);
    }
};

}  // namespace

TEST_CASE("zero alpha gives zero rho gradient") {
    Setup s;
    s.params.alpha.setZero();
    const GradReport g = grad_retrieval_params(s.ex, s.params, s.pool, s.pooled, s.w);
    CHECK(g.d_rho.cwiseAbs().maxCoeff() == 0.0);
    CHECK(g.d_alpha.cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("gradient matches central differences on the toy model") {
    Setup s;
    const FiniteDiffReport r = finite_diff_check(s.ex, s.params, s.pool, s.pooled, s.w, 1e-4, 1e-3, 32, 7);
    CHECK(r.alpha_coords == s.params.alpha.size());
    CHECK(r.rho_coords == 32);
    CHECK(r.alpha_max_rel <= 1e-6);
    CHECK(r.rho_max_rel <= 1e-4);
}

TEST_CASE("training determinism, zero lr and frozen weights") {
    SyntheticTaskSpec spec;
    spec.M = 120;
    spec.n_examples = 30;
    const auto corpus = gen_corpus(spec);
    const ModelWeights w = init_weights(synthetic_config(), "structured", 1);
    const ChunkPool pool = build_pool(corpus.chunks, w);
    const PooledIndex pooled = build_pooled(pool, 3);
    std::vector<std::vector<int>> qs;
    std::vector<std::vector<int64_t>> os;
    for (const auto& e : corpus.train) {
        qs.push_back(e.question);
        os.push_back(e.oracle);
    }
    const auto data = prepare_examples(qs, os, pool, pooled, w, 8);
    const RetrievalParams init = init_params(w.cfg, 4, 3);
    TrainConfig cfg;
    cfg.steps = 6;
    cfg.batch = 4;
    cfg.warmup = 2;
    cfg.seed = 9;
    const auto checksum = weights_checksum(w);

    const TrainResult a = train(data, init, pool, pooled, w, cfg);
    const TrainResult b = train(data, init, pool, pooled, w, cfg);
    CHECK(params_hash(a.params) == params_hash(b.params));
    CHECK(a.history.loss == b.history.loss);
    CHECK(a.history.loss.size() == 6);
    CHECK(weights_checksum(w) == checksum);

    TrainConfig frozen = cfg;
    frozen.lr = 0.0;
    const TrainResult z = train(data, init, pool, pooled, w, frozen);
    CHECK(params_hash(z.params) == params_hash(init));

    // One full-batch step on the same examples: the loss history is constant at lr 0.
    frozen.batch = static_cast<int>(data.size());
    const TrainResult zc = train(data, init, pool, pooled, w, frozen);
    for (double l : zc.history.loss) CHECK(l == doctest::Approx(zc.history.loss[0]).epsilon(1e-12));

    CHECK(cfg.lr_at(0) == doctest::Approx(cfg.lr / 2));
    CHECK(cfg.lr_at(5) == cfg.lr);
    TrainConfig bad = cfg;
    bad.steps = 0;
    CHECK_THROWS_AS(bad.validate(), Error);
    CHECK(loss_csv(a.history).rfind("step,loss,lr\n", 0) == 0);

    TrainConfig longer = cfg;
    longer.steps = 60;
    longer.lr = 0.02;
    const TrainResult t = train(data, init, pool, pooled, w, longer);
    CHECK(mean_loss(data, t.params, pool, pooled, w) < mean_loss(data, init, pool, pooled, w));
}
