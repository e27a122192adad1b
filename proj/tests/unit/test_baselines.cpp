#include "doctest.h"
#include "helpers.hpp"
#include "intra/baselines.hpp"
#include "intra/error.hpp"

using namespace intra;

TEST_CASE("tf-idf cosine against the reference values") {
    const LexicalIndex idx = build_lexical({{1, 2, 3}, {2, 2, 4}, {3, 4, 5, 5}, {6, 7}});
    const auto s = tfidf_scores({2, 3, 5}, idx);
    const double want[4] = {0.25623585891566375, 0.3201473778844136, 0.8987898006838151, 0.0};
    for (int i = 0; i < 4; ++i) CHECK(s[static_cast<size_t>(i)] == doctest::Approx(want[i]).epsilon(1e-12));
    CHECK(tfidf_rank({2, 3, 5}, idx, 4) == SelectionSet{2, 1, 0, 3});
    CHECK(tfidf_rank({2, 3, 5}, idx, 2) == SelectionSet{2, 1});
    CHECK(idx.idf_tfidf(2) == doctest::Approx(std::log(4.0 / 3.0)));
}

TEST_CASE("BM25") {
    const LexicalIndex idx = build_lexical({{1, 2, 3, 4, 5}, {6, 7, 8, 9, 10}});
    const auto s = bm25_scores({1}, idx);
    CHECK(s[0] == doctest::Approx(0.6931471805599453).epsilon(1e-14));
    CHECK(s[1] == 0.0);

    // b = 0 drops length normalization: one hit in a short or a long document scores the same.
    const LexicalIndex len = build_lexical({{1, 2}, {1, 3, 4, 5, 6, 7, 8}});
    const auto flat = bm25_scores({1}, len, 1.2, 0.0);
    CHECK(flat[0] == flat[1]);
    const auto norm = bm25_scores({1}, len);
    CHECK(norm[0] > norm[1]);
    CHECK(bm25_rank({1}, len, 2, 1.2, 0.0) == SelectionSet{0, 1});

    // Repeated query terms count once.
    CHECK(bm25_scores({1, 1}, len)[0] == norm[0]);
}

TEST_CASE("reciprocal rank fusion") {
    const auto s = rrf_scores({{5, 9, 2}, {7, 8, 5}}, 60);
    double five = -1;
    for (const auto& [c, v] : s)
        if (c == 5) five = v;
    CHECK(five == doctest::Approx(0.032266458495966696).epsilon(1e-14));
    CHECK(rrf_fuse({{5, 9, 2}, {7, 8, 5}}, 60, 1) == SelectionSet{5});

    const SelectionSet one{4, 1, 3, 0};
    CHECK(rrf_fuse({one}, 60, 4) == one);
    for (const auto& [c, v] : rrf_scores({{1, 2}, {2, 3}}, 60)) CHECK(c != 0);
    const auto fused = rrf_fuse({{1, 2}, {2, 3}}, 60, 10);
    CHECK(fused.size() == 3);
    CHECK(fused[0] == 2);
    CHECK_THROWS_AS(rrf_fuse({one}, -1, 3), Error);
}

TEST_CASE("encoder MaxSim baseline equals the initial selection") {
    const ModelWeights w = init_random(toy_config(), 3);
    const ChunkPool pool = build_pool(testing_util::random_chunks(25, 6, 256, 4), w);
    const PooledIndex pooled = build_pooled(pool, 3);
    const auto q = testing_util::random_tokens(5, 256, 5);
    for (int k : {1, 5, 25})
        CHECK(encoder_maxsim_rank(q, pool, pooled, w, k) == initial_selection(q, pool, pooled, w, k).set);
}
