#include <fstream>

#include "doctest.h"
#include "helpers.hpp"
#include "intra/error.hpp"
#include "intra/qa.hpp"
#include "intra/synthetic.hpp"

using namespace intra;

TEST_CASE("context assembly") {
    CHECK(assemble_context({7, 3, 9, 1, 4}, {3, 7, 2, 5}) == std::vector<int>{7, 3, 9, 1, 2});
    CHECK(assemble_context({1, 2, 3, 4}, {1, 2, 3, 4}) == std::vector<int>{1, 2, 3, 4});
    CHECK(assemble_context({1, 2}, {}) == std::vector<int>{1, 2});
    CHECK(assemble_context({}, {6, 8}) == std::vector<int>{6});
}

TEST_CASE("metrics") {
    CHECK(complete_evidence_recall({4, 9, 1}, {9, 4}, 2) == 1);
    CHECK(complete_evidence_recall({4, 1, 9}, {9, 4}, 2) == 0);
    CHECK(complete_evidence_recall({4}, {4}, 5) == 1);
    CHECK_THROWS_AS(complete_evidence_recall({4}, {}, 5), Error);

    CHECK(exact_match({1, 2}, {1, 2}) == 1);
    CHECK(exact_match({1, 2}, {2, 1}) == 0);
    CHECK(token_f1({1, 2}, {1, 3}) == doctest::Approx(0.5));
    CHECK(token_f1({1, 1}, {1}) == doctest::Approx(2.0 / 3.0));
    CHECK(token_f1({5}, {6}) == 0.0);
    CHECK(token_f1({}, {6}) == 0.0);

    CHECK(gap_closure(0.4, 0.1, 0.5) == doctest::Approx(75.0));
    CHECK(gap_closure(0.5, 0.1, 0.5) == doctest::Approx(100.0));
    CHECK(gap_closure(0.1, 0.1, 0.5) == doctest::Approx(0.0));
    CHECK_THROWS_AS(gap_closure(0.3, 0.2, 0.2), Error);
    CHECK(ci_halfwidth(0.5, 100) == doctest::Approx(0.098));
    CHECK(ci_halfwidth(0.5, 0) == 0.0);
}

TEST_CASE("mode names") {
    for (const char* m : {"initial", "rerank", "intra", "random", "complete", "tfidf", "bm25", "rrf", "encoder_maxsim"})
        CHECK(std::string(mode_name(parse_mode(m))) == m);
    CHECK_THROWS_AS(parse_mode("oracle"), Error);
    CHECK(parse_modes("intra,bm25").size() == 2);
}

TEST_CASE("dataset files round trip") {
    const std::string dir = testing_util::scratch_dir("qa");
    SyntheticTaskSpec spec;
    spec.M = 60;
    spec.n_examples = 12;
    const auto c = gen_corpus(spec);
    write_corpus(c, dir);
    const auto chunks = load_chunks(dir + "/chunks.jsonl");
    const auto train = load_dataset(dir + "/train.jsonl");
    CHECK(chunks.size() == 60);
    CHECK(chunks[5].tokens == c.chunks[5].tokens);
    REQUIRE(train.size() == c.train.size());
    CHECK(train[0].question == c.train[0].question);
    CHECK(train[0].oracle == c.train[0].oracle);
    CHECK(dataset_jsonl(train) == dataset_jsonl(c.train));

    std::ofstream(dir + "/bad.jsonl") << "{\"id\": 1, \"question\": [4]}\n";
    CHECK_THROWS_AS(load_dataset(dir + "/bad.jsonl"), Error);
    CHECK_THROWS_AS(load_dataset(dir + "/missing.jsonl"), Error);
}

TEST_CASE("evaluation modes on a small corpus") {
    SyntheticTaskSpec spec;
    spec.M = 150;
    spec.n_examples = 45;
    const auto c = gen_corpus(spec);
    const ModelWeights w = init_weights(synthetic_config(), "structured", 1);
    const ChunkPool pool = build_pool(c.chunks, w);
    const PooledIndex pooled = build_pooled(pool, 3);
    const RetrievalParams p = init_params(w.cfg, 8, 2);

    EvalConfig cfg;
    cfg.modes = parse_modes("initial,rerank,intra,random,complete,tfidf,bm25,rrf,encoder_maxsim");
    const EvalReport r = evaluate(c.eval, pool, pooled, p, w, cfg, c.chunks);
    REQUIRE(r.modes.size() == 9);
    CHECK(r.find(Mode::complete)->recall5 == 1.0);
    CHECK(r.find(Mode::random)->recall20 == 0.0);
    CHECK(r.find(Mode::complete)->em >= r.find(Mode::random)->em);
    for (const auto& m : r.modes) {
        CHECK(m.recall5 <= m.recall10);
        CHECK(m.recall10 <= m.recall20);
    }
    // Encoder MaxSim with k = 20 is the initial ranking truncated to 20.
    CHECK(r.find(Mode::encoder_maxsim)->recall20 == r.find(Mode::initial)->recall20);
    CHECK(r.to_csv().rfind("mode,n,recall5,", 0) == 0);
    CHECK(r.to_json().find("\"gap_closure\"") != std::string::npos);

    CHECK(evaluate(c.eval, pool, pooled, p, w, cfg, c.chunks).to_json() == r.to_json());
    EvalConfig par = cfg;
    par.threads = 3;
    CHECK(evaluate(c.eval, pool, pooled, p, w, par, c.chunks).to_csv() == r.to_csv());

    EvalConfig lex;
    lex.modes = {Mode::bm25};
    CHECK_THROWS_AS(evaluate(c.eval, pool, pooled, p, w, lex), Error);

    EvalConfig only;
    only.generate = false;
    only.pipeline.initial_only = true;
    only.modes = {Mode::initial, Mode::intra};
    const EvalReport io = evaluate(c.eval, pool, pooled, p, w, only);
    CHECK(io.modes[0].recall5 == io.modes[1].recall5);
    CHECK_FALSE(io.modes[0].generated);
}

TEST_CASE("answer trace") {
    SyntheticTaskSpec spec;
    spec.M = 80;
    spec.n_examples = 6;
    const auto c = gen_corpus(spec);
    const ModelWeights w = init_weights(synthetic_config(), "structured", 1);
    const ChunkPool pool = build_pool(c.chunks, w);
    const PooledIndex pooled = build_pooled(pool, 3);
    const RetrievalParams p = init_params(w.cfg, 8, 2);
    PipelineConfig pc;
    const AnswerTrace t = answer(c.train[0].question, pool, pooled, p, w, pc);
    CHECK(t.s0.size() == 8);
    CHECK(t.s_intra.size() == 5);
    CHECK(t.context.size() == 5);
    CHECK(t.tokens.size() <= 4);
    pc.top5_only = true;
    CHECK(answer(c.train[0].question, pool, pooled, p, w, pc).context.size() == 5);
}
