#include <benchmark/benchmark.h>

#include <map>
#include <random>

#include "intra/chunk_store.hpp"
#include "intra/config.hpp"
#include "intra/ivf.hpp"
#include "intra/model.hpp"
#include "intra/retrieval.hpp"

using namespace intra;

namespace {

std::vector<int> tokens(int n, int vocab, uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> tok(4, vocab - 1);
    std::vector<int> v(static_cast<size_t>(n));
    for (auto& t : v) t = tok(rng);
    return v;
}

struct Fixture {
    ModelWeights w;
    std::vector<Chunk> chunks;
    ChunkPool pool;
    PooledIndex pooled;
    RetrievalParams params;
    std::vector<int> question;

    Fixture(int M, int L_c) : w(init_random(toy_config(), 1)) {
        for (int i = 0; i < M; ++i) chunks.push_back({i, tokens(L_c, w.cfg.vocab_size, 100 + i)});
        pool = build_pool(chunks, w);
        pooled = build_pooled(pool, 3);
        params = init_params(w.cfg, 8, 2);
        question = tokens(16, w.cfg.vocab_size, 7);
    }
};

const Fixture& fixture(int M) {
    static std::map<int, Fixture> cache;
    auto it = cache.find(M);
    if (it == cache.end()) it = cache.emplace(M, Fixture(M, 32)).first;
    return it->second;
}

void BM_EncodeChunk(benchmark::State& st) {
    const ModelWeights w = init_random(toy_config(), 1);
    const auto t = tokens(static_cast<int>(st.range(0)), w.cfg.vocab_size, 3);
    for (auto _ : st) benchmark::DoNotOptimize(encode_chunk(w, t));
    st.SetItemsProcessed(st.iterations() * st.range(0));
}
BENCHMARK(BM_EncodeChunk)->Arg(16)->Arg(64)->Arg(256);

void BM_InitialScores(benchmark::State& st) {
    const Fixture& f = fixture(static_cast<int>(st.range(0)));
    for (auto _ : st) benchmark::DoNotOptimize(initial_scores(f.question, f.pool, f.pooled, f.w));
    st.SetItemsProcessed(st.iterations() * st.range(0));
}
BENCHMARK(BM_InitialScores)->Arg(64)->Arg(256)->Arg(1024);

void BM_IntraScores(benchmark::State& st) {
    const Fixture& f = fixture(static_cast<int>(st.range(0)));
    const SelectionSet s0 = initial_selection(f.question, f.pool, f.pooled, f.w, 8).set;
    for (auto _ : st) benchmark::DoNotOptimize(intra_scores(f.question, f.params, s0, f.pool, f.pooled, f.w));
    st.SetItemsProcessed(st.iterations() * st.range(0));
}
BENCHMARK(BM_IntraScores)->Arg(64)->Arg(256)->Arg(1024);

void BM_DecoderPrefill(benchmark::State& st) {
    const Fixture& f = fixture(256);
    std::vector<int> sel;
    for (int i = 0; i < st.range(0); ++i) sel.push_back(i);
    const Mat ctx = gather_context(f.pool, sel);
    const Mat x = embed_tokens(f.w, f.question);
    DecoderOptions opt;
    opt.last_logits_only = true;
    for (auto _ : st) benchmark::DoNotOptimize(decoder_forward(f.w, x, ctx, opt));
}
BENCHMARK(BM_DecoderPrefill)->Arg(0)->Arg(8)->Arg(64);

void BM_QuantizeRow(benchmark::State& st) {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> nd;
    Eigen::RowVectorXd row(st.range(0));
    for (auto& v : row) v = nd(rng);
    for (auto _ : st) benchmark::DoNotOptimize(quantize_row(row));
}
BENCHMARK(BM_QuantizeRow)->Arg(64)->Arg(512);

void BM_IvfSearch(benchmark::State& st) {
    const Fixture& f = fixture(1024);
    const IvfIndex ivf = ivf_build(f.pooled, 32, 11);
    const Mat q = question_keys(f.w, f.question);
    for (auto _ : st) benchmark::DoNotOptimize(ivf_search(ivf, q, static_cast<int>(st.range(0))));
}
BENCHMARK(BM_IvfSearch)->Arg(1)->Arg(4)->Arg(32);

}  // namespace

BENCHMARK_MAIN();
