// intra: command-line front end. Every command reads the key = value config
// (--config), applies --set overrides, then its own flags; flags win.

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cmath>
#include <cstdio>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>

#include "CLI11.hpp"
#include "intra/baselines.hpp"
#include "intra/bench.hpp"
#include "intra/binio.hpp"
#include "intra/chunk_store.hpp"
#include "intra/error.hpp"
#include "intra/ivf.hpp"
#include "intra/kvconfig.hpp"
#include "intra/qa.hpp"
#include "intra/retrieval.hpp"
#include "intra/synthetic.hpp"
#include "intra/trainer.hpp"
#include "json.hpp"

using namespace intra;

namespace {

struct Globals {
    std::string config_path;
    std::vector<std::string> sets;
    KvConfig flags;  // per-command flag overrides, applied last
    bool verbose = false, quiet = false;
};

// Registers a flag that writes straight into a config key.
void kv_option(CLI::App* app, Globals& g, const std::string& flag, const std::string& key, const std::string& help) {
    app->add_option_function<std::string>(
        flag, [&g, key](const std::string& v) { g.flags.set(key, v); }, help + " [" + key + "]");
}

void kv_flag(CLI::App* app, Globals& g, const std::string& flag, const std::string& key, const std::string& help) {
    app->add_flag_function(
        flag, [&g, key](int64_t) { g.flags.set(key, "true"); }, help + " [" + key + "]");
}

RunConfig resolve(const Globals& g) {
    KvConfig kv = g.config_path.empty() ? KvConfig{} : KvConfig::load(g.config_path);
    for (const auto& s : g.sets) {
        const auto eq = s.find('=');
        require(eq != std::string::npos && eq > 0, Errc::config, "--set expects key=value, got '" + s + "'");
        kv.set(s.substr(0, eq), s.substr(eq + 1));
    }
    for (const auto& [k, v] : g.flags.entries()) kv.set(k, v);
    RunConfig rc = RunConfig::from_kv(kv);
    rc.validate();
    return rc;
}

void need(const std::string& path, const std::string& key) {
    require(!path.empty(), Errc::config, "missing config key " + key);
}

// Resolved config next to an output so the run can be repeated.
void write_sidecar(const RunConfig& rc, const std::string& out) {
    write_file_atomic(out + ".cfg", "# resolved run config\n" + rc.to_kv().dump());
}

ModelWeights model_for(const RunConfig& rc) {
    if (!rc.model_path.empty()) {
        spdlog::info("loading weights {}", rc.model_path);
        return load_weights(rc.model_path);
    }
    spdlog::info("initializing {} weights for preset {} (seed {})", rc.model_init, rc.model_preset, rc.seed);
    return init_weights(preset_config(rc.model_preset), rc.model_init, rc.seed);
}

LoadedPool pool_for(const RunConfig& rc) {
    need(rc.pool_path, "paths.pool");
    LoadedPool lp = load_pool(rc.pool_path);
    if (lp.pooled.L_p != rc.L_p) {
        spdlog::info("rebuilding pooled rows with L_p={} (file has {})", rc.L_p, lp.pooled.L_p);
        lp.pooled = build_pooled(lp.pool, rc.L_p);
    }
    return lp;
}

void check_model_pool(const ModelWeights& w, const ChunkPool& pool) {
    require(w.cfg.d == pool.d, Errc::data,
            "pool width " + std::to_string(pool.d) + " does not match model d=" + std::to_string(w.cfg.d));
}

std::vector<int> parse_tokens(const std::string& s) {
    std::vector<int> out;
    std::string t = s;
    for (char& c : t)
        if (c == ',') c = ' ';
    std::istringstream in(t);
    std::string tok;
    while (in >> tok) {
        try {
            size_t used = 0;
            out.push_back(std::stoi(tok, &used));
            require(used == tok.size(), Errc::config, "bad token '" + tok + "'");
        } catch (const std::logic_error&) {
            fail(Errc::config, "bad token '" + tok + "'");
        }
    }
    require(!out.empty(), Errc::config, "question has no tokens");
    return out;
}

std::string number(double v) {
    char buf[64];
    if (std::fabs(v) < 1e18 && v == std::floor(v))
        std::snprintf(buf, sizeof buf, "%.0f", v);
    else
        std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

void emit(const std::string& out_path, const std::string& text) {
    if (out_path.empty() || out_path == "-")
        std::cout << text << std::flush;
    else
        write_file_atomic(out_path, text);
}

PipelineConfig pipeline_of(const RunConfig& rc, bool initial_only, bool top5_only) {
    PipelineConfig pc;
    pc.n0 = rc.n0;
    pc.n = rc.n;
    pc.R = rc.R;
    pc.initial_only = initial_only;
    pc.top5_only = top5_only;
    pc.initial.cosine = rc.cosine_s0;
    pc.initial.use_full_rows = rc.full_rows_s0;
    return pc;
}

// Questions come from --question or a dataset (optionally one --query-id).
std::vector<QAExample> questions_for(const RunConfig& rc, const std::string& question, std::optional<int64_t> qid) {
    if (!question.empty()) {
        QAExample ex;
        ex.id = qid.value_or(0);
        ex.question = parse_tokens(question);
        return {ex};
    }
    need(rc.eval_path, "paths.eval");
    auto data = load_dataset(rc.eval_path);
    if (!qid) return data;
    for (const auto& ex : data)
        if (ex.id == *qid) return {ex};
    fail(Errc::data, "query id " + std::to_string(*qid) + " is not in " + rc.eval_path);
}

// ---- commands ----

int cmd_gen_corpus(const RunConfig& rc, const std::string& out) {
    const SyntheticCorpus c = gen_corpus(rc.corpus);
    write_corpus(c, out);
    write_sidecar(rc, out + "/corpus");
    spdlog::info("wrote {} chunks, {} train and {} eval examples to {}", c.chunks.size(), c.train.size(),
                 c.eval.size(), out);
    return 0;
}

int cmd_encode_pool(const RunConfig& rc, const std::string& model_out) {
    need(rc.chunks_path, "paths.chunks");
    need(rc.pool_path, "paths.pool");
    const ModelWeights w = model_for(rc);
    if (!model_out.empty()) {
        save_weights(w, model_out);
        spdlog::info("wrote weights {} (checksum {})", model_out, hex64(weights_checksum(w)));
    }
    const auto chunks = load_chunks(rc.chunks_path);
    const ChunkPool pool = build_pool(chunks, w);
    const PooledIndex pooled = build_pooled(pool, rc.L_p);
    save_pool(pool, pooled, rc.pool_path, parse_precision(rc.precision));
    write_sidecar(rc, rc.pool_path);
    spdlog::info("encoded {} chunks ({} rows, L_p={}, {}) into {}", pool.M(), pool.N(), rc.L_p, rc.precision,
                 rc.pool_path);
    return 0;
}

int cmd_train(const RunConfig& rc, const std::string& loss_csv_path) {
    need(rc.train_path, "paths.train");
    need(rc.params_path, "paths.params");
    const ModelWeights w = model_for(rc);
    const LoadedPool lp = pool_for(rc);
    check_model_pool(w, lp.pool);
    const auto data = load_dataset(rc.train_path);
    std::vector<std::vector<int>> qs;
    std::vector<std::vector<int64_t>> oracles;
    for (const auto& ex : data) {
        qs.push_back(ex.question);
        oracles.push_back(ex.oracle);
    }
    const auto examples = prepare_examples(qs, oracles, lp.pool, lp.pooled, w, rc.n0);
    const RetrievalParams init = init_params(w.cfg, rc.R, rc.seed);
    const double before = mean_loss(examples, init, lp.pool, lp.pooled, w);
    spdlog::info("training R={} on {} examples; initial loss {:.4f}", rc.R, examples.size(), before);
    const auto checksum = weights_checksum(w);
    const TrainResult res = train(examples, init, lp.pool, lp.pooled, w, rc.train, [](int step, double loss) {
        if (step % 50 == 0) spdlog::info("step {} loss {:.4f}", step, loss);
    });
    require(weights_checksum(w) == checksum, Errc::internal, "model weights changed during training");
    const double after = mean_loss(examples, res.params, lp.pool, lp.pooled, w);
    spdlog::info("final loss {:.4f} ({:+.1f}%)", after, 100.0 * (after - before) / before);
    save_params(res.params, rc.params_path);
    write_sidecar(rc, rc.params_path);
    if (!loss_csv_path.empty()) write_file_atomic(loss_csv_path, loss_csv(res.history));
    return 0;
}

struct RetrieveFlags {
    std::string question, out;
    std::optional<int64_t> qid;
    bool initial_only = false;
    int ivf_centroids = 0, nprobe = 0, threads = 1;
};

int cmd_retrieve(const RunConfig& rc, const RetrieveFlags& f) {
    const ModelWeights w = model_for(rc);
    const LoadedPool lp = pool_for(rc);
    check_model_pool(w, lp.pool);
    RetrievalParams params;
    if (!f.initial_only) {
        need(rc.params_path, "paths.params");
        params = load_params(rc.params_path).truncated(rc.R);
        validate_params(params, w.cfg);
    }
    std::optional<IvfIndex> ivf;
    if (f.ivf_centroids > 0) {
        require(f.nprobe >= 1, Errc::config, "--nprobe must be >= 1 with --ivf-centroids");
        ivf = ivf_build(lp.pooled, f.ivf_centroids, rc.seed);
    }
    const std::string hash = f.initial_only ? "" : hex64(params_hash(params));
    std::string out;
    for (const auto& ex : questions_for(rc, f.question, f.qid)) {
        std::vector<int> candidates;
        InitialOptions io;
        io.cosine = rc.cosine_s0;
        io.use_full_rows = rc.full_rows_s0;
        io.score.threads = f.threads;
        if (ivf) {
            candidates = ivf_search(*ivf, question_keys(w, ex.question), f.nprobe);
            io.score.candidates = &candidates;
        }
        const ScoreVector s0_scores = initial_scores(ex.question, lp.pool, lp.pooled, w, io);
        const SelectionSet s0 = ivf ? select_top_n_among(s0_scores.s, candidates, rc.n0)
                                    : select_top_n(s0_scores.s, rc.n0);
        if (f.initial_only) {
            out += ranking_json(ex.id, Stage::initial, s0, s0_scores, lp.pool, hash) + "\n";
            continue;
        }
        ScoreOptions so = io.score;
        const ScoreVector s = intra_scores(ex.question, params, s0, lp.pool, lp.pooled, w, so);
        const SelectionSet top = ivf ? select_top_n_among(s.s, candidates, rc.n) : select_top_n(s.s, rc.n);
        out += ranking_json(ex.id, Stage::intra, top, s, lp.pool, hash) + "\n";
    }
    emit(f.out, out);
    return 0;
}

struct AnswerFlags {
    std::string question, out;
    std::optional<int64_t> qid;
    bool initial_only = false, top5_only = false;
    int max_len = 4;
};

int cmd_answer(const RunConfig& rc, const AnswerFlags& f) {
    const ModelWeights w = model_for(rc);
    const LoadedPool lp = pool_for(rc);
    check_model_pool(w, lp.pool);
    need(rc.params_path, "paths.params");
    const RetrievalParams params = load_params(rc.params_path);
    PipelineConfig pc = pipeline_of(rc, f.initial_only, f.top5_only);
    pc.max_len = f.max_len;
    std::string out;
    for (const auto& ex : questions_for(rc, f.question, f.qid)) {
        const AnswerTrace t = answer(ex.question, lp.pool, lp.pooled, params, w, pc);
        auto ids = [&](const std::vector<int>& v) {
            std::vector<int64_t> r;
            for (int i : v) r.push_back(lp.pool.ids[static_cast<size_t>(i)]);
            return r;
        };
        nlohmann::json j{{"query_id", ex.id},          {"answer", t.tokens},   {"context", ids(t.context)},
                         {"s0", ids(t.s0)},            {"s_intra", ids(t.s_intra)}};
        out += j.dump() + "\n";
    }
    emit(f.out, out);
    return 0;
}

struct EvalFlags {
    std::string modes = "initial,rerank,intra", out, csv;
    bool initial_only = false, top5_only = false, no_generate = false;
    int threads = 1;
};

int cmd_eval(const RunConfig& rc, const EvalFlags& f) {
    need(rc.eval_path, "paths.eval");
    const ModelWeights w = model_for(rc);
    const LoadedPool lp = pool_for(rc);
    check_model_pool(w, lp.pool);
    EvalConfig ec;
    ec.modes = parse_modes(f.modes);
    ec.pipeline = pipeline_of(rc, f.initial_only, f.top5_only);
    ec.generate = !f.no_generate;
    ec.seed = rc.seed;
    ec.threads = f.threads;
    RetrievalParams params;
    bool needs_params = false;
    for (Mode m : ec.modes) needs_params |= (m == Mode::intra && !f.initial_only);
    if (needs_params || ec.generate) {
        need(rc.params_path, "paths.params");
        params = load_params(rc.params_path);
    }
    std::vector<Chunk> chunks;
    for (Mode m : ec.modes)
        if ((m == Mode::tfidf || m == Mode::bm25 || m == Mode::rrf) && chunks.empty()) {
            need(rc.chunks_path, "paths.chunks");
            chunks = load_chunks(rc.chunks_path);
        }
    const auto data = load_dataset(rc.eval_path);
    EvalReport rep = evaluate(data, lp.pool, lp.pooled, params, w, ec, chunks);
    rep.dataset = rc.eval_path;
    for (const auto& m : rep.modes)
        spdlog::info("{:>14}  recall@5 {:.3f}  recall@10 {:.3f}  recall@20 {:.3f}  EM {:.3f}  F1 {:.3f}",
                     mode_name(m.mode), m.recall5, m.recall10, m.recall20, m.em, m.f1);
    emit(f.out, rep.to_json());
    if (!f.csv.empty()) write_file_atomic(f.csv, rep.to_csv());
    if (!f.out.empty() && f.out != "-") write_sidecar(rc, f.out);
    return 0;
}

struct BenchFlags {
    std::string out;
    int score_threads = 0;
};

int cmd_bench(const RunConfig& rc, const BenchFlags& f) {
    need(f.out, "--out");
    require(!rc.bench.values.empty(), Errc::config, "missing config key bench.values");
    const ModelWeights w = model_for(rc);
    const auto rows = run_sweep(w, rc.bench);
    write_file_atomic(f.out, sweep_csv(rows));
    auto side = nlohmann::json::parse(sweep_sidecar_json(rc.bench, w.cfg));
    if (f.score_threads > 1) {
        // Parallel chunk scoring, timed on its own so the TTFT rows stay single-threaded.
        std::mt19937_64 rng(rc.seed);
        std::vector<Chunk> chunks(static_cast<size_t>(rc.bench.M));
        std::uniform_int_distribution<int> tok(4, w.cfg.vocab_size - 1);
        for (size_t i = 0; i < chunks.size(); ++i) {
            chunks[i].id = static_cast<int64_t>(i);
            for (int t = 0; t < rc.bench.L_c; ++t) chunks[i].tokens.push_back(tok(rng));
        }
        const ChunkPool pool = build_pool(chunks, w);
        std::normal_distribution<double> nd;
        Mat q(w.cfg.L_dec * w.cfg.n_h * rc.R, w.cfg.d);
        for (Eigen::Index i = 0; i < q.size(); ++i) q.data()[i] = nd(rng);
        const double t1 = measure_scoring_ms(pool, q, rc.R, 1, rc.bench.reps, rc.bench.warmup);
        const double tn = measure_scoring_ms(pool, q, rc.R, f.score_threads, rc.bench.reps, rc.bench.warmup);
        side["scoring"] = {{"threads", f.score_threads}, {"ms_median_1", t1}, {"ms_median_n", tn}};
        spdlog::info("full-pool scoring: {:.3f} ms (1 thread), {:.3f} ms ({} threads)", t1, tn, f.score_threads);
    }
    write_file_atomic(f.out + ".json", side.dump(2) + "\n");
    for (const auto& r : rows)
        spdlog::info("{:>5} {}={:<5} ttft median {:.3f} ms", bench_mode_name(r.mode), r.axis, r.value,
                     r.ttft_ms_median);
    return 0;
}

struct CostFlags {
    std::string mode = "full,rag,intra";
    double M = 512, L_c = 128, L_q = 128, k = 4, L_g = 128;
};

int cmd_cost_model(const CostFlags& f) {
    CostParams p{f.M, f.L_c, f.L_q, f.k, f.L_g};
    for (BenchMode m : parse_bench_modes(f.mode)) {
        const CostBreakdown c = cost_model(p, m);
        std::cout << "mode=" << bench_mode_name(m) << " pre_query=" << number(c.pre_query)
                  << " retrieval=" << number(c.retrieval) << " prefill=" << number(c.prefill)
                  << " generation=" << number(c.generation) << "\n";
    }
    return 0;
}

int cmd_pool_stats(const RunConfig& rc) {
    need(rc.pool_path, "paths.pool");
    const LoadedPool lp = load_pool(rc.pool_path);
    const ModelConfig cfg = rc.model_path.empty() ? preset_config(rc.model_preset) : load_weights(rc.model_path).cfg;
    const PoolStats s = pool_stats(lp.pool, cfg);
    std::cout << "M=" << s.M << " N=" << s.N << " d=" << s.d << " L_p=" << lp.pooled.L_p
              << " precision=" << precision_name(lp.precision) << " bytes_f32=" << number(s.bytes_f32)
              << " bytes_int8=" << number(s.bytes_int8) << " kv_compression=" << number(s.kv_compression) << "\n";
    return 0;
}

void report(Errc code, const std::string& what) {
    std::string msg = what;
    for (char& c : msg)
        if (c == '\n' || c == '\r') c = ' ';
    std::fprintf(stderr, "error code=%s exit=%d message=\"%s\"\n", errc_name(code), exit_code(code), msg.c_str());
}

}  // namespace

int main(int argc, char** argv) {
    auto logger = spdlog::stderr_color_mt("intra");
    spdlog::set_default_logger(logger);
    spdlog::set_pattern("[%H:%M:%S.%e] [%^%l%$] %v");

    Globals g;
    CLI::App app{"Retrieval inside the decoder: corpus, pool, training, retrieval, eval and bench tools"};
    app.require_subcommand(1);
    app.fallthrough();
    app.add_option("-c,--config", g.config_path, "key = value config file");
    app.add_option("--set", g.sets, "override a config key (key=value), repeatable");
    app.add_flag("-v,--verbose", g.verbose, "debug logging");
    app.add_flag("-q,--quiet", g.quiet, "warnings and errors only");

    auto common_model = [&](CLI::App* s) {
        kv_option(s, g, "--model", "paths.model", "weights file");
        kv_option(s, g, "--preset", "model.preset", "model preset when no weights file is given");
        kv_option(s, g, "--init", "model.init", "random or structured");
        kv_option(s, g, "--seed", "seed", "root seed");
    };
    auto retrieval_flags = [&](CLI::App* s) {
        kv_option(s, g, "--pool", "paths.pool", "pool file");
        kv_option(s, g, "--params", "paths.params", "retrieval params file");
        kv_option(s, g, "--dataset", "paths.eval", "dataset jsonl");
        kv_option(s, g, "--n0", "retrieval.n0", "S0 size (0 = empty S0)");
        kv_option(s, g, "--n", "retrieval.n", "final top-n");
        kv_option(s, g, "--R", "retrieval.R", "retrieval tokens used");
        kv_option(s, g, "--Lp", "retrieval.L_p", "pooled rows per chunk");
        kv_flag(s, g, "--cosine-s0", "retrieval.cosine_s0", "mean-vector cosine for S0");
        kv_flag(s, g, "--full-rows", "retrieval.full_rows_s0", "score S0 against full rows");
    };

    std::string corpus_out;
    auto* gen = app.add_subcommand("gen-corpus", "generate a seeded synthetic corpus and datasets");
    gen->add_option("--out", corpus_out, "output directory")->required();
    common_model(gen);
    kv_option(gen, g, "--M", "corpus.M", "total chunks");
    kv_option(gen, g, "--Lc", "corpus.L_c", "tokens per chunk");
    kv_option(gen, g, "--vocab", "corpus.vocab_size", "vocabulary size");
    kv_option(gen, g, "--examples", "corpus.n_examples", "number of questions");
    kv_option(gen, g, "--hops", "corpus.hops", "oracle chunks per question (1 or 2)");
    kv_option(gen, g, "--overlap", "corpus.overlap", "distractor key overlap rate");

    std::string model_out;
    auto* enc = app.add_subcommand("encode-pool", "encode chunks into a pool file");
    common_model(enc);
    kv_option(enc, g, "--chunks", "paths.chunks", "chunks jsonl");
    kv_option(enc, g, "--out", "paths.pool", "pool file to write");
    kv_option(enc, g, "--Lp", "retrieval.L_p", "pooled rows per chunk");
    kv_option(enc, g, "--precision", "retrieval.precision", "f32 or int8");
    enc->add_option("--model-out", model_out, "also write the weights used");

    std::string loss_csv_path;
    auto* tr = app.add_subcommand("train-retrieval", "train retrieval tokens and head weights");
    common_model(tr);
    kv_option(tr, g, "--pool", "paths.pool", "pool file");
    kv_option(tr, g, "--train", "paths.train", "training dataset jsonl");
    kv_option(tr, g, "--out", "paths.params", "params file to write");
    kv_option(tr, g, "--R", "retrieval.R", "retrieval tokens");
    kv_option(tr, g, "--n0", "retrieval.n0", "S0 size");
    kv_option(tr, g, "--Lp", "retrieval.L_p", "pooled rows per chunk");
    kv_option(tr, g, "--steps", "train.steps", "optimizer steps");
    kv_option(tr, g, "--lr", "train.lr", "learning rate");
    kv_option(tr, g, "--warmup", "train.warmup", "warmup steps");
    kv_option(tr, g, "--batch", "train.batch", "batch size");
    tr->add_option("--loss-csv", loss_csv_path, "per-step loss CSV");

    RetrieveFlags rf;
    auto* ret = app.add_subcommand("retrieve", "rank chunks for questions");
    common_model(ret);
    retrieval_flags(ret);
    ret->add_option("--question", rf.question, "question token ids");
    ret->add_option("--query-id", rf.qid, "single dataset question");
    ret->add_flag("--initial-only", rf.initial_only, "stop at S0");
    ret->add_option("--ivf-centroids", rf.ivf_centroids, "prune with an IVF index of this many centroids");
    ret->add_option("--nprobe", rf.nprobe, "IVF lists probed");
    ret->add_option("--threads", rf.threads, "scoring threads");
    ret->add_option("--out", rf.out, "JSON lines output (default stdout)");

    AnswerFlags af;
    auto* ans = app.add_subcommand("answer", "retrieve, assemble context and decode");
    common_model(ans);
    retrieval_flags(ans);
    ans->add_option("--question", af.question, "question token ids");
    ans->add_option("--query-id", af.qid, "single dataset question");
    ans->add_flag("--initial-only", af.initial_only, "S_INTRA = S0");
    ans->add_flag("--top5-only", af.top5_only, "context = top five of S_INTRA");
    ans->add_option("--max-len", af.max_len, "max generated tokens");
    ans->add_option("--out", af.out, "JSON lines output (default stdout)");

    EvalFlags ef;
    auto* ev = app.add_subcommand("eval", "recall, EM and F1 per mode over a dataset");
    common_model(ev);
    retrieval_flags(ev);
    kv_option(ev, g, "--chunks", "paths.chunks", "chunks jsonl (lexical baselines)");
    ev->add_option("--modes", ef.modes, "comma list of modes");
    ev->add_flag("--initial-only", ef.initial_only, "S_INTRA = S0");
    ev->add_flag("--top5-only", ef.top5_only, "context = top five of S_INTRA");
    ev->add_flag("--no-generate", ef.no_generate, "skip decoding (retrieval metrics only)");
    ev->add_option("--threads", ef.threads, "worker threads");
    ev->add_option("--out", ef.out, "report JSON (default stdout)");
    ev->add_option("--csv", ef.csv, "report CSV");

    BenchFlags bf;
    auto* be = app.add_subcommand("bench", "TTFT and throughput sweep");
    common_model(be);
    kv_option(be, g, "--axis", "bench.axis", "k or L_c");
    kv_option(be, g, "--values", "bench.values", "comma list of axis values");
    kv_option(be, g, "--modes", "bench.modes", "comma list of full, rag, intra");
    kv_option(be, g, "--M", "bench.M", "pool size");
    kv_option(be, g, "--Lc", "bench.L_c", "chunk length");
    kv_option(be, g, "--Lq", "bench.L_q", "question length");
    kv_option(be, g, "--k", "bench.k", "retrieved chunks on the L_c axis");
    kv_option(be, g, "--Lg", "bench.L_g", "generated tokens for throughput");
    kv_option(be, g, "--reps", "bench.reps", "timed repetitions");
    kv_option(be, g, "--warmup", "bench.warmup", "discarded repetitions");
    kv_option(be, g, "--rag-encoding", "bench.rag_encoding", "joint or per_chunk");
    kv_option(be, g, "--R", "retrieval.R", "retrieval tokens for the scoring timing");
    be->add_flag_function("--no-throughput", [&g](int64_t) { g.flags.set("bench.throughput", "false"); },
                          "skip the throughput pass");
    be->add_option("--score-threads", bf.score_threads, "also time parallel chunk scoring");
    be->add_option("--out", bf.out, "CSV output (sidecar at <out>.json)");

    CostFlags cf;
    auto* cm = app.add_subcommand("cost-model", "analytic cost of each stage");
    cm->add_option("--mode", cf.mode, "full, rag, intra or a comma list");
    cm->add_option("--M", cf.M, "pool size");
    cm->add_option("--Lc", cf.L_c, "chunk length");
    cm->add_option("--Lq", cf.L_q, "question length");
    cm->add_option("--k", cf.k, "retrieved chunks");
    cm->add_option("--Lg", cf.L_g, "generated tokens");

    auto* ps = app.add_subcommand("pool-stats", "size and compression of a pool file");
    kv_option(ps, g, "--pool", "paths.pool", "pool file");
    kv_option(ps, g, "--model", "paths.model", "weights file (for the KV ratio)");
    kv_option(ps, g, "--preset", "model.preset", "model preset when no weights file is given");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::Error& e) {
        report(Errc::config, e.what());
        return exit_code(Errc::config);
    }
    if (g.verbose) spdlog::set_level(spdlog::level::debug);
    if (g.quiet) spdlog::set_level(spdlog::level::warn);

    try {
        const RunConfig rc = resolve(g);
        if (*cm) return cmd_cost_model(cf);
        if (*gen) return cmd_gen_corpus(rc, corpus_out);
        if (*enc) return cmd_encode_pool(rc, model_out);
        if (*tr) return cmd_train(rc, loss_csv_path);
        if (*ret) return cmd_retrieve(rc, rf);
        if (*ans) return cmd_answer(rc, af);
        if (*ev) return cmd_eval(rc, ef);
        if (*be) return cmd_bench(rc, bf);
        if (*ps) return cmd_pool_stats(rc);
        fail(Errc::internal, "no command ran");
    } catch (const Error& e) {
        report(e.code(), e.what());
        return exit_code(e.code());
    } catch (const nlohmann::json::exception& e) {
        report(Errc::data, e.what());
        return exit_code(Errc::data);
    } catch (const std::exception& e) {
        report(Errc::internal, e.what());
        return exit_code(Errc::internal);
    }
}
