#include "intra/bench.hpp"

#include <sys/utsname.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>
#include <sstream>
#include <thread>

#include "intra/error.hpp"
#include "intra/retrieval.hpp"
#include "json.hpp"

namespace intra {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

int argmax_token(const Mat& logits) {
    const auto row = logits.row(logits.rows() - 1);
    int best = 0;
    for (int t = 1; t < row.size(); ++t)
        if (row[t] > row[best]) best = t;
    return best;
}

void check_inputs(const BenchInputs& in) {
    require(in.model && in.chunks && in.pool, Errc::internal, "bench inputs are incomplete");
    require(in.chunks->size() == in.pool->M(), Errc::internal, "bench chunks do not match the pool");
    require(!in.question.empty(), Errc::data, "bench question is empty");
}

Mat encode_many(const BenchInputs& in, const std::vector<int>& idx) {
    const ModelWeights& w = *in.model;
    if (idx.empty()) return Mat(0, w.cfg.d);
    if (in.encoding == RagEncoding::joint) {
        std::vector<int> toks;
        for (int i : idx) {
            const auto& t = (*in.chunks)[static_cast<size_t>(i)].tokens;
            toks.insert(toks.end(), t.begin(), t.end());
        }
        return encode_chunk(w, toks);
    }
    std::vector<Mat> parts;
    Eigen::Index n = 0;
    for (int i : idx) {
        parts.push_back(encode_chunk(w, (*in.chunks)[static_cast<size_t>(i)].tokens));
        n += parts.back().rows();
    }
    Mat ctx(n, w.cfg.d);
    Eigen::Index r = 0;
    for (const auto& p : parts) {
        ctx.middleRows(r, p.rows()) = p;
        r += p.rows();
    }
    return ctx;
}

void fill_dispersion(BenchResult& r, const std::vector<double>& t) {
    r.ttft_ms_min = *std::min_element(t.begin(), t.end());
    r.ttft_ms_max = *std::max_element(t.begin(), t.end());
    r.ttft_ms_median = median(t);
    r.reps = static_cast<int>(t.size());
}

std::vector<Chunk> random_chunks(int M, int L_c, int vocab, uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> tok(4, vocab - 1);
    std::vector<Chunk> out(static_cast<size_t>(M));
    for (int i = 0; i < M; ++i) {
        out[static_cast<size_t>(i)].id = i;
        out[static_cast<size_t>(i)].tokens.resize(static_cast<size_t>(L_c));
        for (auto& t : out[static_cast<size_t>(i)].tokens) t = tok(rng);
    }
    return out;
}

}  // namespace

BenchMode parse_bench_mode(const std::string& s) {
    if (s == "full") return BenchMode::full;
    if (s == "rag") return BenchMode::rag;
    if (s == "intra") return BenchMode::intra;
    fail(Errc::config, "unknown bench mode '" + s + "' (expected full, rag or intra)");
}

const char* bench_mode_name(BenchMode m) {
    switch (m) {
        case BenchMode::full: return "full";
        case BenchMode::rag: return "rag";
        case BenchMode::intra: return "intra";
    }
    return "?";
}

std::vector<BenchMode> parse_bench_modes(const std::string& csv) {
    std::vector<BenchMode> out;
    std::stringstream ss(csv);
    std::string tok;
    while (std::getline(ss, tok, ','))
        if (!tok.empty()) out.push_back(parse_bench_mode(tok));
    require(!out.empty(), Errc::config, "no bench modes given");
    return out;
}

RagEncoding parse_rag_encoding(const std::string& s) {
    if (s == "joint") return RagEncoding::joint;
    if (s == "per_chunk") return RagEncoding::per_chunk;
    fail(Errc::config, "unknown rag encoding '" + s + "' (expected joint or per_chunk)");
}

void CostParams::validate() const {
    require(M >= 1 && L_c >= 1 && L_q >= 1 && L_g >= 1, Errc::config, "cost params M, L_c, L_q, L_g must be >= 1");
    require(k >= 0, Errc::config, "cost param k must be >= 0");
}

CostBreakdown cost_model(const CostParams& p, BenchMode mode) {
    p.validate();
    CostBreakdown c;
    const double ctx = p.L_q + p.k * p.L_c;
    switch (mode) {
        case BenchMode::full: {
            const double all = p.L_q + p.M * p.L_c;
            c.prefill = all * all;
            c.generation = p.L_g * (all + p.L_g);
            break;
        }
        case BenchMode::rag:
            c.pre_query = p.M * p.L_c * p.L_c;
            c.retrieval = std::sqrt(p.M) * p.L_q * p.L_c;
            c.prefill = ctx * ctx;
            c.generation = p.L_g * (ctx + p.L_g);
            break;
        case BenchMode::intra:
            c.pre_query = p.M * p.L_c * p.L_c;
            c.retrieval = std::sqrt(p.M) * p.L_q * p.L_c;
            c.prefill = p.L_q * ctx;
            c.generation = p.L_g * (ctx + p.L_g);
            break;
    }
    return c;
}

Mat bench_context(const BenchInputs& in, BenchMode mode) {
    check_inputs(in);
    switch (mode) {
        case BenchMode::intra: return gather_context(*in.pool, in.topk);
        case BenchMode::rag: return encode_many(in, in.topk);
        case BenchMode::full: {
            std::vector<int> all(in.pool->M());
            for (size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
            return encode_many(in, all);
        }
    }
    fail(Errc::internal, "unhandled bench mode");
}

int bench_first_token(const BenchInputs& in, BenchMode mode) {
    const Mat ctx = bench_context(in, mode);
    DecoderOptions opt;
    opt.last_logits_only = true;
    return argmax_token(decoder_forward(*in.model, embed_tokens(*in.model, in.question), ctx, opt).logits);
}

BenchResult measure_ttft(const BenchInputs& in, BenchMode mode, int reps, int warmup) {
    require(reps >= 3, Errc::config, "bench reps must be >= 3");
    require(warmup >= 0, Errc::config, "warmup must be >= 0");
    check_inputs(in);
    BenchResult r;
    r.mode = mode;
    r.k = static_cast<int>(in.topk.size());
    for (int i = 0; i < warmup; ++i) r.first_token = bench_first_token(in, mode);
    std::vector<double> t;
    for (int i = 0; i < reps; ++i) {
        const auto t0 = Clock::now();
        r.first_token = bench_first_token(in, mode);
        t.push_back(ms_since(t0));
    }
    fill_dispersion(r, t);
    return r;
}

BenchResult measure_throughput(const BenchInputs& in, BenchMode mode, int L_g, int reps, int warmup) {
    require(reps >= 3, Errc::config, "bench reps must be >= 3");
    require(L_g >= 1, Errc::config, "L_g must be >= 1");
    check_inputs(in);
    const ModelWeights& w = *in.model;
    const Mat ctx = bench_context(in, mode);
    DecoderOptions opt;
    opt.last_logits_only = true;
    auto run = [&] {
        std::vector<int> seq = in.question;
        int first = -1;
        const auto t0 = Clock::now();
        for (int s = 0; s < L_g; ++s) {
            const int tok = argmax_token(decoder_forward(w, embed_tokens(w, seq), ctx, opt).logits);
            if (first < 0) first = tok;
            seq.push_back(tok);
        }
        return std::pair<double, int>{ms_since(t0), first};
    };
    BenchResult r;
    r.mode = mode;
    r.k = static_cast<int>(in.topk.size());
    for (int i = 0; i < warmup; ++i) run();
    std::vector<double> t, tps;
    for (int i = 0; i < reps; ++i) {
        auto [ms, first] = run();
        r.first_token = first;
        t.push_back(ms);
        tps.push_back(L_g / (ms / 1000.0));
    }
    fill_dispersion(r, t);
    r.tps_median = median(tps);
    return r;
}

void SweepConfig::validate() const {
    require(axis == "k" || axis == "L_c", Errc::config, "sweep axis must be k or L_c");
    require(!values.empty(), Errc::config, "sweep values are empty");
    for (size_t i = 1; i < values.size(); ++i)
        require(values[i] > values[i - 1], Errc::config, "sweep values must be ascending");
    require(!modes.empty(), Errc::config, "no bench modes given");
    require(M >= 1 && L_c >= 1 && L_q >= 1 && k >= 0 && L_g >= 1, Errc::config, "bench sizes must be positive");
    require(reps >= 3, Errc::config, "bench reps must be >= 3");
    for (int v : values) {
        require(v >= (axis == "k" ? 0 : 1), Errc::config, "sweep value out of range");
        if (axis == "k") require(v <= M, Errc::config, "sweep k exceeds M");
    }
    if (axis == "L_c") require(k <= M, Errc::config, "k exceeds M");
}

std::vector<BenchResult> run_sweep(const ModelWeights& model, const SweepConfig& cfg) {
    cfg.validate();
    std::vector<BenchResult> rows;
    std::mt19937_64 rng(cfg.seed ^ 0x5bd1e995ULL);
    std::uniform_int_distribution<int> tok(4, model.cfg.vocab_size - 1);
    std::vector<int> question(static_cast<size_t>(cfg.L_q));
    for (auto& t : question) t = tok(rng);

    // Values sharing a chunk length share one pool. Within such a group the
    // repetitions are interleaved (rep r of every value and mode before rep r+1)
    // so slow drift in machine speed spreads evenly over the sweep.
    size_t g0 = 0;
    while (g0 < cfg.values.size()) {
        const auto Lc_of = [&](int v) { return cfg.axis == "L_c" ? v : cfg.L_c; };
        const int L_c = Lc_of(cfg.values[g0]);
        size_t g1 = g0 + 1;
        while (g1 < cfg.values.size() && Lc_of(cfg.values[g1]) == L_c) ++g1;
        const std::vector<Chunk> chunks = random_chunks(cfg.M, L_c, model.cfg.vocab_size, cfg.seed);
        const ChunkPool pool = build_pool(chunks, model);

        std::vector<BenchInputs> inputs;
        for (size_t i = g0; i < g1; ++i) {
            const int k = cfg.axis == "k" ? cfg.values[i] : cfg.k;
            BenchInputs in{&model, &chunks, &pool, question, {}, cfg.encoding};
            for (int j = 0; j < k; ++j) in.topk.push_back(j);
            inputs.push_back(std::move(in));
        }
        const size_t nm = cfg.modes.size();
        std::vector<std::vector<double>> times(inputs.size() * nm);
        std::vector<int> first(inputs.size() * nm, -1);
        for (int rep = -cfg.warmup; rep < cfg.reps; ++rep)
            for (size_t i = 0; i < inputs.size(); ++i)
                for (size_t m = 0; m < nm; ++m) {
                    const auto t0 = Clock::now();
                    first[i * nm + m] = bench_first_token(inputs[i], cfg.modes[m]);
                    if (rep >= 0) times[i * nm + m].push_back(ms_since(t0));
                }
        for (size_t i = 0; i < inputs.size(); ++i)
            for (size_t m = 0; m < nm; ++m) {
                BenchResult r;
                r.mode = cfg.modes[m];
                r.k = static_cast<int>(inputs[i].topk.size());
                r.first_token = first[i * nm + m];
                fill_dispersion(r, times[i * nm + m]);
                if (cfg.throughput)
                    r.tps_median = measure_throughput(inputs[i], r.mode, cfg.L_g, cfg.reps, cfg.warmup).tps_median;
                r.axis = cfg.axis;
                r.value = cfg.values[g0 + i];
                r.L_c = L_c;
                rows.push_back(r);
            }
        g0 = g1;
    }
    return rows;
}

std::string sweep_csv(const std::vector<BenchResult>& rows) {
    std::ostringstream os;
    os.precision(10);
    os << "mode,axis,value,ttft_ms_min,ttft_ms_median,ttft_ms_max,tps_median,reps\n";
    for (const auto& r : rows)
        os << bench_mode_name(r.mode) << ',' << r.axis << ',' << r.value << ',' << r.ttft_ms_min << ','
           << r.ttft_ms_median << ',' << r.ttft_ms_max << ',' << r.tps_median << ',' << r.reps << '\n';
    return os.str();
}

std::string sweep_sidecar_json(const SweepConfig& cfg, const ModelConfig& mc) {
    nlohmann::json j;
    auto modes = nlohmann::json::array();
    for (auto m : cfg.modes) modes.push_back(bench_mode_name(m));
    j["sweep"] = {{"axis", cfg.axis},   {"values", cfg.values}, {"modes", modes},
                  {"M", cfg.M},         {"L_c", cfg.L_c},       {"L_q", cfg.L_q},
                  {"k", cfg.k},         {"L_g", cfg.L_g},       {"reps", cfg.reps},
                  {"warmup", cfg.warmup}, {"rag_encoding", cfg.encoding == RagEncoding::joint ? "joint" : "per_chunk"}};
    j["seed"] = cfg.seed;
    j["model"] = {{"d", mc.d},         {"d_h", mc.d_h},     {"n_h", mc.n_h},
                  {"n_kv", mc.n_kv},   {"L_enc", mc.L_enc}, {"L_dec", mc.L_dec},
                  {"vocab_size", mc.vocab_size}};
    utsname u{};
    uname(&u);
    j["host"] = {{"sysname", u.sysname},
                 {"release", u.release},
                 {"machine", u.machine},
                 {"nodename", u.nodename},
                 {"hardware_concurrency", std::thread::hardware_concurrency()},
                 {"compiler", __VERSION__}};
    return j.dump(2) + "\n";
}

double measure_scoring_ms(const ChunkPool& pool, const Mat& queries, int group_rows, int threads, int reps,
                          int warmup) {
    require(reps >= 3, Errc::config, "bench reps must be >= 3");
    require(threads >= 1, Errc::config, "threads must be >= 1");
    ScoreOptions opt;
    opt.threads = threads;
    for (int i = 0; i < warmup; ++i) maxsim_table(queries, group_rows, pool.rows, pool.offsets, 1.0, false, opt);
    std::vector<double> t;
    for (int i = 0; i < reps; ++i) {
        const auto t0 = Clock::now();
        maxsim_table(queries, group_rows, pool.rows, pool.offsets, 1.0, false, opt);
        t.push_back(ms_since(t0));
    }
    return median(t);
}

double polyfit_r2(const std::vector<double>& x, const std::vector<double>& y, int degree) {
    require(x.size() == y.size() && x.size() > static_cast<size_t>(degree), Errc::data,
            "polyfit needs more points than the degree");
    const auto n = static_cast<Eigen::Index>(x.size());
    const double xs = std::max(1.0, *std::max_element(x.begin(), x.end()));
    Eigen::MatrixXd A(n, degree + 1);
    Eigen::VectorXd b(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        double p = 1.0;
        for (int d = 0; d <= degree; ++d) {
            A(i, d) = p;
            p *= x[static_cast<size_t>(i)] / xs;
        }
        b[i] = y[static_cast<size_t>(i)];
    }
    const Eigen::VectorXd coef = A.colPivHouseholderQr().solve(b);
    const double mean = b.mean();
    const double ss_tot = (b.array() - mean).square().sum();
    const double ss_res = (A * coef - b).squaredNorm();
    return ss_tot == 0.0 ? 1.0 : 1.0 - ss_res / ss_tot;
}

}  // namespace intra
