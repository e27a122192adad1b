#include "intra/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>
#include <random>
#include <thread>

#include "intra/binio.hpp"
#include "intra/error.hpp"
#include "json.hpp"

namespace intra {

namespace {

constexpr char kParamsMagic[8] = {'I', 'N', 'T', 'R', 'A', 'R', 'P', '1'};
constexpr Eigen::Index kRowBlock = 4096;

// Contiguous runs of list that share one GEMM. Fixed before any thread split so
// the arithmetic does not depend on the thread count.
std::vector<size_t> block_starts(const std::vector<int>& list, const std::vector<size_t>& off) {
    std::vector<size_t> starts;
    size_t i = 0;
    while (i < list.size()) {
        starts.push_back(i);
        size_t j = i + 1;
        while (j < list.size() && list[j] == list[j - 1] + 1 &&
               off[list[j] + 1] - off[list[i]] <= static_cast<size_t>(kRowBlock))
            ++j;
        i = j;
    }
    starts.push_back(list.size());
    return starts;
}

// Scores blocks [b, e) of the run list into the table.
void score_blocks(const Mat& q, int group_rows, const Mat& rows, const std::vector<size_t>& off, double scale,
                  bool want_arg, const std::vector<int>& list, const std::vector<size_t>& starts, size_t b, size_t e,
                  MaxSimTable& t) {
    const Eigen::Index nq = q.rows();
    const size_t M = off.size() - 1;
    for (size_t blk = b; blk < e; ++blk) {
        const size_t i = starts[blk], j = starts[blk + 1];
        const size_t r0 = off[list[i]], r1 = off[list[j - 1] + 1];
        const Mat s = q * rows.middleRows(static_cast<Eigen::Index>(r0), static_cast<Eigen::Index>(r1 - r0)).transpose();
        for (size_t k = i; k < j; ++k) {
            const int c = list[k];
            const auto c0 = static_cast<Eigen::Index>(off[c] - r0), c1 = static_cast<Eigen::Index>(off[c + 1] - r0);
            for (Eigen::Index r = 0; r < nq; ++r) {
                Eigen::Index best = c0;
                double mx = s(r, c0);
                for (Eigen::Index col = c0 + 1; col < c1; ++col)
                    if (s(r, col) > mx) {
                        mx = s(r, col);
                        best = col;
                    }
                t.ms(r / group_rows, c) += mx * scale;
                if (want_arg) t.arg[static_cast<size_t>(r) * M + c] = static_cast<int32_t>(best + static_cast<Eigen::Index>(r0));
            }
        }
    }
}

}  // namespace

// ---------------------------------------------------------------- params

RetrievalParams RetrievalParams::truncated(int r) const {
    require(r >= 1 && r <= R(), Errc::config, "retrieval token count must be in [1, " + std::to_string(R()) + "]");
    return {rho.topRows(r), alpha};
}

RetrievalParams init_params(const ModelConfig& cfg, int R, uint64_t seed, double rho_sigma) {
    require(R >= 1, Errc::config, "R must be >= 1");
    RetrievalParams p;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0.0, rho_sigma);
    p.rho.resize(R, cfg.d);
    for (Eigen::Index i = 0; i < p.rho.size(); ++i) p.rho.data()[i] = nd(rng);
    p.alpha = Mat::Constant(cfg.L_dec, cfg.n_h, 1.0 / (cfg.L_dec * cfg.n_h));
    return p;
}

void validate_params(const RetrievalParams& p, const ModelConfig& cfg) {
    require(p.R() >= 1, Errc::config, "retrieval params have no retrieval tokens (R = 0)");
    require(p.rho.cols() == cfg.d, Errc::data, "retrieval token width does not match model d");
    require(p.alpha.rows() == cfg.L_dec && p.alpha.cols() == cfg.n_h, Errc::data,
            "alpha shape does not match L_dec × n_h");
    require(p.rho.allFinite() && p.alpha.allFinite(), Errc::non_finite, "retrieval params are not finite");
}

void save_params(const RetrievalParams& p, const std::string& path) {
    ByteWriter out;
    out.put_bytes(kParamsMagic, 8);
    for (auto v : {p.rho.rows(), p.rho.cols(), p.alpha.rows(), p.alpha.cols()}) out.put<uint32_t>(static_cast<uint32_t>(v));
    out.put_bytes(p.rho.data(), sizeof(double) * p.rho.size());
    out.put_bytes(p.alpha.data(), sizeof(double) * p.alpha.size());
    write_file_atomic(path, out.bytes().data(), out.size());
}

RetrievalParams load_params(const std::string& path) {
    ByteReader in(read_file(path));
    char magic[8];
    in.get_bytes(magic, 8);
    if (std::memcmp(magic, kParamsMagic, 8) != 0) fail(Errc::bad_magic, "bad magic in params file " + path);
    const auto R = in.get<uint32_t>(), d = in.get<uint32_t>(), L = in.get<uint32_t>(), H = in.get<uint32_t>();
    require(R >= 1 && d >= 1 && L >= 1 && H >= 1, Errc::data, "params header has a zero dimension");
    if ((static_cast<uint64_t>(R) * d + static_cast<uint64_t>(L) * H) * sizeof(double) > in.size() - in.pos())
        fail(Errc::truncated, "params file " + path + " is truncated");
    RetrievalParams p;
    p.rho.resize(R, d);
    p.alpha.resize(L, H);
    in.get_bytes(p.rho.data(), sizeof(double) * p.rho.size());
    in.get_bytes(p.alpha.data(), sizeof(double) * p.alpha.size());
    return p;
}

uint64_t params_hash(const RetrievalParams& p) {
    uint32_t dims[4] = {static_cast<uint32_t>(p.rho.rows()), static_cast<uint32_t>(p.rho.cols()),
                        static_cast<uint32_t>(p.alpha.rows()), static_cast<uint32_t>(p.alpha.cols())};
    uint64_t h = fnv1a(dims, sizeof dims);
    h = fnv1a(p.rho.data(), sizeof(double) * p.rho.size(), h);
    return fnv1a(p.alpha.data(), sizeof(double) * p.alpha.size(), h);
}

const char* stage_name(Stage s) { return s == Stage::initial ? "initial" : "intra"; }

// ---------------------------------------------------------------- scoring

double maxsim(const Mat& u, const Mat& v, double scale) {
    require(u.rows() >= 1 && v.rows() >= 1, Errc::data, "maxsim: empty input");
    require(u.cols() == v.cols(), Errc::data, "maxsim: width mismatch");
    const Mat s = u * v.transpose();
    double total = 0.0;
    for (Eigen::Index a = 0; a < s.rows(); ++a) total += s.row(a).maxCoeff() * scale;
    return total;
}

MaxSimTable maxsim_table(const Mat& queries, int group_rows, const Mat& rows, const std::vector<size_t>& offsets,
                         double scale, bool want_arg, const ScoreOptions& opt) {
    require(group_rows >= 1 && queries.rows() % group_rows == 0, Errc::internal,
            "maxsim_table: query rows must split into whole groups");
    require(queries.cols() == rows.cols(), Errc::data, "maxsim_table: width mismatch");
    require(!offsets.empty(), Errc::internal, "maxsim_table: missing offsets");
    const size_t M = offsets.size() - 1;
    MaxSimTable t;
    t.ms = Mat::Zero(queries.rows() / group_rows, static_cast<Eigen::Index>(M));
    if (want_arg) t.arg.assign(static_cast<size_t>(queries.rows()) * M, -1);

    std::vector<int> list;
    if (opt.candidates) {
        list = *opt.candidates;
        std::sort(list.begin(), list.end());
        list.erase(std::unique(list.begin(), list.end()), list.end());
        for (int c : list) require(c >= 0 && static_cast<size_t>(c) < M, Errc::data, "candidate chunk out of range");
    } else {
        list.resize(M);
        std::iota(list.begin(), list.end(), 0);
    }
    const auto starts = block_starts(list, offsets);
    const size_t n = starts.size() - 1;
    const int threads = std::max(1, std::min<int>(opt.threads, static_cast<int>(n)));
    if (threads == 1) {
        score_blocks(queries, group_rows, rows, offsets, scale, want_arg, list, starts, 0, n, t);
    } else {
        std::vector<std::thread> pool;
        for (int k = 0; k < threads; ++k) {
            const size_t b = n * k / threads, e = n * (k + 1) / threads;
            pool.emplace_back(
                [&, b, e] { score_blocks(queries, group_rows, rows, offsets, scale, want_arg, list, starts, b, e, t); });
        }
        for (auto& th : pool) th.join();
    }
    return t;
}

SelectionSet select_top_n(const std::vector<double>& scores, int n) {
    std::vector<int> all(scores.size());
    std::iota(all.begin(), all.end(), 0);
    return select_top_n_among(scores, all, n);
}

SelectionSet select_top_n_among(const std::vector<double>& scores, const std::vector<int>& candidates, int n) {
    require(n >= 0, Errc::config, "top-n size must be >= 0");
    SelectionSet idx = candidates;
    const size_t k = std::min(static_cast<size_t>(n), idx.size());
    auto before = [&](int a, int b) { return scores[a] > scores[b] || (scores[a] == scores[b] && a < b); };
    std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(), before);
    idx.resize(k);
    return idx;
}

SelectionSet rerank(const SelectionSet& s0, const ScoreVector& scores) {
    SelectionSet out = s0;
    std::stable_sort(out.begin(), out.end(), [&](int a, int b) { return scores.s[a] > scores.s[b]; });
    return out;
}

Mat question_keys(const ModelWeights& model, const std::vector<int>& question) {
    require(!question.empty(), Errc::data, "empty question");
    return rms_norm_rows(encode(model, question), model.cfg.rmsnorm_eps);
}

ScoreVector initial_scores(const std::vector<int>& question, const ChunkPool& pool, const PooledIndex& pooled,
                           const ModelWeights& model, const InitialOptions& opt) {
    const Mat kx = question_keys(model, question);
    const Mat& rows = opt.use_full_rows ? pool.rows : pooled.rows;
    const auto& off = opt.use_full_rows ? pool.offsets : pooled.offsets;
    ScoreVector sv;
    sv.stage = Stage::initial;
    const size_t M = off.size() - 1;
    if (opt.cosine) {
        const Eigen::RowVectorXd qm = kx.colwise().mean();
        sv.s.assign(M, 0.0);
        for (size_t i = 0; i < M; ++i) {
            const Eigen::RowVectorXd cm =
                rows.middleRows(static_cast<Eigen::Index>(off[i]), static_cast<Eigen::Index>(off[i + 1] - off[i]))
                    .colwise()
                    .mean();
            const double den = qm.norm() * cm.norm();
            sv.s[i] = den > 0.0 ? qm.dot(cm) / den : 0.0;
        }
        return sv;
    }
    const auto t = maxsim_table(kx, static_cast<int>(kx.rows()), rows, off, model.cfg.attn_scale(), false, opt.score);
    sv.s.assign(t.ms.data(), t.ms.data() + M);
    return sv;
}

Selection initial_selection(const std::vector<int>& question, const ChunkPool& pool, const PooledIndex& pooled,
                            const ModelWeights& model, int n0, const InitialOptions& opt) {
    require(n0 >= 0, Errc::config, "n0 must be >= 0");
    Selection sel;
    sel.scores = initial_scores(question, pool, pooled, model, opt);
    sel.set = opt.score.candidates ? select_top_n_among(sel.scores.s, *opt.score.candidates, n0)
                                   : select_top_n(sel.scores.s, n0);
    return sel;
}

Mat gather_context(const ChunkPool& pool, const std::vector<int>& selection) {
    size_t n = 0;
    for (int i : selection) {
        require(i >= 0 && static_cast<size_t>(i) < pool.M(), Errc::data, "selected chunk out of range");
        n += pool.length(static_cast<size_t>(i));
    }
    Mat ctx(static_cast<Eigen::Index>(n), pool.d);
    Eigen::Index r = 0;
    for (int i : selection) {
        const auto len = static_cast<Eigen::Index>(pool.length(static_cast<size_t>(i)));
        ctx.middleRows(r, len) = pool.chunk_rows(static_cast<size_t>(i));
        r += len;
    }
    return ctx;
}

Mat retrieval_input(const ModelWeights& model, const std::vector<int>& question, const RetrievalParams& params) {
    require(params.R() >= 1, Errc::config, "no retrieval positions (R = 0)");
    require(params.rho.cols() == model.cfg.d, Errc::data, "retrieval token width does not match model d");
    require(!question.empty(), Errc::data, "empty question");
    const Mat q = embed_tokens(model, question);
    Mat x(q.rows() + params.rho.rows(), model.cfg.d);
    x << q, params.rho;
    return x;
}

IntraPass intra_pass(const std::vector<int>& question, const RetrievalParams& params, const SelectionSet& s0,
                     const ChunkPool& pool, const PooledIndex& pooled, const ModelWeights& model, bool record,
                     const ScoreOptions& opt) {
    validate_params(params, model.cfg);
    const ModelConfig& c = model.cfg;
    IntraPass out;
    const Mat x = retrieval_input(model, question, params);
    const int Lq = static_cast<int>(question.size()), R = params.R();
    out.positions.resize(R);
    std::iota(out.positions.begin(), out.positions.end(), Lq);
    DecoderOptions dopt;
    dopt.expose = out.positions;
    dopt.logits = false;
    if (record) out.tape = std::make_unique<DecoderTape>();
    auto res = decoder_forward(model, x, gather_context(pool, s0), dopt, out.tape.get());
    out.queries = std::move(res.exposed);
    out.table = maxsim_table(out.queries.rows, R, pooled.rows, pooled.offsets, c.attn_scale(), record, opt);
    const size_t M = pooled.M();
    out.scores.stage = Stage::intra;
    out.scores.s.assign(M, 0.0);
    for (Eigen::Index g = 0; g < out.table.ms.rows(); ++g) {
        const double a = params.alpha.data()[g];
        for (size_t i = 0; i < M; ++i) out.scores.s[i] += a * out.table.ms(g, static_cast<Eigen::Index>(i));
    }
    return out;
}

ScoreVector intra_scores(const std::vector<int>& question, const RetrievalParams& params, const SelectionSet& s0,
                         const ChunkPool& pool, const PooledIndex& pooled, const ModelWeights& model,
                         const ScoreOptions& opt) {
    return intra_pass(question, params, s0, pool, pooled, model, false, opt).scores;
}

std::string ranking_json(int64_t query_id, Stage stage, const SelectionSet& top, const ScoreVector& scores,
                         const ChunkPool& pool, const std::string& params_hash_hex) {
    nlohmann::json j;
    j["query_id"] = query_id;
    j["stage"] = stage_name(stage);
    auto arr = nlohmann::json::array();
    for (int i : top) arr.push_back({{"chunk_id", pool.ids[static_cast<size_t>(i)]}, {"score", scores.s[static_cast<size_t>(i)]}});
    j["top"] = std::move(arr);
    j["params_hash"] = params_hash_hex;
    return j.dump();
}

}  // namespace intra
