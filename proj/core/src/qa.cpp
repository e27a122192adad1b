#include "intra/qa.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "intra/error.hpp"
#include "json.hpp"

namespace intra {

namespace {

using nlohmann::json;

template <typename F>
void for_each_line(const std::string& path, F&& f) {
    std::ifstream in(path);
    if (!in) fail(Errc::io, "cannot open " + path);
    std::string line;
    int no = 0;
    while (std::getline(in, line)) {
        ++no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            f(json::parse(line));
        } catch (const json::exception& e) {
            fail(Errc::data, path + ":" + std::to_string(no) + ": " + e.what());
        }
    }
}

std::vector<int64_t> to_ids(const ChunkPool& pool, const std::vector<int>& idx) {
    std::vector<int64_t> out;
    out.reserve(idx.size());
    for (int i : idx) out.push_back(pool.ids[static_cast<size_t>(i)]);
    return out;
}

std::vector<int> head(const std::vector<int>& v, size_t n) { return {v.begin(), v.begin() + std::min(n, v.size())}; }

constexpr int kRankDepth = 20;
constexpr int kContextSize = 5;
constexpr int kRrfDepth = 100;

}  // namespace

// ---------------------------------------------------------------- data files

std::vector<QAExample> load_dataset(const std::string& path) {
    std::vector<QAExample> out;
    for_each_line(path, [&](const json& j) {
        QAExample ex;
        ex.id = j.at("id").get<int64_t>();
        ex.question = j.at("question").get<std::vector<int>>();
        ex.answer = j.at("answer").get<std::vector<int>>();
        ex.oracle = j.at("oracle_chunk_ids").get<std::vector<int64_t>>();
        require(!ex.question.empty(), Errc::data, "example " + std::to_string(ex.id) + " has an empty question");
        require(!ex.answer.empty(), Errc::data, "example " + std::to_string(ex.id) + " has an empty answer");
        require(!ex.oracle.empty(), Errc::data, "example " + std::to_string(ex.id) + " has no oracle chunks");
        out.push_back(std::move(ex));
    });
    return out;
}

std::string dataset_jsonl(const std::vector<QAExample>& data) {
    std::string s;
    for (const auto& ex : data) {
        json j;
        j["id"] = ex.id;
        j["question"] = ex.question;
        j["answer"] = ex.answer;
        j["oracle_chunk_ids"] = ex.oracle;
        s += j.dump() + "\n";
    }
    return s;
}

std::vector<Chunk> load_chunks(const std::string& path) {
    std::vector<Chunk> out;
    for_each_line(path, [&](const json& j) {
        out.push_back({j.at("chunk_id").get<int64_t>(), j.at("tokens").get<std::vector<int>>()});
    });
    return out;
}

std::string chunks_jsonl(const std::vector<Chunk>& chunks) {
    std::string s;
    for (const auto& c : chunks) s += json{{"chunk_id", c.id}, {"tokens", c.tokens}}.dump() + "\n";
    return s;
}

// ---------------------------------------------------------------- pipeline

std::vector<int> assemble_context(const SelectionSet& s_intra, const SelectionSet& s0, int n_intra) {
    std::vector<int> ctx = head(s_intra, static_cast<size_t>(n_intra));
    for (int c : s0) {
        if (std::find(ctx.begin(), ctx.end(), c) == ctx.end()) {
            ctx.push_back(c);
            break;
        }
    }
    return ctx;
}

AnswerTrace answer(const std::vector<int>& question, const ChunkPool& pool, const PooledIndex& pooled,
                   const RetrievalParams& params, const ModelWeights& model, const PipelineConfig& cfg) {
    require(cfg.n >= 0, Errc::config, "n must be >= 0");
    AnswerTrace t;
    t.s0 = initial_selection(question, pool, pooled, model, cfg.n0, cfg.initial).set;
    if (cfg.initial_only) {
        t.s_intra = head(t.s0, static_cast<size_t>(cfg.n));
    } else {
        const RetrievalParams p = cfg.R > 0 ? params.truncated(cfg.R) : params;
        t.s_intra = select_top_n(intra_scores(question, p, t.s0, pool, pooled, model, cfg.initial.score).s, cfg.n);
    }
    t.context = cfg.top5_only ? head(t.s_intra, kContextSize) : assemble_context(t.s_intra, t.s0);
    t.tokens = greedy_decode(model, question, gather_context(pool, t.context), cfg.max_len);
    return t;
}

// ---------------------------------------------------------------- metrics

int complete_evidence_recall(const std::vector<int64_t>& retrieved, const std::vector<int64_t>& oracle, int k) {
    require(!oracle.empty(), Errc::data, "empty oracle set");
    require(k >= 1, Errc::config, "recall cutoff must be >= 1");
    const size_t n = std::min(retrieved.size(), static_cast<size_t>(k));
    for (auto o : oracle)
        if (std::find(retrieved.begin(), retrieved.begin() + static_cast<std::ptrdiff_t>(n), o) ==
            retrieved.begin() + static_cast<std::ptrdiff_t>(n))
            return 0;
    return 1;
}

int exact_match(const std::vector<int>& pred, const std::vector<int>& gold) { return pred == gold ? 1 : 0; }

double token_f1(const std::vector<int>& pred, const std::vector<int>& gold) {
    if (pred.empty() || gold.empty()) return pred == gold ? 1.0 : 0.0;
    std::map<int, int> g;
    for (int t : gold) ++g[t];
    int common = 0;
    for (int t : pred) {
        auto it = g.find(t);
        if (it != g.end() && it->second > 0) {
            --it->second;
            ++common;
        }
    }
    if (common == 0) return 0.0;
    const double p = static_cast<double>(common) / pred.size(), r = static_cast<double>(common) / gold.size();
    return 2.0 * p * r / (p + r);
}

double gap_closure(double em_intra, double em_random, double em_complete) {
    require(em_complete != em_random, Errc::data, "gap closure undefined: complete and random EM are equal");
    return 100.0 * (em_intra - em_random) / (em_complete - em_random);
}

double ci_halfwidth(double p, size_t n) {
    if (n == 0) return 0.0;
    return 1.96 * std::sqrt(p * (1.0 - p) / static_cast<double>(n));
}

Mode parse_mode(const std::string& s) {
    static const std::map<std::string, Mode> m{{"initial", Mode::initial},   {"rerank", Mode::rerank},
                                               {"intra", Mode::intra},       {"random", Mode::random},
                                               {"complete", Mode::complete}, {"tfidf", Mode::tfidf},
                                               {"bm25", Mode::bm25},         {"rrf", Mode::rrf},
                                               {"encoder_maxsim", Mode::encoder_maxsim}};
    auto it = m.find(s);
    if (it == m.end()) fail(Errc::config, "unknown eval mode '" + s + "'");
    return it->second;
}

const char* mode_name(Mode m) {
    switch (m) {
        case Mode::initial: return "initial";
        case Mode::rerank: return "rerank";
        case Mode::intra: return "intra";
        case Mode::random: return "random";
        case Mode::complete: return "complete";
        case Mode::tfidf: return "tfidf";
        case Mode::bm25: return "bm25";
        case Mode::rrf: return "rrf";
        case Mode::encoder_maxsim: return "encoder_maxsim";
    }
    return "?";
}

std::vector<Mode> parse_modes(const std::string& csv) {
    std::vector<Mode> out;
    std::stringstream ss(csv);
    std::string tok;
    while (std::getline(ss, tok, ','))
        if (!tok.empty()) out.push_back(parse_mode(tok));
    require(!out.empty(), Errc::config, "no eval modes given");
    return out;
}

// ---------------------------------------------------------------- evaluate

const ModeReport* EvalReport::find(Mode m) const {
    for (const auto& r : modes)
        if (r.mode == m) return &r;
    return nullptr;
}

std::string EvalReport::to_json() const {
    json j;
    j["dataset"] = dataset;
    j["seed"] = seed;
    auto arr = json::array();
    for (const auto& r : modes) {
        json m{{"mode", mode_name(r.mode)},
               {"n", r.n},
               {"recall@5", r.recall5},
               {"recall@10", r.recall10},
               {"recall@20", r.recall20},
               {"recall@5_ci95", ci_halfwidth(r.recall5, r.n)},
               {"recall@10_ci95", ci_halfwidth(r.recall10, r.n)},
               {"recall@20_ci95", ci_halfwidth(r.recall20, r.n)}};
        if (r.generated) {
            m["em"] = r.em;
            m["em_ci95"] = ci_halfwidth(r.em, r.n);
            m["f1"] = r.f1;
        }
        arr.push_back(std::move(m));
    }
    j["modes"] = std::move(arr);
    j["gap_closure"] = gap_closure ? json(*gap_closure) : json(nullptr);
    return j.dump(2) + "\n";
}

std::string EvalReport::to_csv() const {
    std::ostringstream os;
    os.precision(10);
    os << "mode,n,recall5,recall10,recall20,em,f1,recall5_ci95,em_ci95\n";
    for (const auto& r : modes) {
        os << mode_name(r.mode) << ',' << r.n << ',' << r.recall5 << ',' << r.recall10 << ',' << r.recall20 << ',';
        if (r.generated)
            os << r.em << ',' << r.f1;
        else
            os << ',';
        os << ',' << ci_halfwidth(r.recall5, r.n) << ',';
        if (r.generated) os << ci_halfwidth(r.em, r.n);
        os << '\n';
    }
    return os.str();
}

EvalReport evaluate(const std::vector<QAExample>& data, const ChunkPool& pool, const PooledIndex& pooled,
                    const RetrievalParams& params, const ModelWeights& model, const EvalConfig& cfg,
                    const std::vector<Chunk>& chunks) {
    require(!data.empty(), Errc::data, "evaluation set is empty");
    require(!cfg.modes.empty(), Errc::config, "no eval modes given");
    const PipelineConfig& pc = cfg.pipeline;
    auto has = [&](Mode m) { return std::find(cfg.modes.begin(), cfg.modes.end(), m) != cfg.modes.end(); };
    const bool lexical = has(Mode::tfidf) || has(Mode::bm25) || has(Mode::rrf);
    LexicalIndex lex;
    if (lexical) {
        require(chunks.size() == pool.M(), Errc::config, "lexical baselines need the chunk file");
        std::vector<std::vector<int>> docs(pool.M());
        for (const auto& c : chunks) docs[pool.index_of(c.id)] = c.tokens;
        lex = build_lexical(docs);
    }
    const bool scored = (has(Mode::rerank) || has(Mode::intra)) && !pc.initial_only;
    const RetrievalParams p = scored && pc.R > 0 ? params.truncated(pc.R) : params;
    InitialOptions init = pc.initial;
    init.score.threads = cfg.threads;

    struct Acc {
        double r5 = 0, r10 = 0, r20 = 0, em = 0, f1 = 0;
    };
    std::vector<Acc> acc(cfg.modes.size());

    for (const auto& ex : data) {
        std::vector<int> oracle_idx;
        for (auto id : ex.oracle) oracle_idx.push_back(static_cast<int>(pool.index_of(id)));

        const bool need_initial = has(Mode::initial) || has(Mode::rerank) || has(Mode::intra);
        ScoreVector s0_scores;
        SelectionSet s0, initial_rank;
        if (need_initial) {
            s0_scores = initial_scores(ex.question, pool, pooled, model, init);
            s0 = select_top_n(s0_scores.s, pc.n0);
            initial_rank = select_top_n(s0_scores.s, std::max(kRankDepth, pc.n0));
        }
        ScoreVector si;
        SelectionSet intra_rank;
        if (has(Mode::rerank) || has(Mode::intra)) {
            if (pc.initial_only) {
                si = s0_scores;
                intra_rank = head(s0, static_cast<size_t>(kRankDepth));
            } else {
                si = intra_scores(ex.question, p, s0, pool, pooled, model, init.score);
                intra_rank = select_top_n(si.s, std::max(kRankDepth, pc.n));
            }
        }

        for (size_t mi = 0; mi < cfg.modes.size(); ++mi) {
            const Mode m = cfg.modes[mi];
            std::vector<int> ranking, context;
            switch (m) {
                case Mode::initial:
                    ranking = initial_rank;
                    context = head(s0, kContextSize);
                    break;
                case Mode::rerank: {
                    // Reordered S₀, then the rest of the initial ranking.
                    ranking = s0.empty() ? s0 : rerank(s0, si);
                    for (size_t k = s0.size(); k < initial_rank.size(); ++k) ranking.push_back(initial_rank[k]);
                    context = head(ranking, std::min<size_t>(kContextSize, s0.size()));
                    break;
                }
                case Mode::intra: {
                    ranking = intra_rank;
                    const auto top = head(intra_rank, static_cast<size_t>(pc.n));
                    context = pc.top5_only ? head(top, kContextSize) : assemble_context(top, s0);
                    break;
                }
                case Mode::random: {
                    std::vector<int> pool_idx;
                    for (int i = 0; i < static_cast<int>(pool.M()); ++i)
                        if (std::find(oracle_idx.begin(), oracle_idx.end(), i) == oracle_idx.end()) pool_idx.push_back(i);
                    std::mt19937_64 rng(cfg.seed * 1000003ULL + static_cast<uint64_t>(ex.id));
                    std::shuffle(pool_idx.begin(), pool_idx.end(), rng);
                    context = head(pool_idx, kContextSize);
                    ranking = context;
                    break;
                }
                case Mode::complete: {
                    std::vector<int64_t> ids = ex.oracle;
                    std::sort(ids.begin(), ids.end());
                    for (auto id : ids) context.push_back(static_cast<int>(pool.index_of(id)));
                    ranking = context;
                    break;
                }
                case Mode::tfidf:
                    ranking = tfidf_rank(ex.question, lex, kRankDepth);
                    context = head(ranking, kContextSize);
                    break;
                case Mode::bm25:
                    ranking = bm25_rank(ex.question, lex, kRankDepth);
                    context = head(ranking, kContextSize);
                    break;
                case Mode::rrf:
                    ranking = rrf_fuse({bm25_rank(ex.question, lex, kRrfDepth),
                                        encoder_maxsim_rank(ex.question, pool, pooled, model, kRrfDepth)},
                                       60, kRankDepth);
                    context = head(ranking, kContextSize);
                    break;
                case Mode::encoder_maxsim:
                    ranking = encoder_maxsim_rank(ex.question, pool, pooled, model, kRankDepth);
                    context = head(ranking, kContextSize);
                    break;
            }
            const auto ids = to_ids(pool, ranking);
            acc[mi].r5 += complete_evidence_recall(ids, ex.oracle, 5);
            acc[mi].r10 += complete_evidence_recall(ids, ex.oracle, 10);
            acc[mi].r20 += complete_evidence_recall(ids, ex.oracle, 20);
            if (cfg.generate) {
                const auto pred = greedy_decode(model, ex.question, gather_context(pool, context), pc.max_len);
                acc[mi].em += exact_match(pred, ex.answer);
                acc[mi].f1 += token_f1(pred, ex.answer);
            }
        }
    }

    EvalReport rep;
    rep.seed = cfg.seed;
    const double n = static_cast<double>(data.size());
    for (size_t mi = 0; mi < cfg.modes.size(); ++mi) {
        ModeReport r;
        r.mode = cfg.modes[mi];
        r.n = data.size();
        r.recall5 = acc[mi].r5 / n;
        r.recall10 = acc[mi].r10 / n;
        r.recall20 = acc[mi].r20 / n;
        r.generated = cfg.generate;
        r.em = acc[mi].em / n;
        r.f1 = acc[mi].f1 / n;
        rep.modes.push_back(r);
    }
    const auto *ri = rep.find(Mode::intra), *rr = rep.find(Mode::random), *rc = rep.find(Mode::complete);
    if (cfg.generate && ri && rr && rc && rc->em != rr->em) rep.gap_closure = gap_closure(ri->em, rr->em, rc->em);
    return rep;
}

}  // namespace intra
