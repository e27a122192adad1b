#include "intra/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "intra/error.hpp"

namespace intra {

double LexicalIndex::idf_tfidf(int term) const {
    auto it = df.find(term);
    const double n = it == df.end() ? 0.0 : it->second;
    return std::log(static_cast<double>(M) / (1.0 + n));
}

double LexicalIndex::idf_bm25(int term) const {
    auto it = df.find(term);
    const double n = it == df.end() ? 0.0 : it->second;
    return std::log((static_cast<double>(M) - n + 0.5) / (n + 0.5) + 1.0);
}

LexicalIndex build_lexical(const std::vector<std::vector<int>>& docs) {
    LexicalIndex idx;
    idx.M = docs.size();
    idx.tf.resize(docs.size());
    idx.length.resize(docs.size());
    double total = 0;
    for (size_t i = 0; i < docs.size(); ++i) {
        for (int t : docs[i]) ++idx.tf[i][t];
        for (const auto& [t, n] : idx.tf[i]) ++idx.df[t];
        idx.length[i] = static_cast<int>(docs[i].size());
        total += static_cast<double>(docs[i].size());
    }
    idx.avgdl = docs.empty() ? 0.0 : total / static_cast<double>(docs.size());
    idx.tfidf_norm.resize(docs.size());
    for (size_t i = 0; i < docs.size(); ++i) {
        double s = 0;
        for (const auto& [t, n] : idx.tf[i]) {
            const double w = n * idx.idf_tfidf(t);
            s += w * w;
        }
        idx.tfidf_norm[i] = std::sqrt(s);
    }
    return idx;
}

std::vector<double> tfidf_scores(const std::vector<int>& question, const LexicalIndex& index) {
    std::map<int, int> qtf;
    for (int t : question) ++qtf[t];
    double qn = 0;
    for (const auto& [t, n] : qtf) {
        const double w = n * index.idf_tfidf(t);
        qn += w * w;
    }
    qn = std::sqrt(qn);
    std::vector<double> s(index.M, 0.0);
    if (qn == 0.0) return s;
    for (size_t i = 0; i < index.M; ++i) {
        if (index.tfidf_norm[i] == 0.0) continue;
        double dot = 0;
        for (const auto& [t, n] : qtf) {
            auto it = index.tf[i].find(t);
            if (it == index.tf[i].end()) continue;
            const double idf = index.idf_tfidf(t);
            dot += (n * idf) * (it->second * idf);
        }
        s[i] = dot / (qn * index.tfidf_norm[i]);
    }
    return s;
}

SelectionSet tfidf_rank(const std::vector<int>& question, const LexicalIndex& index, int k) {
    return select_top_n(tfidf_scores(question, index), k);
}

std::vector<double> bm25_scores(const std::vector<int>& question, const LexicalIndex& index, double k1, double b) {
    const std::set<int> terms(question.begin(), question.end());
    std::vector<double> s(index.M, 0.0);
    for (size_t i = 0; i < index.M; ++i) {
        const double norm = k1 * (1.0 - b + b * index.length[i] / index.avgdl);
        for (int t : terms) {
            auto it = index.tf[i].find(t);
            if (it == index.tf[i].end()) continue;
            const double f = it->second;
            s[i] += index.idf_bm25(t) * f * (k1 + 1.0) / (f + norm);
        }
    }
    return s;
}

SelectionSet bm25_rank(const std::vector<int>& question, const LexicalIndex& index, int k, double k1, double b) {
    return select_top_n(bm25_scores(question, index, k1, b), k);
}

std::vector<std::pair<int, double>> rrf_scores(const std::vector<SelectionSet>& rankings, int k_rrf) {
    require(!rankings.empty(), Errc::config, "rrf_fuse needs at least one ranking");
    require(k_rrf >= 0, Errc::config, "k_rrf must be >= 0");
    std::map<int, double> acc;
    for (const auto& r : rankings)
        for (size_t pos = 0; pos < r.size(); ++pos) acc[r[pos]] += 1.0 / (k_rrf + static_cast<double>(pos + 1));
    return {acc.begin(), acc.end()};
}

SelectionSet rrf_fuse(const std::vector<SelectionSet>& rankings, int k_rrf, int k) {
    require(k >= 0, Errc::config, "top-k size must be >= 0");
    auto fused = rrf_scores(rankings, k_rrf);
    std::stable_sort(fused.begin(), fused.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    SelectionSet out;
    for (size_t i = 0; i < fused.size() && static_cast<int>(out.size()) < k; ++i) out.push_back(fused[i].first);
    return out;
}

SelectionSet encoder_maxsim_rank(const std::vector<int>& question, const ChunkPool& pool, const PooledIndex& pooled,
                                 const ModelWeights& model, int k) {
    return initial_selection(question, pool, pooled, model, k).set;
}

}  // namespace intra
