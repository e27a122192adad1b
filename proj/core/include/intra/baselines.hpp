#pragma once

#include <unordered_map>
#include <vector>

#include "intra/retrieval.hpp"

namespace intra {

// Term statistics over token-id documents (each id is a term).
struct LexicalIndex {
    size_t M = 0;
    double avgdl = 0;
    std::vector<std::unordered_map<int, int>> tf;
    std::vector<int> length;
    std::unordered_map<int, int> df;
    std::vector<double> tfidf_norm;  // ‖tf·idf‖ per document

    double idf_tfidf(int term) const;  // ln(M / (1 + df))
    double idf_bm25(int term) const;   // ln((M − df + 0.5)/(df + 0.5) + 1)
};

LexicalIndex build_lexical(const std::vector<std::vector<int>>& docs);

std::vector<double> tfidf_scores(const std::vector<int>& question, const LexicalIndex& index);
SelectionSet tfidf_rank(const std::vector<int>& question, const LexicalIndex& index, int k);

std::vector<double> bm25_scores(const std::vector<int>& question, const LexicalIndex& index, double k1 = 1.2,
                                double b = 0.75);
SelectionSet bm25_rank(const std::vector<int>& question, const LexicalIndex& index, int k, double k1 = 1.2,
                       double b = 0.75);

// Σ_r 1/(k_rrf + rank_r(c)) with 1-based ranks; absent chunks get nothing.
std::vector<std::pair<int, double>> rrf_scores(const std::vector<SelectionSet>& rankings, int k_rrf = 60);
SelectionSet rrf_fuse(const std::vector<SelectionSet>& rankings, int k_rrf, int k);

// initial_selection with n₀ = k.
SelectionSet encoder_maxsim_rank(const std::vector<int>& question, const ChunkPool& pool, const PooledIndex& pooled,
                                 const ModelWeights& model, int k);

}  // namespace intra
