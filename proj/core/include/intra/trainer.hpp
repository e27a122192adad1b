#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "intra/retrieval.hpp"

namespace intra {

struct TrainConfig {
    int steps = 500;
    double lr = 3e-3;
    int warmup = 20;
    int batch = 16;
    uint64_t seed = 0;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8, weight_decay = 0.0;
    int n0 = 8;  // S₀ size during training

    void validate() const;
    double lr_at(int step) const;  // linear warmup, then constant
};

struct GradReport {
    Mat d_rho;
    Mat d_alpha;
    double loss = 0;
};

// Question plus oracle pool indices; s0 is cached because it depends only on frozen weights.
struct TrainExample {
    std::vector<int> question;
    std::vector<int> oracle;
    SelectionSet s0;
};

// −(1/|O|) Σ_{j∈O} log softmax(s)_j, with oracle given as score indices.
double retrieval_loss(const std::vector<double>& scores, const std::vector<int>& oracle);
// Same, oracle given as chunk ids of the pool.
double retrieval_loss(const ScoreVector& scores, const std::vector<int64_t>& oracle_ids, const ChunkPool& pool);
// dL/ds = softmax(s) − t, t uniform over the oracle.
std::vector<double> retrieval_loss_grad(const std::vector<double>& scores, const std::vector<int>& oracle);

GradReport grad_retrieval_params(const TrainExample& ex, const RetrievalParams& params, const ChunkPool& pool,
                                 const PooledIndex& pooled, const ModelWeights& model);

// Loss with every MaxSim argmax pinned to the given table (row-major query_row × M).
double loss_fixed_argmax(const TrainExample& ex, const RetrievalParams& params, const ChunkPool& pool,
                         const PooledIndex& pooled, const ModelWeights& model, const std::vector<int32_t>& arg);

// Max over coords of |fd − g| / (max(|fd|, |g|) + 1e-12) for central differences.
double fd_max_rel_error(const std::function<double(const Mat&)>& loss, const Mat& theta, const Mat& grad,
                        const std::vector<Eigen::Index>& coords, double eps);

struct FiniteDiffReport {
    double alpha_max_rel = 0;
    double rho_max_rel = 0;
    int alpha_coords = 0;
    int rho_coords = 0;
};
// All α coordinates at eps_alpha; n_rho sampled ρ coordinates at eps_rho.
FiniteDiffReport finite_diff_check(const TrainExample& ex, const RetrievalParams& params, const ChunkPool& pool,
                                   const PooledIndex& pooled, const ModelWeights& model, double eps_alpha = 1e-4,
                                   double eps_rho = 1e-3, int n_rho = 32, uint64_t seed = 0);

std::vector<TrainExample> prepare_examples(const std::vector<std::vector<int>>& questions,
                                           const std::vector<std::vector<int64_t>>& oracle_ids,
                                           const ChunkPool& pool, const PooledIndex& pooled,
                                           const ModelWeights& model, int n0);

struct TrainHistory {
    std::vector<double> loss;
    std::vector<double> lr;
};
struct TrainResult {
    RetrievalParams params;
    TrainHistory history;
};

TrainResult train(const std::vector<TrainExample>& data, const RetrievalParams& init, const ChunkPool& pool,
                  const PooledIndex& pooled, const ModelWeights& model, const TrainConfig& cfg,
                  const std::function<void(int, double)>& on_step = {});

// Mean loss of params over a set of examples.
double mean_loss(const std::vector<TrainExample>& data, const RetrievalParams& params, const ChunkPool& pool,
                 const PooledIndex& pooled, const ModelWeights& model);

// "step,loss,lr" CSV text.
std::string loss_csv(const TrainHistory& h);

}  // namespace intra
