#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "intra/chunk_store.hpp"
#include "intra/model.hpp"

namespace intra {

enum class BenchMode { full, rag, intra };
BenchMode parse_bench_mode(const std::string& s);
const char* bench_mode_name(BenchMode m);
std::vector<BenchMode> parse_bench_modes(const std::string& csv);

// Abstract unit counts; k may be 0, everything else >= 1.
struct CostParams {
    double M = 1, L_c = 1, L_q = 1, k = 0, L_g = 1;
    void validate() const;
};
struct CostBreakdown {
    double pre_query = 0, retrieval = 0, prefill = 0, generation = 0;
};
CostBreakdown cost_model(const CostParams& p, BenchMode mode);

// How re-encoding modes turn chunk tokens into context states.
//   joint     retrieved chunks are encoded as one sequence (prefill grows with (k·L_c)²)
//   per_chunk each chunk is encoded alone, reproducing the stored rows bitwise
enum class RagEncoding { joint, per_chunk };
RagEncoding parse_rag_encoding(const std::string& s);

struct BenchResult {
    BenchMode mode = BenchMode::intra;
    std::string axis = "k";
    int value = 0;
    int k = 0;
    int L_c = 0;
    double ttft_ms_min = 0, ttft_ms_median = 0, ttft_ms_max = 0;
    double tps_median = 0;
    int reps = 0;
    int first_token = -1;
};

// Everything a measurement needs; the pool must be built from `chunks`.
struct BenchInputs {
    const ModelWeights* model = nullptr;
    const std::vector<Chunk>* chunks = nullptr;
    const ChunkPool* pool = nullptr;
    std::vector<int> question;
    std::vector<int> topk;  // pool indices fed to every mode
    RagEncoding encoding = RagEncoding::joint;
};

// Context states for a mode; exposed for equivalence checks.
Mat bench_context(const BenchInputs& in, BenchMode mode);
// Prefill plus the first greedy token; returns the token.
int bench_first_token(const BenchInputs& in, BenchMode mode);

// Retrieval is excluded from the clock; warmup reps are discarded. reps < 3 is an error.
BenchResult measure_ttft(const BenchInputs& in, BenchMode mode, int reps, int warmup = 3);
// Tokens per second over L_g greedy steps after the first token (L_g = 1: one-token latency).
BenchResult measure_throughput(const BenchInputs& in, BenchMode mode, int L_g, int reps, int warmup = 3);

struct SweepConfig {
    std::string axis = "k";  // "k" or "L_c"
    std::vector<int> values;
    std::vector<BenchMode> modes{BenchMode::rag, BenchMode::intra};
    int M = 512;
    int L_c = 64;
    int L_q = 64;
    int k = 8;  // fixed k on the L_c axis
    int L_g = 8;
    int reps = 10;
    int warmup = 3;
    bool throughput = true;
    uint64_t seed = 0;
    RagEncoding encoding = RagEncoding::joint;

    void validate() const;
};

// Builds a seeded random-token pool per value and measures every mode.
std::vector<BenchResult> run_sweep(const ModelWeights& model, const SweepConfig& cfg);

// Header: mode,axis,value,ttft_ms_min,ttft_ms_median,ttft_ms_max,tps_median,reps
std::string sweep_csv(const std::vector<BenchResult>& rows);
std::string sweep_sidecar_json(const SweepConfig& cfg, const ModelConfig& model_cfg);

// Median wall time of one full-pool MaxSim pass with the given thread count.
double measure_scoring_ms(const ChunkPool& pool, const Mat& queries, int group_rows, int threads, int reps,
                          int warmup = 3);

// Least-squares polynomial fit; returns the fraction of variance explained (R²).
double polyfit_r2(const std::vector<double>& x, const std::vector<double>& y, int degree);

}  // namespace intra
