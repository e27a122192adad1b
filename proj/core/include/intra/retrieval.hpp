#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "intra/chunk_store.hpp"
#include "intra/decoder_grad.hpp"
#include "intra/model.hpp"

namespace intra {

struct RetrievalParams {
    Mat rho;    // R × d
    Mat alpha;  // L_dec × n_h

    int R() const { return static_cast<int>(rho.rows()); }
    // First r retrieval tokens with the same α (the R ablation).
    RetrievalParams truncated(int r) const;
};

// ρ ~ N(0, rho_sigma²), α uniform 1/(L_dec·n_h).
RetrievalParams init_params(const ModelConfig& cfg, int R, uint64_t seed, double rho_sigma = 0.05);
void validate_params(const RetrievalParams& p, const ModelConfig& cfg);
void save_params(const RetrievalParams& p, const std::string& path);
RetrievalParams load_params(const std::string& path);
uint64_t params_hash(const RetrievalParams& p);

enum class Stage { initial, intra };
const char* stage_name(Stage s);

struct ScoreVector {
    std::vector<double> s;  // pool order
    Stage stage = Stage::initial;
};

// Pool indices, ordered by (score desc, index asc).
using SelectionSet = std::vector<int>;

double maxsim(const Mat& u, const Mat& v, double scale);

SelectionSet select_top_n(const std::vector<double>& scores, int n);
// Top-n restricted to a candidate subset.
SelectionSet select_top_n_among(const std::vector<double>& scores, const std::vector<int>& candidates, int n);
// Same members as s0, stable-sorted by the given scores.
SelectionSet rerank(const SelectionSet& s0, const ScoreVector& scores);

struct ScoreOptions {
    int threads = 1;
    const std::vector<int>* candidates = nullptr;  // score only these chunks; others stay 0
};

// Σ over each group of group_rows query rows of max over a chunk's rows, scaled.
// ms is (rows / group_rows) × M. arg (optional) holds, per query row and chunk,
// the absolute row index of the maximizing chunk row (ties to the lowest).
struct MaxSimTable {
    Mat ms;
    std::vector<int32_t> arg;  // query_row * M + chunk
};
MaxSimTable maxsim_table(const Mat& queries, int group_rows, const Mat& rows, const std::vector<size_t>& offsets,
                         double scale, bool want_arg, const ScoreOptions& opt = {});

struct InitialOptions {
    bool use_full_rows = false;  // score against k̄ instead of k̂
    bool cosine = false;         // mean-vector cosine instead of MaxSim
    ScoreOptions score;
};

// rms_norm rows of encode(question).
Mat question_keys(const ModelWeights& model, const std::vector<int>& question);
ScoreVector initial_scores(const std::vector<int>& question, const ChunkPool& pool, const PooledIndex& pooled,
                           const ModelWeights& model, const InitialOptions& opt = {});
struct Selection {
    ScoreVector scores;
    SelectionSet set;
};
Selection initial_selection(const std::vector<int>& question, const ChunkPool& pool, const PooledIndex& pooled,
                            const ModelWeights& model, int n0, const InitialOptions& opt = {});

// k̄ rows of the selected chunks, concatenated in selection order.
Mat gather_context(const ChunkPool& pool, const std::vector<int>& selection);
// [embed(question); ρ].
Mat retrieval_input(const ModelWeights& model, const std::vector<int>& question, const RetrievalParams& params);

// Everything the trainer needs from one retrieval pass.
struct IntraPass {
    ScoreVector scores;
    ExposedQueries queries;
    MaxSimTable table;  // groups are (layer, head), R rows each
    std::vector<int> positions;
    std::unique_ptr<DecoderTape> tape;
};
IntraPass intra_pass(const std::vector<int>& question, const RetrievalParams& params, const SelectionSet& s0,
                     const ChunkPool& pool, const PooledIndex& pooled, const ModelWeights& model, bool record,
                     const ScoreOptions& opt = {});
ScoreVector intra_scores(const std::vector<int>& question, const RetrievalParams& params, const SelectionSet& s0,
                         const ChunkPool& pool, const PooledIndex& pooled, const ModelWeights& model,
                         const ScoreOptions& opt = {});

// One JSON line: {query_id, stage, top:[{chunk_id, score}], params_hash}.
std::string ranking_json(int64_t query_id, Stage stage, const SelectionSet& top, const ScoreVector& scores,
                         const ChunkPool& pool, const std::string& params_hash_hex);

}  // namespace intra
