#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "intra/baselines.hpp"
#include "intra/retrieval.hpp"

namespace intra {

struct QAExample {
    int64_t id = 0;
    std::vector<int> question;
    std::vector<int> answer;
    std::vector<int64_t> oracle;
};

// {"id", "question", "answer", "oracle_chunk_ids"} per line.
std::vector<QAExample> load_dataset(const std::string& path);
std::string dataset_jsonl(const std::vector<QAExample>& data);
// {"chunk_id", "tokens"} per line.
std::vector<Chunk> load_chunks(const std::string& path);
std::string chunks_jsonl(const std::vector<Chunk>& chunks);

// First four of s_intra, then the best S₀ member not already present.
std::vector<int> assemble_context(const SelectionSet& s_intra, const SelectionSet& s0, int n_intra = 4);

struct PipelineConfig {
    int n0 = 8;
    int n = 5;                // final top-n from S_INTRA
    int R = 0;                // 0 = every retrieval token in the params
    bool initial_only = false;  // S_INTRA = S₀
    bool top5_only = false;     // context = top five of S_INTRA, no S₀ slot
    InitialOptions initial;
    int max_len = 4;
};

struct AnswerTrace {
    SelectionSet s0;
    SelectionSet s_intra;
    std::vector<int> context;
    std::vector<int> tokens;
};
AnswerTrace answer(const std::vector<int>& question, const ChunkPool& pool, const PooledIndex& pooled,
                   const RetrievalParams& params, const ModelWeights& model, const PipelineConfig& cfg);

// 1 iff every oracle id is among the first k retrieved ids.
int complete_evidence_recall(const std::vector<int64_t>& retrieved, const std::vector<int64_t>& oracle, int k);
int exact_match(const std::vector<int>& pred, const std::vector<int>& gold);
double token_f1(const std::vector<int>& pred, const std::vector<int>& gold);
double gap_closure(double em_intra, double em_random, double em_complete);
// 1.96·sqrt(p(1−p)/n).
double ci_halfwidth(double p, size_t n);

enum class Mode { initial, rerank, intra, random, complete, tfidf, bm25, rrf, encoder_maxsim };
Mode parse_mode(const std::string& s);
const char* mode_name(Mode m);
std::vector<Mode> parse_modes(const std::string& csv);

struct EvalConfig {
    PipelineConfig pipeline;
    std::vector<Mode> modes{Mode::initial, Mode::rerank, Mode::intra};
    bool generate = true;
    uint64_t seed = 0;
    int threads = 1;
};

struct ModeReport {
    Mode mode = Mode::intra;
    size_t n = 0;
    double recall5 = 0, recall10 = 0, recall20 = 0;
    double em = 0, f1 = 0;
    bool generated = false;
};

struct EvalReport {
    std::vector<ModeReport> modes;
    std::optional<double> gap_closure;  // needs intra, random and complete with distinct EM
    std::string dataset;
    uint64_t seed = 0;

    const ModeReport* find(Mode m) const;
    std::string to_json() const;
    std::string to_csv() const;
};

// chunks is needed only by the lexical baselines and may be empty otherwise.
EvalReport evaluate(const std::vector<QAExample>& data, const ChunkPool& pool, const PooledIndex& pooled,
                    const RetrievalParams& params, const ModelWeights& model, const EvalConfig& cfg,
                    const std::vector<Chunk>& chunks = {});

}  // namespace intra
