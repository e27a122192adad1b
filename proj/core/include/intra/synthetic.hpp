#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "intra/chunk_store.hpp"
#include "intra/qa.hpp"

namespace intra {

// Seeded planted-key corpus. For hops = 2 the question carries keys from two
// oracle chunks that share a link token; the answer token lives only in the second.
struct SyntheticTaskSpec {
    uint64_t seed = 1;
    int M = 800;  // total chunks: oracles plus distractors
    int L_c = 8;
    int vocab_size = 256;
    int n_examples = 300;
    int hops = 2;
    int key_tokens_per_oracle = 3;
    int second_hop_keys = 1;
    int entities_per_chunk = 4;
    double overlap = 0.3;  // chance a distractor carries two keys of some question
    double eval_fraction = 1.0 / 3.0;

    // Throws Errc::config with the reason when the spec cannot be realized.
    void validate() const;
};

struct SyntheticCorpus {
    std::vector<Chunk> chunks;  // ids equal positions
    std::vector<QAExample> train;
    std::vector<QAExample> eval;
};

SyntheticCorpus gen_corpus(const SyntheticTaskSpec& spec);

// Writes chunks.jsonl, train.jsonl and eval.jsonl under dir.
void write_corpus(const SyntheticCorpus& corpus, const std::string& dir);

}  // namespace intra
