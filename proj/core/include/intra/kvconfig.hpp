#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "intra/bench.hpp"
#include "intra/synthetic.hpp"
#include "intra/trainer.hpp"

namespace intra {

// Flat key = value file. "[section]" prefixes following keys with "section.";
// '#' starts a comment. Later assignments override earlier ones.
class KvConfig {
public:
    static KvConfig parse(const std::string& text, const std::string& origin = "<config>");
    static KvConfig load(const std::string& path);

    void set(const std::string& key, const std::string& value) { kv_[key] = value; }
    bool has(const std::string& key) const { return kv_.count(key) != 0; }
    const std::map<std::string, std::string>& entries() const { return kv_; }

    // Missing keys and unparsable values throw Errc::config.
    std::string str(const std::string& key) const;
    std::string str_or(const std::string& key, const std::string& def) const;
    int64_t integer_or(const std::string& key, int64_t def) const;
    double real_or(const std::string& key, double def) const;
    bool flag_or(const std::string& key, bool def) const;

    std::string dump() const;

private:
    std::map<std::string, std::string> kv_;
};

struct RunConfig {
    uint64_t seed = 1;

    std::string model_path;              // weights file
    std::string model_preset = "synthetic";
    std::string model_init = "structured";
    std::string pool_path;
    std::string params_path;
    std::string chunks_path;
    std::string train_path;
    std::string eval_path;

    int n0 = 8;
    int n = 5;
    int R = 8;
    int L_p = 3;
    bool cosine_s0 = false;
    bool full_rows_s0 = false;
    std::string precision = "f32";

    TrainConfig train;
    SweepConfig bench;
    SyntheticTaskSpec corpus;

    // Unknown keys are rejected so a typo cannot silently fall back to a default.
    static RunConfig from_kv(const KvConfig& kv);
    KvConfig to_kv() const;
    void validate() const;
};

}  // namespace intra
