#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "intra/chunk_store.hpp"
#include "intra/linalg.hpp"

namespace testing_util {

inline intra::Mat random_mat(Eigen::Index r, Eigen::Index c, uint64_t seed, double sigma = 1.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0.0, sigma);
    intra::Mat m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = nd(rng);
    return m;
}

inline std::vector<intra::Chunk> random_chunks(int M, int L, int vocab, uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> tok(4, vocab - 1);
    std::vector<intra::Chunk> out(static_cast<size_t>(M));
    for (int i = 0; i < M; ++i) {
        out[static_cast<size_t>(i)].id = 100 + i;
        for (int t = 0; t < L; ++t) out[static_cast<size_t>(i)].tokens.push_back(tok(rng));
    }
    return out;
}

inline std::vector<int> random_tokens(int n, int vocab, uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> tok(4, vocab - 1);
    std::vector<int> v(static_cast<size_t>(n));
    for (auto& t : v) t = tok(rng);
    return v;
}

// Fresh per-test scratch directory under the system temp dir.
inline std::string scratch_dir(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("intra_test_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p.string();
}

}  // namespace testing_util
