#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "intra/config.hpp"
#include "intra/linalg.hpp"
#include "intra/model.hpp"

namespace intra {

struct Chunk {
    int64_t id = 0;
    std::vector<int> tokens;
};

// Normalized encoder states k̄ for every chunk, stacked in pool order.
struct ChunkPool {
    int d = 0;
    std::vector<int64_t> ids;
    std::vector<size_t> offsets;  // M + 1 row offsets into rows
    Mat rows;                     // N × d

    size_t M() const { return ids.size(); }
    size_t N() const { return static_cast<size_t>(rows.rows()); }
    size_t length(size_t i) const { return offsets[i + 1] - offsets[i]; }
    auto chunk_rows(size_t i) const {
        return rows.middleRows(static_cast<Eigen::Index>(offsets[i]), static_cast<Eigen::Index>(length(i)));
    }
    // Pool index of a chunk id; throws Errc::data if absent.
    size_t index_of(int64_t id) const;
    void rebuild_lookup();

private:
    std::unordered_map<int64_t, size_t> lookup_;
};

// Mean-pooled rows k̂, same chunk order as the pool.
struct PooledIndex {
    int L_p = 1;
    std::vector<size_t> offsets;  // M + 1
    Mat rows;

    size_t M() const { return offsets.empty() ? 0 : offsets.size() - 1; }
    size_t length(size_t i) const { return offsets[i + 1] - offsets[i]; }
    auto chunk_rows(size_t i) const {
        return rows.middleRows(static_cast<Eigen::Index>(offsets[i]), static_cast<Eigen::Index>(length(i)));
    }
};

// k̄ for one chunk: rms_norm(encode(tokens)) rounded to f32, exactly as stored.
Mat encode_chunk(const ModelWeights& model, const std::vector<int>& tokens);
ChunkPool build_pool(const std::vector<Chunk>& chunks, const ModelWeights& model);

// Segment sizes for min(L_p, L_c) contiguous segments; earlier segments get the extra row.
std::vector<int> segment_sizes(int L_c, int L_p);
Mat mean_pool(const Mat& kbar, int L_p);
PooledIndex build_pooled(const ChunkPool& pool, int L_p);

struct QuantizedRow {
    float scale = 1.0f;
    std::vector<int8_t> values;
};
QuantizedRow quantize_row(const Eigen::Ref<const Eigen::RowVectorXd>& row);
Eigen::RowVectorXd dequantize_row(const QuantizedRow& q);

enum class Precision : uint8_t { f32 = 0, int8 = 1 };
Precision parse_precision(const std::string& s);
const char* precision_name(Precision p);

void save_pool(const ChunkPool& pool, const PooledIndex& pooled, const std::string& path, Precision precision);

struct LoadedPool {
    ChunkPool pool;
    PooledIndex pooled;
    Precision precision = Precision::f32;
};
// Throws Errc::bad_magic, Errc::bad_version or Errc::truncated on a bad file.
LoadedPool load_pool(const std::string& path);

struct PoolStats {
    size_t N = 0, M = 0;
    int d = 0;
    double bytes_f32 = 0, bytes_int8 = 0;
    double kv_compression = 0;
};
double storage_bytes(double N, int d, int bytes_per_element);
// 2·L·n_kv·d_h / d: per-layer K and V caches against one shared normalized row.
double kv_compression_ratio(int layers, int n_kv, int d_h, int d);
PoolStats pool_stats(const ChunkPool& pool, const ModelConfig& cfg);

}  // namespace intra
