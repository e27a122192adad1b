#pragma once

#include <cstdint>
#include <vector>

#include "intra/chunk_store.hpp"

namespace intra {

// Coarse inverted file over per-chunk mean vectors (mean of the pooled rows).
struct IvfIndex {
    Mat centroids;                        // n_centroids × d
    std::vector<std::vector<int>> lists;  // member chunk indices per centroid, ascending
};

// Seeded k-means (Euclidean assignment, fixed iteration count).
IvfIndex ivf_build(const PooledIndex& pooled, int n_centroids, uint64_t seed, int iterations = 25);

// Probes the nprobe centroids with the largest summed dot product against the
// query rows; returns the union of their members in ascending order.
std::vector<int> ivf_search(const IvfIndex& index, const Mat& query_rows, int nprobe);

}  // namespace intra
