#include "intra/ivf.hpp"

#include <algorithm>
#include <numeric>
#include <random>

#include "intra/error.hpp"

namespace intra {

IvfIndex ivf_build(const PooledIndex& pooled, int n_centroids, uint64_t seed, int iterations) {
    const int M = static_cast<int>(pooled.M());
    require(n_centroids >= 1, Errc::config, "n_centroids must be >= 1");
    require(n_centroids <= M, Errc::config, "n_centroids exceeds the number of chunks");
    require(iterations >= 1, Errc::config, "k-means needs at least one iteration");

    Mat means(M, pooled.rows.cols());
    for (int i = 0; i < M; ++i) means.row(i) = pooled.chunk_rows(static_cast<size_t>(i)).colwise().mean();

    std::vector<int> perm(static_cast<size_t>(M));
    std::iota(perm.begin(), perm.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(perm.begin(), perm.end(), rng);
    IvfIndex idx;
    idx.centroids.resize(n_centroids, means.cols());
    for (int c = 0; c < n_centroids; ++c) idx.centroids.row(c) = means.row(perm[static_cast<size_t>(c)]);

    std::vector<int> assign(static_cast<size_t>(M), -1);
    for (int it = 0; it < iterations; ++it) {
        const Eigen::VectorXd cn = idx.centroids.rowwise().squaredNorm();
        const Mat dots = means * idx.centroids.transpose();
        bool changed = false;
        for (int i = 0; i < M; ++i) {
            int best = 0;
            double bd = cn[0] - 2.0 * dots(i, 0);
            for (int c = 1; c < n_centroids; ++c) {
                const double dist = cn[c] - 2.0 * dots(i, c);
                if (dist < bd) {
                    bd = dist;
                    best = c;
                }
            }
            if (assign[static_cast<size_t>(i)] != best) changed = true;
            assign[static_cast<size_t>(i)] = best;
        }
        Mat sum = Mat::Zero(n_centroids, means.cols());
        std::vector<int> count(static_cast<size_t>(n_centroids), 0);
        for (int i = 0; i < M; ++i) {
            sum.row(assign[static_cast<size_t>(i)]) += means.row(i);
            ++count[static_cast<size_t>(assign[static_cast<size_t>(i)])];
        }
        for (int c = 0; c < n_centroids; ++c)
            if (count[static_cast<size_t>(c)] > 0) idx.centroids.row(c) = sum.row(c) / count[static_cast<size_t>(c)];
        if (!changed && it > 0) break;
    }
    idx.lists.assign(static_cast<size_t>(n_centroids), {});
    for (int i = 0; i < M; ++i) idx.lists[static_cast<size_t>(assign[static_cast<size_t>(i)])].push_back(i);
    return idx;
}

std::vector<int> ivf_search(const IvfIndex& index, const Mat& query_rows, int nprobe) {
    const int n = static_cast<int>(index.centroids.rows());
    require(nprobe >= 1 && nprobe <= n, Errc::config, "nprobe must be in [1, n_centroids]");
    require(query_rows.rows() >= 1 && query_rows.cols() == index.centroids.cols(), Errc::data,
            "ivf_search: query rows do not match index width");
    const Eigen::VectorXd score = index.centroids * query_rows.colwise().sum().transpose();
    std::vector<int> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::partial_sort(order.begin(), order.begin() + nprobe, order.end(),
                      [&](int a, int b) { return score[a] > score[b] || (score[a] == score[b] && a < b); });
    std::vector<int> out;
    for (int k = 0; k < nprobe; ++k) {
        const auto& l = index.lists[static_cast<size_t>(order[static_cast<size_t>(k)])];
        out.insert(out.end(), l.begin(), l.end());
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace intra
