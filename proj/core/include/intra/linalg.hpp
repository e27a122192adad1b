#pragma once

#include <Eigen/Dense>

namespace intra {

// Activations are row-per-token; row-major keeps a token's features contiguous.
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec = Eigen::VectorXd;
using MatF = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Round every entry to the nearest float so the value survives an f32 file.
inline void round_to_f32(Mat& m) {
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<double>(static_cast<float>(m.data()[i]));
}
inline void round_to_f32(Vec& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = static_cast<double>(static_cast<float>(v[i]));
}

}  // namespace intra
