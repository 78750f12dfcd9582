#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Core>

namespace testsupport {

// Test data comes from the standard library generator so it never depends on
// the library's own RNG.
inline Eigen::MatrixXd gaussian(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> nd(0.0, 1.0);
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
        for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = nd(gen);
    return m;
}

inline Eigen::VectorXd gaussian_vec(Eigen::Index n, std::uint64_t seed) {
    return gaussian(n, 1, seed).col(0);
}

inline Eigen::MatrixXd centered(Eigen::MatrixXd m) {
    m.rowwise() -= m.colwise().mean();
    return m;
}

inline Eigen::VectorXd centered(Eigen::VectorXd v) {
    v.array() -= v.mean();
    return v;
}

}  // namespace testsupport
