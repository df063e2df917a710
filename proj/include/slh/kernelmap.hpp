#pragma once

#include "slh/matrixkit.hpp"

#include <cstdint>

namespace slh {

// RBF anchor embedding: phi(a)_i = exp(-||a - p_i||^2 / (2 sigma^2)).
// Anchors are actual training samples, selected without replacement.
struct KernelMap {
    Matrix anchors;      // feature_dim x d
    double sigma = 0.0;  // bandwidth, > 0

    Eigen::Index d() const { return anchors.cols(); }
    Eigen::Index feature_dim() const { return anchors.rows(); }
};

// Picks d distinct sample columns uniformly (seeded). With sigma_override <= 0
// the bandwidth defaults to 2*sigma^2 = mean squared sample-to-anchor distance.
KernelMap fit_kernel(const Matrix& features, Eigen::Index d, std::uint64_t seed,
                     double sigma_override = 0.0);

// Kernelized representation X, one column per sample, entries in (0, 1].
Matrix apply_kernel(const KernelMap& km, const Matrix& features);

}  // namespace slh
