#include "slh/kernelmap.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace slh {

KernelMap fit_kernel(const Matrix& features, Eigen::Index d, std::uint64_t seed,
                     double sigma_override) {
    require_finite(features, "fit_kernel features");
    const Eigen::Index n = features.cols();
    if (d < 1 || d > n) {
        throw std::invalid_argument("fit_kernel: anchor count must be in [1, n]");
    }

    // Partial Fisher-Yates: first d slots are a uniform draw without
    // replacement.
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    Rng rng(seed);
    for (Eigen::Index i = 0; i < d; ++i) {
        std::uniform_int_distribution<Eigen::Index> pick(i, n - 1);
        std::swap(idx[static_cast<std::size_t>(i)],
                  idx[static_cast<std::size_t>(pick(rng))]);
    }

    KernelMap km;
    km.anchors.resize(features.rows(), d);
    for (Eigen::Index i = 0; i < d; ++i) {
        km.anchors.col(i) = features.col(idx[static_cast<std::size_t>(i)]);
    }

    if (sigma_override > 0.0) {
        km.sigma = sigma_override;
        return km;
    }

    // 2 sigma^2 = mean over all (sample, anchor) pairs of the squared
    // distance, which keeps every exponent O(1).
    double total = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
        for (Eigen::Index i = 0; i < d; ++i) {
            total += (features.col(j) - km.anchors.col(i)).squaredNorm();
        }
    }
    const double mean_sq = total / (static_cast<double>(n) * static_cast<double>(d));
    if (!(mean_sq > 0.0)) {
        throw std::invalid_argument(
            "fit_kernel: degenerate features (all samples identical); pass sigma_override");
    }
    km.sigma = std::sqrt(mean_sq / 2.0);
    return km;
}

Matrix apply_kernel(const KernelMap& km, const Matrix& features) {
    require_finite(features, "apply_kernel features");
    if (features.rows() != km.feature_dim()) {
        throw std::invalid_argument("apply_kernel: feature dimension mismatch");
    }
    if (!(km.sigma > 0.0)) {
        throw std::invalid_argument("apply_kernel: kernel map not fitted");
    }
    const Eigen::Index d = km.d();
    const Eigen::Index n = features.cols();
    const double inv = 1.0 / (2.0 * km.sigma * km.sigma);
    Matrix x(d, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        for (Eigen::Index i = 0; i < d; ++i) {
            x(i, j) = std::exp(-(features.col(j) - km.anchors.col(i)).squaredNorm() * inv);
        }
    }
    return x;
}

}  // namespace slh
