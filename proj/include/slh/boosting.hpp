#pragma once

#include "slh/rslh.hpp"

#include <cstdint>
#include <utility>
#include <vector>

namespace slh {

// T trained hash matrices stacked run-major into a (T*L) x n pool; each row
// remembers which run and bit it came from.
struct BitPool {
    Matrix bits;  // entries in {-1,+1}
    std::vector<std::pair<int, int>> provenance;  // (run index, bit index)

    Eigen::Index rows() const { return bits.rows(); }
    Eigen::Index n() const { return bits.cols(); }
};

struct BoostedModel {
    std::vector<Eigen::Index> selected;  // pool row per cluster, in cluster order
    CodeMatrix h_final;                  // L x n training codes
    Matrix p_boost;                      // d x L out-of-sample projection
    KernelMap kernel;
};

// |sum of the row|; 0 is perfectly balanced.
double balance_degree(const Eigen::Ref<const Eigen::RowVectorXd>& bit_row);

// Runs train() once per seed and stacks the code matrices. When models is
// non-null the trained models are copied out in run order.
BitPool build_pool(const Dataset& ds, const Hyperparams& hyper,
                   const std::vector<std::uint64_t>& seeds,
                   Eigen::Index anchors = 0,
                   std::vector<RslhModel>* models = nullptr);

// Bit redundancy affinity |<h_i, h_j>| / n: symmetric, unit diagonal,
// entries in [0, 1]; a bit and its negation score 1.
Matrix bit_affinity(const BitPool& pool);

// Normalized-Laplacian spectral clustering of the pool rows into k clusters
// (top-k eigenvectors, row-normalized, seeded k-means with 20 restarts).
// Every cluster in the result is non-empty.
std::vector<int> cluster_bits(const BitPool& pool, Eigen::Index k,
                              std::uint64_t seed);

// Per cluster, the row with the smallest balance degree (ties to the lowest
// pool row index), concatenated in cluster-index order. An empty cluster
// falls back to greedy balance-first selection over the whole pool.
std::pair<std::vector<Eigen::Index>, CodeMatrix> select_bits(
    const BitPool& pool, const std::vector<int>& assignment, Eigen::Index k);

// Ridge regression from kernelized features onto the selected codes.
Matrix fit_extension(const CodeMatrix& h_final, const Matrix& x, double lambda);

// Full boosting pipeline: T runs seeded seed, seed+1, ..., clustering with
// cluster_seed, extension fitted on the first run's kernel map.
BoostedModel boost_train(const Dataset& ds, const Hyperparams& hyper, int runs,
                         std::uint64_t seed, std::uint64_t cluster_seed,
                         Eigen::Index anchors = 0);

CodeMatrix encode(const BoostedModel& model, const Matrix& features);

}  // namespace slh
