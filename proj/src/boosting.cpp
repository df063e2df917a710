#include "slh/boosting.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace slh {

double balance_degree(const Eigen::Ref<const Eigen::RowVectorXd>& bit_row) {
    return std::abs(bit_row.sum());
}

BitPool build_pool(const Dataset& ds, const Hyperparams& hyper,
                   const std::vector<std::uint64_t>& seeds,
                   Eigen::Index anchors, std::vector<RslhModel>* models) {
    if (seeds.empty()) {
        throw std::invalid_argument("build_pool: need at least one run");
    }
    BitPool pool;
    pool.bits.resize(static_cast<Eigen::Index>(seeds.size()) * hyper.bits, ds.n());
    if (models) models->clear();
    for (std::size_t run = 0; run < seeds.size(); ++run) {
        RslhModel model = train(ds, hyper, seeds[run], anchors);
        pool.bits.middleRows(static_cast<Eigen::Index>(run) * hyper.bits, hyper.bits) =
            model.h.h;
        for (Eigen::Index bit = 0; bit < hyper.bits; ++bit) {
            pool.provenance.emplace_back(static_cast<int>(run), static_cast<int>(bit));
        }
        if (models) models->push_back(std::move(model));
    }
    return pool;
}

Matrix bit_affinity(const BitPool& pool) {
    const double n = static_cast<double>(pool.n());
    Matrix a = (pool.bits * pool.bits.transpose()).cwiseAbs() / n;
    // Exact unit diagonal; +/-1 rows dotted with themselves give n.
    a.diagonal().setOnes();
    return a;
}

namespace {

struct KmeansResult {
    std::vector<int> assignment;
    double inertia = std::numeric_limits<double>::infinity();
};

int nearest_center(const Matrix& points, const Matrix& centers, Eigen::Index i) {
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < centers.rows(); ++c) {
        const double d = (points.row(i) - centers.row(c)).squaredNorm();
        if (d < best_d) {
            best_d = d;
            best = static_cast<int>(c);
        }
    }
    return best;
}

// Lloyd iterations with k-means++ seeding. Empty clusters are repaired by
// stealing the point farthest from its center.
KmeansResult kmeans_once(const Matrix& points, Eigen::Index k, Rng& rng) {
    const Eigen::Index m = points.rows();
    Matrix centers(k, points.cols());
    std::vector<double> dist2(static_cast<std::size_t>(m),
                              std::numeric_limits<double>::infinity());
    {
        std::uniform_int_distribution<Eigen::Index> first(0, m - 1);
        centers.row(0) = points.row(first(rng));
        for (Eigen::Index c = 1; c < k; ++c) {
            double total = 0.0;
            for (Eigen::Index i = 0; i < m; ++i) {
                const double d = (points.row(i) - centers.row(c - 1)).squaredNorm();
                auto& slot = dist2[static_cast<std::size_t>(i)];
                slot = std::min(slot, d);
                total += slot;
            }
            Eigen::Index chosen = 0;
            if (total > 0.0) {
                std::uniform_real_distribution<double> u(0.0, total);
                double target = u(rng);
                for (Eigen::Index i = 0; i < m; ++i) {
                    target -= dist2[static_cast<std::size_t>(i)];
                    if (target <= 0.0) {
                        chosen = i;
                        break;
                    }
                }
            } else {
                std::uniform_int_distribution<Eigen::Index> any(0, m - 1);
                chosen = any(rng);
            }
            centers.row(c) = points.row(chosen);
        }
    }

    std::vector<int> assignment(static_cast<std::size_t>(m), 0);
    for (int iter = 0; iter < 100; ++iter) {
        bool changed = false;
        for (Eigen::Index i = 0; i < m; ++i) {
            const int c = nearest_center(points, centers, i);
            if (c != assignment[static_cast<std::size_t>(i)]) {
                assignment[static_cast<std::size_t>(i)] = c;
                changed = true;
            }
        }
        std::vector<Eigen::Index> counts(static_cast<std::size_t>(k), 0);
        for (int c : assignment) ++counts[static_cast<std::size_t>(c)];
        for (Eigen::Index c = 0; c < k; ++c) {
            if (counts[static_cast<std::size_t>(c)] > 0) continue;
            // Move the globally worst-fitting point into the empty cluster.
            Eigen::Index worst = -1;
            double worst_d = -1.0;
            for (Eigen::Index i = 0; i < m; ++i) {
                const int ci = assignment[static_cast<std::size_t>(i)];
                if (counts[static_cast<std::size_t>(ci)] <= 1) continue;
                const double d = (points.row(i) - centers.row(ci)).squaredNorm();
                if (d > worst_d) {
                    worst_d = d;
                    worst = i;
                }
            }
            if (worst < 0) continue;
            --counts[static_cast<std::size_t>(
                assignment[static_cast<std::size_t>(worst)])];
            assignment[static_cast<std::size_t>(worst)] = static_cast<int>(c);
            ++counts[static_cast<std::size_t>(c)];
            changed = true;
        }
        centers.setZero();
        for (Eigen::Index i = 0; i < m; ++i) {
            centers.row(assignment[static_cast<std::size_t>(i)]) += points.row(i);
        }
        for (Eigen::Index c = 0; c < k; ++c) {
            if (counts[static_cast<std::size_t>(c)] > 0) {
                centers.row(c) /= static_cast<double>(counts[static_cast<std::size_t>(c)]);
            }
        }
        if (!changed && iter > 0) break;
    }

    KmeansResult result;
    result.assignment = std::move(assignment);
    result.inertia = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) {
        result.inertia +=
            (points.row(i) - centers.row(result.assignment[static_cast<std::size_t>(i)]))
                .squaredNorm();
    }
    return result;
}

}  // namespace

std::vector<int> cluster_bits(const BitPool& pool, Eigen::Index k,
                              std::uint64_t seed) {
    const Eigen::Index m = pool.rows();
    if (k < 1 || k > m) {
        throw std::invalid_argument("cluster_bits: cluster count must be in [1, rows]");
    }
    if (k == 1) return std::vector<int>(static_cast<std::size_t>(m), 0);

    const Matrix a = bit_affinity(pool);
    const Vector degree = a.rowwise().sum();
    const Vector dinv = degree.array().rsqrt();
    const Matrix lsym = dinv.asDiagonal() * a * dinv.asDiagonal();

    Eigen::SelfAdjointEigenSolver<Matrix> eig(lsym);
    if (eig.info() != Eigen::Success) {
        throw std::runtime_error("cluster_bits: eigendecomposition failed");
    }
    // Eigenvalues come back ascending; the top-k eigenvectors span the
    // cluster indicator subspace.
    Matrix embed = eig.eigenvectors().rightCols(k);
    for (Eigen::Index i = 0; i < m; ++i) {
        const double norm = embed.row(i).norm();
        if (norm > 0.0) embed.row(i) /= norm;
    }

    Rng rng(seed);
    KmeansResult best;
    for (int restart = 0; restart < 20; ++restart) {
        KmeansResult run = kmeans_once(embed, k, rng);
        if (run.inertia < best.inertia) best = std::move(run);
    }
    return best.assignment;
}

std::pair<std::vector<Eigen::Index>, CodeMatrix> select_bits(
    const BitPool& pool, const std::vector<int>& assignment, Eigen::Index k) {
    const Eigen::Index m = pool.rows();
    if (static_cast<Eigen::Index>(assignment.size()) != m) {
        throw std::invalid_argument("select_bits: assignment size mismatch");
    }

    std::vector<Eigen::Index> selected;
    bool fallback = false;
    for (Eigen::Index c = 0; c < k && !fallback; ++c) {
        Eigen::Index best = -1;
        double best_deg = std::numeric_limits<double>::infinity();
        for (Eigen::Index i = 0; i < m; ++i) {
            if (assignment[static_cast<std::size_t>(i)] != static_cast<int>(c)) continue;
            const double deg = balance_degree(pool.bits.row(i));
            if (deg < best_deg) {
                best_deg = deg;
                best = i;
            }
        }
        if (best < 0) {
            fallback = true;
        } else {
            selected.push_back(best);
        }
    }

    if (fallback) {
        // Greedy: balance degree ascending, skipping rows nearly duplicating
        // an already-picked one.
        const Matrix affinity = bit_affinity(pool);
        std::vector<Eigen::Index> order(static_cast<std::size_t>(m));
        std::iota(order.begin(), order.end(), Eigen::Index{0});
        std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
            return balance_degree(pool.bits.row(a)) < balance_degree(pool.bits.row(b));
        });
        selected.clear();
        for (Eigen::Index i : order) {
            if (static_cast<Eigen::Index>(selected.size()) == k) break;
            bool redundant = false;
            for (Eigen::Index j : selected) {
                if (affinity(i, j) >= 0.95) {
                    redundant = true;
                    break;
                }
            }
            if (!redundant) selected.push_back(i);
        }
        // If the redundancy filter starves the selection, top up in degree
        // order.
        for (Eigen::Index i : order) {
            if (static_cast<Eigen::Index>(selected.size()) == k) break;
            if (std::find(selected.begin(), selected.end(), i) == selected.end()) {
                selected.push_back(i);
            }
        }
    }

    CodeMatrix final_codes;
    final_codes.h.resize(k, pool.n());
    for (Eigen::Index c = 0; c < k; ++c) {
        final_codes.h.row(c) = pool.bits.row(selected[static_cast<std::size_t>(c)]);
    }
    return {std::move(selected), std::move(final_codes)};
}

Matrix fit_extension(const CodeMatrix& h_final, const Matrix& x, double lambda) {
    if (!(lambda > 0.0)) {
        throw std::invalid_argument("fit_extension: lambda must be positive");
    }
    if (h_final.n() != x.cols()) {
        throw std::invalid_argument("fit_extension: sample count mismatch");
    }
    const Eigen::Index d = x.rows();
    const Matrix lhs = x * x.transpose() + lambda * Matrix::Identity(d, d);
    return solve_spd(lhs, x * h_final.h.transpose());
}

BoostedModel boost_train(const Dataset& ds, const Hyperparams& hyper, int runs,
                         std::uint64_t seed, std::uint64_t cluster_seed,
                         Eigen::Index anchors) {
    if (runs < 1) {
        throw std::invalid_argument("boost_train: need at least one run");
    }
    std::vector<std::uint64_t> seeds;
    seeds.reserve(static_cast<std::size_t>(runs));
    for (int i = 0; i < runs; ++i) {
        seeds.push_back(seed + static_cast<std::uint64_t>(i));
    }
    std::vector<RslhModel> models;
    const BitPool pool = build_pool(ds, hyper, seeds, anchors, &models);
    const std::vector<int> assignment = cluster_bits(pool, hyper.bits, cluster_seed);
    auto [selected, h_final] = select_bits(pool, assignment, hyper.bits);

    BoostedModel boosted;
    boosted.selected = std::move(selected);
    boosted.h_final = std::move(h_final);
    boosted.kernel = models.front().kernel;
    const Matrix x = apply_kernel(boosted.kernel, ds.features);
    boosted.p_boost = fit_extension(boosted.h_final, x, hyper.lambda);
    return boosted;
}

CodeMatrix encode(const BoostedModel& model, const Matrix& features) {
    const Matrix x = apply_kernel(model.kernel, features);
    CodeMatrix codes;
    codes.h = sign_matrix(model.p_boost.transpose() * x);
    return codes;
}

}  // namespace slh
