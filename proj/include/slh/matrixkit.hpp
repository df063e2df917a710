#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>

namespace slh {

// All training math runs in double precision; the closed-form steps chain
// inverses and SVDs where float drifts visibly.
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Randomized operations take an explicit seed (or engine) so every run is
// replayable bit for bit on a given platform.
using Rng = std::mt19937_64;

struct SvdResult {
    Matrix u;   // left singular vectors, column-orthonormal
    Vector s;   // singular values, non-increasing, non-negative
    Matrix vt;  // transposed right singular vectors, row-orthonormal
};

// Throws std::invalid_argument if m contains NaN or Inf.
void require_finite(const Matrix& m, const char* what);

// Full SVD: m = u * diag(s) * vt with square u and vt.
SvdResult svd(const Matrix& m);

// Thin SVD: u is rows x min(rows,cols), vt is min(rows,cols) x cols.
SvdResult svd_thin(const Matrix& m);

// Cached Cholesky factorization of a symmetric positive-definite matrix.
// Construction throws on asymmetry (beyond 1e-10 relative) or a failed
// factorization; solve() never fails afterwards.
class SpdSolver {
public:
    explicit SpdSolver(const Matrix& a);
    Matrix solve(const Matrix& b) const;
    Eigen::Index size() const { return llt_.rows(); }

private:
    Eigen::LLT<Matrix> llt_;
};

// One-shot a\b for SPD a.
Matrix solve_spd(const Matrix& a, const Matrix& b);

// l x n matrix with orthonormal rows (l <= n), deterministic per seed.
Matrix random_orthonormal_rows(Eigen::Index l, Eigen::Index n, std::uint64_t seed);

// i.i.d. standard normal entries drawn from rng.
Matrix gaussian_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng);

// Entrywise sign with sgn(0) = +1.
Matrix sign_matrix(const Matrix& m);

}  // namespace slh
