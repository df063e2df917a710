#include "slh/matrixkit.hpp"

#include <Eigen/SVD>

#include <stdexcept>
#include <string>

namespace slh {

void require_finite(const Matrix& m, const char* what) {
    if (!m.allFinite()) {
        throw std::invalid_argument(std::string(what) + ": non-finite entries");
    }
}

namespace {

SvdResult run_svd(const Matrix& m, unsigned options) {
    require_finite(m, "svd input");
    if (m.rows() < 1 || m.cols() < 1) {
        throw std::invalid_argument("svd: empty matrix");
    }
    // BDCSVD degrades to Jacobi internally for small inputs.
    Eigen::BDCSVD<Matrix> dec(m, options);
    if (dec.info() != Eigen::Success) {
        throw std::runtime_error("svd: decomposition did not converge");
    }
    SvdResult r;
    r.u = dec.matrixU();
    r.s = dec.singularValues();
    r.vt = dec.matrixV().transpose();
    require_finite(r.u, "svd U");
    require_finite(r.vt, "svd V");
    return r;
}

}  // namespace

SvdResult svd(const Matrix& m) {
    return run_svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
}

SvdResult svd_thin(const Matrix& m) {
    return run_svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
}

SpdSolver::SpdSolver(const Matrix& a) {
    require_finite(a, "solve_spd lhs");
    if (a.rows() != a.cols()) {
        throw std::invalid_argument("solve_spd: matrix not square");
    }
    const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
    if ((a - a.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
        throw std::invalid_argument("solve_spd: matrix not symmetric");
    }
    llt_.compute(a);
    if (llt_.info() != Eigen::Success) {
        throw std::runtime_error("solve_spd: Cholesky failed, matrix not positive-definite");
    }
}

Matrix SpdSolver::solve(const Matrix& b) const {
    require_finite(b, "solve_spd rhs");
    if (b.rows() != llt_.rows()) {
        throw std::invalid_argument("solve_spd: rhs row count mismatch");
    }
    Matrix x = llt_.solve(b);
    require_finite(x, "solve_spd result");
    return x;
}

Matrix solve_spd(const Matrix& a, const Matrix& b) {
    return SpdSolver(a).solve(b);
}

Matrix random_orthonormal_rows(Eigen::Index l, Eigen::Index n, std::uint64_t seed) {
    if (l > n) {
        throw std::invalid_argument("random_orthonormal_rows: need l <= n");
    }
    Rng rng(seed);
    Matrix g = gaussian_matrix(n, l, rng);
    Eigen::HouseholderQR<Matrix> qr(g);
    Matrix q = qr.householderQ() * Matrix::Identity(n, l);
    // Fix the sign of each column so the factorization is unique; Gaussian
    // input makes the R diagonal nonzero almost surely.
    Matrix r = qr.matrixQR().topRows(l).triangularView<Eigen::Upper>();
    for (Eigen::Index j = 0; j < l; ++j) {
        if (r(j, j) < 0.0) q.col(j) = -q.col(j);
    }
    return q.transpose();
}

Matrix gaussian_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j) {
        for (Eigen::Index i = 0; i < rows; ++i) {
            m(i, j) = normal(rng);
        }
    }
    return m;
}

Matrix sign_matrix(const Matrix& m) {
    require_finite(m, "sign_matrix input");
    return m.unaryExpr([](double v) { return v >= 0.0 ? 1.0 : -1.0; });
}

}  // namespace slh
