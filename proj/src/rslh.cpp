#include "slh/rslh.hpp"

#include <cmath>
#include <iostream>
#include <stdexcept>

namespace slh {

Similarity::Similarity(std::vector<int> labels, int num_classes, Eigen::Index dense_cap)
    : labels_(std::move(labels)), num_classes_(num_classes), dense_cap_(dense_cap) {
    if (num_classes_ < 1) {
        throw std::invalid_argument("Similarity: need at least one class");
    }
    for (int id : labels_) {
        if (id < 0 || id >= num_classes_) {
            throw std::invalid_argument("Similarity: class id out of range");
        }
    }
}

double Similarity::at(Eigen::Index i, Eigen::Index j) const {
    return labels_[static_cast<std::size_t>(i)] == labels_[static_cast<std::size_t>(j)]
               ? 1.0
               : -1.0;
}

Matrix Similarity::multiply(const Matrix& m) const {
    if (m.rows() != n()) {
        throw std::invalid_argument("Similarity::multiply: operand row count mismatch");
    }
    // Row i of S is 2*[class == class_i] - 1, so S*m falls out of per-class
    // row sums plus the total column sum.
    Matrix class_sums = Matrix::Zero(num_classes_, m.cols());
    for (Eigen::Index i = 0; i < n(); ++i) {
        class_sums.row(labels_[static_cast<std::size_t>(i)]) += m.row(i);
    }
    const Eigen::RowVectorXd total = m.colwise().sum();
    Matrix out(n(), m.cols());
    for (Eigen::Index i = 0; i < n(); ++i) {
        out.row(i) = 2.0 * class_sums.row(labels_[static_cast<std::size_t>(i)]) - total;
    }
    return out;
}

Matrix Similarity::dense() const {
    if (n() > dense_cap_) {
        throw std::invalid_argument("Similarity::dense: n exceeds the materialization cap");
    }
    Matrix s(n(), n());
    for (Eigen::Index i = 0; i < n(); ++i) {
        for (Eigen::Index j = 0; j < n(); ++j) {
            s(i, j) = at(i, j);
        }
    }
    return s;
}

Similarity build_similarity(const LabelMatrix& y) {
    std::vector<int> labels;
    labels.reserve(static_cast<std::size_t>(y.n()));
    for (Eigen::Index j = 0; j < y.n(); ++j) {
        Eigen::Index row;
        y.y.col(j).maxCoeff(&row);
        labels.push_back(static_cast<int>(row));
    }
    return Similarity(std::move(labels), static_cast<int>(y.num_classes()));
}

Matrix compute_r(const Similarity& s, const Matrix& x) {
    if (x.cols() != s.n()) {
        throw std::invalid_argument("compute_r: X column count must equal n");
    }
    const Matrix sxt = s.multiply(x.transpose());  // n x d
    const SvdResult dec = svd_thin(sxt);
    return dec.u * dec.vt;
}

Matrix compute_g(const Similarity& s, const Matrix& r) {
    return s.multiply(r);
}

Matrix w_step(const Matrix& b, const Matrix& h, const Matrix& y, double alpha) {
    if (b.cols() != y.cols() || h.cols() != y.cols() || b.rows() != h.rows()) {
        throw std::invalid_argument("w_step: shape mismatch");
    }
    const Eigen::Index c = y.rows();
    // W (alpha Y Y^T + I) = B Y^T + alpha H Y^T; the system matrix is SPD.
    const Matrix lhs =
        alpha * (y * y.transpose()) + Matrix::Identity(c, c);
    const Matrix rhs = (b * y.transpose() + alpha * (h * y.transpose())).transpose();
    return solve_spd(lhs, rhs).transpose();
}

Matrix b_step(const Matrix& w, const Matrix& h, const Matrix& p, const Matrix& x,
              const Matrix& g, const Matrix& r, double beta, double gamma,
              double mu, const Matrix& y) {
    const Matrix q = y.transpose() * w.transpose() + beta * h.transpose() +
                     gamma * (g * (r.transpose() * h.transpose())) +
                     mu * (x.transpose() * p);
    // Procrustes: with Q = U S V^T the row-orthonormal maximizer of Tr(Q B)
    // is B = V U^T.
    const SvdResult dec = svd_thin(q);
    return dec.vt.transpose() * dec.u.transpose();
}

CodeMatrix h_step(const Matrix& w, const Matrix& y, const Matrix& b,
                  const Matrix& g, const Matrix& r, double beta, double gamma) {
    CodeMatrix h;
    h.h = sign_matrix(w * y + beta * b + gamma * ((b * g) * r.transpose()));
    return h;
}

Matrix p_step(const Matrix& b, const Matrix& x, double lambda) {
    if (!(lambda > 0.0)) {
        throw std::invalid_argument("p_step: lambda must be positive");
    }
    const Eigen::Index d = x.rows();
    const Matrix lhs = x * x.transpose() + lambda * Matrix::Identity(d, d);
    return solve_spd(lhs, x * b.transpose());
}

double objective(const Matrix& w, const Matrix& b, const CodeMatrix& h,
                 const Matrix& p, const Matrix& x, const Matrix& y,
                 const Matrix& g, const Matrix& r, const Hyperparams& hyper) {
    const Matrix wy = w * y;
    // B^T H R = B^T (H R) keeps the largest intermediate at n x d.
    const Matrix bthr = b.transpose() * (h.h * r);
    double obj = (y - w.transpose() * b).squaredNorm();
    obj += hyper.alpha * (h.h - wy).squaredNorm();
    obj += hyper.beta * (h.h - b).squaredNorm();
    obj += hyper.gamma * (bthr - g).squaredNorm();
    obj += hyper.mu * (b - p.transpose() * x).squaredNorm();
    obj += hyper.lambda * p.squaredNorm();
    return obj;
}

RslhModel train(const Dataset& ds, const Hyperparams& hyper, std::uint64_t seed,
                Eigen::Index anchors) {
    if (hyper.bits < 1) {
        throw std::invalid_argument("train: code length must be >= 1");
    }
    if (hyper.max_iters < 0) {
        throw std::invalid_argument("train: max_iters must be >= 0");
    }
    if (ds.num_classes < 2) {
        throw std::invalid_argument("train: need at least 2 classes");
    }
    const Eigen::Index n = ds.n();
    const Eigen::Index bits = hyper.bits;
    if (bits > n) {
        throw std::invalid_argument("train: code length exceeds sample count");
    }
    if (static_cast<double>(bits) < std::log2(static_cast<double>(ds.num_classes))) {
        std::cerr << "warning: code length " << bits << " is below log2("
                  << ds.num_classes << "); codes cannot separate all classes\n";
    }

    RslhModel model;
    model.hyper = hyper;

    const Eigen::Index d = anchors > 0 ? anchors : std::min<Eigen::Index>(n, 1000);
    model.kernel = fit_kernel(ds.features, d, seed);
    const Matrix x = apply_kernel(model.kernel, ds.features);

    const LabelMatrix lm = build_label_matrix(ds.labels, ds.num_classes);
    const Matrix& y = lm.y;
    const Similarity sim(ds.labels, ds.num_classes);
    model.r = compute_r(sim, x);
    const Matrix g = compute_g(sim, model.r);

    // Initialization: orthonormal B, random sign H, zero P and W. Every
    // constraint already holds, and the first sweep's W-step starts the
    // descent.
    model.b = random_orthonormal_rows(bits, n, seed);
    Rng rng(seed + 0x9e3779b97f4a7c15ull);
    model.h.h = sign_matrix(gaussian_matrix(bits, n, rng));
    model.p = Matrix::Zero(d, bits);
    model.w = Matrix::Zero(bits, y.rows());

    model.objective_trace.push_back(
        objective(model.w, model.b, model.h, model.p, x, y, g, model.r, hyper));

    // The two SPD systems are constant across sweeps.
    const SpdSolver w_system(hyper.alpha * (y * y.transpose()) +
                             Matrix::Identity(y.rows(), y.rows()));
    const SpdSolver p_system(x * x.transpose() +
                             hyper.lambda * Matrix::Identity(d, d));

    for (int iter = 0; iter < hyper.max_iters; ++iter) {
        const Matrix w_rhs =
            (model.b * y.transpose() + hyper.alpha * (model.h.h * y.transpose()))
                .transpose();
        model.w = w_system.solve(w_rhs).transpose();
        model.b = b_step(model.w, model.h.h, model.p, x, g, model.r, hyper.beta,
                         hyper.gamma, hyper.mu, y);
        model.h = h_step(model.w, y, model.b, g, model.r, hyper.beta, hyper.gamma);
        model.p = p_system.solve(x * model.b.transpose());

        const double obj =
            objective(model.w, model.b, model.h, model.p, x, y, g, model.r, hyper);
        const double prev = model.objective_trace.back();
        model.objective_trace.push_back(obj);
        if ((prev - obj) / std::max(1.0, prev) < hyper.rel_tol) break;
    }
    return model;
}

CodeMatrix encode(const RslhModel& model, const Matrix& features) {
    const Matrix x = apply_kernel(model.kernel, features);
    CodeMatrix codes;
    codes.h = sign_matrix(model.p.transpose() * x);
    return codes;
}

}  // namespace slh
