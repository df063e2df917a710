#pragma once

#include "slh/dataio.hpp"
#include "slh/kernelmap.hpp"
#include "slh/matrixkit.hpp"

#include <cstdint>
#include <vector>

namespace slh {

struct Hyperparams {
    double alpha = 3.0;      // label-to-code regression weight
    double beta = 1e-2;      // code/orthogonal-representation coupling
    double gamma = 1e-5;     // pairwise-similarity term
    double mu = 1e-5;        // feature-projection coupling
    double lambda = 1e-6;    // ridge regularization, > 0
    Eigen::Index bits = 8;   // code length L
    int max_iters = 30;
    double rel_tol = 1e-4;
};

// Pairwise class similarity over n samples: +1 when two samples share a
// class, -1 otherwise. Products against it run per class-block, so the n x n
// matrix is never formed; dense() exists for small-n oracles only.
class Similarity {
public:
    explicit Similarity(std::vector<int> labels, int num_classes,
                        Eigen::Index dense_cap = 4096);

    Eigen::Index n() const { return static_cast<Eigen::Index>(labels_.size()); }
    double at(Eigen::Index i, Eigen::Index j) const;

    // S * m for an n x k operand, without materializing S.
    Matrix multiply(const Matrix& m) const;

    // Full n x n matrix; throws above the cap.
    Matrix dense() const;

private:
    std::vector<int> labels_;
    int num_classes_;
    Eigen::Index dense_cap_;
};

Similarity build_similarity(const LabelMatrix& y);

// Column-orthonormal n x d maximizer of Tr(R^T S X^T), from the thin SVD of
// S X^T.
Matrix compute_r(const Similarity& s, const Matrix& x);

// G = S R, computed blockwise.
Matrix compute_g(const Similarity& s, const Matrix& r);

// Alternating closed-form steps. Shapes: Y is c x n, X is d x n, W is L x c,
// B is L x n row-orthonormal, H is L x n over {-1,+1}, P is d x L, R/G are
// n x d.
Matrix w_step(const Matrix& b, const Matrix& h, const Matrix& y, double alpha);
Matrix b_step(const Matrix& w, const Matrix& h, const Matrix& p, const Matrix& x,
              const Matrix& g, const Matrix& r, double beta, double gamma,
              double mu, const Matrix& y);
CodeMatrix h_step(const Matrix& w, const Matrix& y, const Matrix& b,
                  const Matrix& g, const Matrix& r, double beta, double gamma);
Matrix p_step(const Matrix& b, const Matrix& x, double lambda);

double objective(const Matrix& w, const Matrix& b, const CodeMatrix& h,
                 const Matrix& p, const Matrix& x, const Matrix& y,
                 const Matrix& g, const Matrix& r, const Hyperparams& hyper);

struct RslhModel {
    Matrix w;                // L x c
    Matrix b;                // L x n, row-orthonormal
    CodeMatrix h;            // training codes
    Matrix p;                // d x L out-of-sample projection
    Matrix r;                // n x d similarity projection
    KernelMap kernel;
    Hyperparams hyper;
    std::vector<double> objective_trace;  // entry 0 is the initial state
};

// Full training pipeline. anchors == 0 picks min(n, 1000). Alternation stops
// when the relative objective decrease falls below hyper.rel_tol or after
// hyper.max_iters sweeps.
RslhModel train(const Dataset& ds, const Hyperparams& hyper, std::uint64_t seed,
                Eigen::Index anchors = 0);

// Out-of-sample codes: sgn(P^T phi(a)) per column.
CodeMatrix encode(const RslhModel& model, const Matrix& features);

}  // namespace slh
