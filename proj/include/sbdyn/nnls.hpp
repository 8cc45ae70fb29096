// nnls.hpp - nonnegative least squares, Lawson-Hanson active set

#pragma once

#include <Eigen/Dense>

namespace sbdyn {

struct NnlsResult {
    Eigen::VectorXd x;      // argmin_{x >= 0} ||A x - b||_2
    double residual_norm = 0.0;
    int iterations = 0;     // passive-set least-squares solves performed
    bool converged = false; // false only if the iteration cap was hit
};

// Lawson-Hanson active-set method. Deterministic: ties in the gradient
// selection break toward the lowest column index. `max_iterations` caps the
// number of inner least-squares solves; `tolerance` is the dual-feasibility
// threshold on max_i (A^T (b - A x))_i, scaled relative to ||A^T b||_inf when
// negative (the default).
NnlsResult nnls(const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                int max_iterations, double tolerance = -1.0);

} // namespace sbdyn
