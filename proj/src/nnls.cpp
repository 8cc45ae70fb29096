// nnls.cpp - Lawson-Hanson nonnegative least squares

#include "sbdyn/nnls.hpp"

#include <limits>
#include <vector>

namespace sbdyn {

namespace {

// Least squares restricted to the passive columns, others forced to zero.
Eigen::VectorXd passive_least_squares(const Eigen::MatrixXd& A,
                                      const Eigen::VectorXd& b,
                                      const std::vector<int>& passive) {
    const int n = static_cast<int>(A.cols());
    Eigen::MatrixXd Ap(A.rows(), static_cast<int>(passive.size()));
    for (int j = 0; j < static_cast<int>(passive.size()); ++j)
        Ap.col(j) = A.col(passive[j]);
    Eigen::VectorXd zp = Ap.colPivHouseholderQr().solve(b);
    Eigen::VectorXd z = Eigen::VectorXd::Zero(n);
    for (int j = 0; j < static_cast<int>(passive.size()); ++j)
        z(passive[j]) = zp(j);
    return z;
}

} // namespace

NnlsResult nnls(const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                int max_iterations, double tolerance) {
    const int n = static_cast<int>(A.cols());
    NnlsResult out;
    out.x = Eigen::VectorXd::Zero(n);

    const Eigen::VectorXd atb = A.transpose() * b;
    double tol = tolerance;
    if (tol < 0.0) {
        const double scale = atb.cwiseAbs().maxCoeff();
        tol = 1e-12 * (scale > 0.0 ? scale : 1.0);
    }

    std::vector<bool> in_passive(n, false);
    std::vector<int> passive;

    Eigen::VectorXd w = atb; // gradient of 1/2 ||b - A x||^2 at x = 0
    while (out.iterations < max_iterations) {
        // Select the most violated dual constraint among active columns.
        int best = -1;
        double best_w = tol;
        for (int j = 0; j < n; ++j) {
            if (!in_passive[j] && w(j) > best_w) {
                best_w = w(j);
                best = j;
            }
        }
        if (best < 0) {
            out.converged = true;
            break;
        }
        in_passive[best] = true;
        passive.push_back(best);

        // Inner loop: restore feasibility of the passive-set solution.
        for (;;) {
            ++out.iterations;
            Eigen::VectorXd z = passive_least_squares(A, b, passive);

            double alpha = std::numeric_limits<double>::infinity();
            for (int idx : passive) {
                if (z(idx) <= 0.0) {
                    const double denom = out.x(idx) - z(idx);
                    if (denom > 0.0)
                        alpha = std::min(alpha, out.x(idx) / denom);
                    else
                        alpha = std::min(alpha, 0.0);
                }
            }
            if (!std::isfinite(alpha)) { // all passive components positive
                out.x = z;
                break;
            }
            out.x += alpha * (z - out.x);
            // Drop passive columns pinned at (or numerically through) zero.
            std::vector<int> kept;
            for (int idx : passive) {
                if (out.x(idx) <= 1e-14 * out.x.cwiseAbs().maxCoeff()) {
                    out.x(idx) = 0.0;
                    in_passive[idx] = false;
                } else {
                    kept.push_back(idx);
                }
            }
            passive.swap(kept);
            if (passive.empty())
                break;
            if (out.iterations >= max_iterations)
                break;
        }

        w = atb - A.transpose() * (A * out.x);
    }

    out.residual_norm = (b - A * out.x).norm();
    return out;
}

} // namespace sbdyn
