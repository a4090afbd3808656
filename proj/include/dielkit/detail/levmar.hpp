#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

namespace dielkit::detail {

struct LevMarOptions {
    int max_iterations = 200;
    double relative_step_tol = 1e-10;
    double initial_lambda = 1e-3;
};

struct LevMarResult {
    Eigen::VectorXd params;
    bool converged = false;
    int iterations = 0;
    double cost = 0.0;  // 0.5 * ||r||^2 at the solution
};

/// Dense Levenberg-Marquardt with Marquardt diagonal scaling.
///
/// `residuals(p)` returns the residual vector, `jacobian(p)` its Jacobian
/// (rows = residuals, cols = parameters). `scales` gives the typical
/// magnitude of each parameter; convergence is declared when every accepted
/// step satisfies |dp_i| < relative_step_tol * scales_i.
template <class ResidualFn, class JacobianFn>
LevMarResult levenberg_marquardt(ResidualFn&& residuals, JacobianFn&& jacobian,
                                 Eigen::VectorXd p, const Eigen::VectorXd& scales,
                                 const LevMarOptions& opt = {}) {
    using Eigen::MatrixXd;
    using Eigen::VectorXd;

    LevMarResult out;
    VectorXd r = residuals(p);
    double cost = 0.5 * r.squaredNorm();
    double lambda = opt.initial_lambda;

    for (int iter = 0; iter < opt.max_iterations; ++iter) {
        out.iterations = iter + 1;
        MatrixXd J = jacobian(p);
        MatrixXd A = J.transpose() * J;
        VectorXd g = J.transpose() * r;
        VectorXd diag = A.diagonal();
        const double dmax = diag.maxCoeff();
        if (!(dmax > 0.0) || !std::isfinite(dmax)) break;
        for (int i = 0; i < diag.size(); ++i)
            diag[i] = std::max(diag[i], 1e-14 * dmax);

        bool accepted = false;
        VectorXd step;
        while (lambda < 1e14) {
            MatrixXd M = A;
            M.diagonal() += lambda * diag;
            step = M.ldlt().solve(-g);
            if (step.allFinite()) {
                VectorXd p_try = p + step;
                VectorXd r_try = residuals(p_try);
                double cost_try = 0.5 * r_try.squaredNorm();
                if (std::isfinite(cost_try) && cost_try < cost) {
                    p = p_try;
                    r = std::move(r_try);
                    cost = cost_try;
                    lambda = std::max(lambda / 3.0, 1e-12);
                    accepted = true;
                    break;
                }
            }
            lambda *= 4.0;
        }
        if (!accepted) break;  // stalled: no descent direction at any damping

        bool small = true;
        for (int i = 0; i < step.size(); ++i)
            if (std::abs(step[i]) >= opt.relative_step_tol * scales[i]) {
                small = false;
                break;
            }
        if (small) {
            out.converged = true;
            break;
        }
    }
    out.params = std::move(p);
    out.cost = cost;
    return out;
}

} // namespace dielkit::detail
