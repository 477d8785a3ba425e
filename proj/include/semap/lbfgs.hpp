#pragma once

#include <Eigen/Dense>
#include <functional>

namespace semap {

/// Objective callback: returns f(x) and writes the gradient into grad.
/// Non-finite values are treated as "step too far" by the line search.
using ObjectiveFn = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd& grad)>;

struct LbfgsOptions {
    int memory = 8;
    /// Objective evaluations allowed beyond the one at x0. 0 means return x0.
    int max_evals = 100;
    double grad_tol = 1e-6;  // stop when |grad|_inf falls below this
    double c1 = 1e-4;        // Armijo (sufficient decrease) constant
    double c2 = 0.9;         // strong Wolfe curvature constant
};

struct LbfgsResult {
    Eigen::VectorXd x;  // best point seen, by objective value
    double value = 0.0;
    Eigen::VectorXd gradient;  // gradient at x
    int evaluations = 0;       // evals consumed beyond the initial one
    int iterations = 0;        // L-BFGS outer iterations completed
    bool converged = false;    // gradient tolerance reached
    bool made_progress = false;  // best value is strictly below f(x0)
};

/// Limited-memory BFGS with a strong-Wolfe line search. Always returns the
/// best point evaluated, even when the search stalls or the budget runs out.
LbfgsResult lbfgs_minimize(const ObjectiveFn& fn, const Eigen::VectorXd& x0,
                           const LbfgsOptions& opts = {});

}  // namespace semap
