#pragma once

#include <Eigen/Dense>
#include <random>

#include "semap/gp.hpp"
#include "semap/hyperparameters.hpp"

namespace semap::testing {

/// Uniform d x n sample in [lo, hi]^d.
inline Eigen::MatrixXd random_inputs(std::mt19937_64& rng, int d, int n, double lo = -2.0,
                                     double hi = 2.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    Eigen::MatrixXd x(d, n);
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < d; ++i) {
            x(i, j) = u(rng);
        }
    }
    return x;
}

inline Eigen::VectorXd random_targets(std::mt19937_64& rng, int n, double scale = 1.0) {
    std::normal_distribution<double> g(0.0, scale);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) {
        y(i) = g(rng);
    }
    return y;
}

inline Eigen::VectorXd random_pm1_labels(std::mt19937_64& rng, int n) {
    std::bernoulli_distribution b(0.5);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) {
        y(i) = b(rng) ? 1.0 : -1.0;
    }
    return y;
}

/// Hyperparameters drawn from moderate ranges so the induced covariance
/// is well conditioned: ell in [0.3, 1.5], sigma_f in [0.6, 1.8],
/// sigma_n in [0.08, 0.4], mean in [-1, 1].
inline Hyperparameters random_hyperparameters(std::mt19937_64& rng, int d) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Hyperparameters h;
    h.log_lengthscales.resize(d);
    for (int i = 0; i < d; ++i) {
        h.log_lengthscales(i) = std::log(0.3 + 1.2 * u(rng));
    }
    h.log_signal_std = std::log(0.6 + 1.2 * u(rng));
    h.log_noise_std = std::log(0.08 + 0.32 * u(rng));
    h.mean_const = -1.0 + 2.0 * u(rng);
    return h;
}

inline TrainingData random_regression_instance(std::mt19937_64& rng, int d, int n) {
    TrainingData t;
    t.inputs = random_inputs(rng, d, n);
    t.targets = random_targets(rng, n);
    return t;
}

}  // namespace semap::testing
