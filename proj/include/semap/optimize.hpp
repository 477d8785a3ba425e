#pragma once

#include "semap/gp.hpp"
#include "semap/lbfgs.hpp"

namespace semap {

enum class Objective : std::uint8_t {
    ExactNlml = 0,    // Gaussian likelihood, regression
    LaplaceNlml = 1,  // probit likelihood via the Laplace approximation
};

struct OptimizeOptions {
    Objective objective = Objective::ExactNlml;
    KernelType kernel = KernelType::Matern52;
    /// Objective/gradient evaluations beyond the initial one; 0 keeps theta0.
    int max_evals = 60;
    /// The probit link has no noise parameter, so classification fits
    /// should leave this off.
    bool optimize_noise = true;
    bool optimize_mean = true;
};

struct OptimizeResult {
    Hyperparameters theta;  // best hyperparameters seen
    double nlml = 0.0;      // objective value at theta
    int evaluations = 0;
    bool made_progress = false;  // theta improved on theta0
    bool converged = false;      // gradient tolerance reached
};

/// Minimize the chosen marginal-likelihood objective over
/// [log_lengthscales, log_sigma_f] plus the unmasked noise/mean entries.
OptimizeResult optimize_hyperparameters(const TrainingData& train, const Hyperparameters& theta0,
                                        const OptimizeOptions& opts = {});

}  // namespace semap
