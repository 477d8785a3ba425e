#pragma once

#include <Eigen/Dense>

#include "semap/gp.hpp"

namespace semap {

/// Probit log-likelihood derivatives at z = y * f: log Phi(z), its first
/// three derivatives with respect to f, and W = -d2/df2.
struct ProbitDerivs {
    Eigen::VectorXd log_lik;  // log Phi(y_i f_i)
    Eigen::VectorXd d1;       // d log p / d f
    Eigen::VectorXd w;        // -d^2 log p / d f^2 (>= 0)
    Eigen::VectorXd d3;       // d^3 log p / d f^3
};

ProbitDerivs probit_derivs(const Eigen::VectorXd& targets, const Eigen::VectorXd& f);

/// Laplace approximation to the probit GPC posterior: mode, curvature, the
/// cached factorization of B = I + W^1/2 K W^1/2, and the approximate log
/// marginal likelihood.
struct LaplaceState {
    Eigen::VectorXd mode;              // f_hat
    Eigen::VectorXd neg_hessian_diag;  // W at the mode
    Eigen::VectorXd grad_log_lik;      // d log p(y|f)/df at the mode
    Eigen::VectorXd alpha;             // K^-1 (f_hat - c_m)
    Eigen::MatrixXd chol_b;            // lower Cholesky factor of B
    Eigen::VectorXd sqrt_w;
    double approx_log_marginal = 0.0;
    double mode_grad_inf_norm = 0.0;  // |grad of log posterior at f_hat|_inf
    bool converged = false;
    int iterations = 0;
};

/// Newton mode finding for the probit likelihood (targets must be +/-1).
/// Terminates when the objective change drops below 1e-9 or after 50
/// iterations; the latter leaves converged=false in the state.
LaplaceState laplace_fit(const TrainingData& train, const Hyperparameters& theta,
                         KernelType kernel = KernelType::Matern52);

/// Reconstructs the fitted state at a previously found mode (deserialized
/// models) without running Newton: curvature, B factorization, and the log
/// marginal are evaluated directly at the given f.
LaplaceState laplace_state_at_mode(const TrainingData& train, const Hyperparameters& theta,
                                   const Eigen::VectorXd& mode, bool converged,
                                   KernelType kernel = KernelType::Matern52);

/// Latent predictive distribution under the Laplace approximation:
/// mean = k*^T grad_log_lik + c_m, variance = k** - k*^T (K + W^-1)^-1 k*.
LatentPrediction laplace_predict_latent(const LaplaceState& state, const TrainingData& train,
                                        const Hyperparameters& theta,
                                        const Eigen::VectorXd& x_star,
                                        KernelType kernel = KernelType::Matern52);

/// Latent means/variances for every column of x_stars; one triangular solve
/// against the whole cross-covariance block instead of per-query solves.
void laplace_predict_latent_batch(const LaplaceState& state, const TrainingData& train,
                                  const Hyperparameters& theta, const Eigen::MatrixXd& x_stars,
                                  Eigen::VectorXd& means, Eigen::VectorXd& variances,
                                  KernelType kernel = KernelType::Matern52);

/// Averaged predictive class probability for the probit link, in closed
/// form: Phi(mean / sqrt(1 + variance)).
double probit_predict(const LatentPrediction& latent);

/// Laplace-approximate negative log marginal likelihood and its gradient
/// over [log_ell..., log_sigma_f, log_sigma_n, mean_const]; the
/// log_sigma_n entry is zero (the probit link has no separate noise term).
struct LaplaceNlmlResult {
    double value = 0.0;
    Eigen::VectorXd gradient;
    bool converged = false;
};

LaplaceNlmlResult laplace_nlml(const TrainingData& train, const Hyperparameters& theta,
                               KernelType kernel = KernelType::Matern52);

}  // namespace semap
