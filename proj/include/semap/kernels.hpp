#pragma once

#include <Eigen/Dense>
#include <vector>

#include "semap/hyperparameters.hpp"

namespace semap {

enum class KernelType {
    Matern52,            // default; suited to physical processes
    SquaredExponential,  // smoother alternative behind the same interface
};

/// Covariance matrix together with a flag marking self-covariances K(X,X).
struct CovMatrix {
    Eigen::MatrixXd values;
    bool symmetric = false;
};

/// Matern nu=5/2 covariance with per-dimension (ARD) lengthscales:
///   sigma_f^2 (1 + sqrt5 r + 5/3 r^2) exp(-sqrt5 r),
///   r^2 = sum_d ((x_d - x'_d)/ell_d)^2.
/// The observation-noise term is never folded in here.
double matern52_ard(const Eigen::VectorXd& x, const Eigen::VectorXd& x_prime,
                    const Hyperparameters& theta);

/// Squared-exponential ARD covariance: sigma_f^2 exp(-r^2/2).
double se_ard(const Eigen::VectorXd& x, const Eigen::VectorXd& x_prime,
              const Hyperparameters& theta);

double kernel_value(KernelType kernel, const Eigen::VectorXd& x, const Eigen::VectorXd& x_prime,
                    const Hyperparameters& theta);

/// Dense covariance matrix between the columns of X (d x n) and X_prime
/// (d x m). With add_noise, X and X_prime must describe the same training
/// set (n == m) and sigma_n^2 plus jitter is added to the diagonal.
CovMatrix cov_matrix(const Eigen::MatrixXd& X, const Eigen::MatrixXd& X_prime,
                     const Hyperparameters& theta, bool add_noise,
                     KernelType kernel = KernelType::Matern52);

/// Noise-free self-covariance K(X,X) with the conditioning jitter on the
/// diagonal; the prior covariance used by classification and FITC.
Eigen::MatrixXd self_cov_jittered(const Eigen::MatrixXd& X, const Hyperparameters& theta,
                                  KernelType kernel = KernelType::Matern52);

/// Analytic gradients of the noisy training covariance K(X,X) + sigma_n^2 I
/// with respect to each log hyperparameter, ordered like
/// Hyperparameters::pack() without the mean: d matrices for the
/// log-lengthscales, then d/d(log sigma_f) = 2 K_noise-free, then
/// d/d(log sigma_n) = 2 sigma_n^2 I.
std::vector<Eigen::MatrixXd> cov_grad(const Eigen::MatrixXd& X, const Hyperparameters& theta,
                                      KernelType kernel = KernelType::Matern52);

}  // namespace semap
