#pragma once

#include <Eigen/Dense>

#include "semap/kernels.hpp"

namespace semap {

/// Inputs as a d x n_t matrix of column vectors; targets are real for
/// regression and exactly +/-1 for classification.
struct TrainingData {
    Eigen::MatrixXd inputs;
    Eigen::VectorXd targets;

    Eigen::Index size() const { return inputs.cols(); }
    Eigen::Index dim() const { return inputs.rows(); }
    bool empty() const { return inputs.cols() == 0; }
};

struct LatentPrediction {
    double mean = 0.0;
    double variance = 0.0;
};

/// Exact GP regression with a cached Cholesky factor of K + sigma_n^2 I.
/// Queries never form an explicit inverse. The constant mean c_m is
/// subtracted from the targets before the solve and added back to the
/// predictive mean, so the conditioning math stays in zero-mean form.
class GpRegressor {
public:
    GpRegressor(TrainingData train, Hyperparameters theta,
                KernelType kernel = KernelType::Matern52);

    LatentPrediction predict(const Eigen::VectorXd& x_star) const;

    const TrainingData& train() const { return train_; }
    const Hyperparameters& theta() const { return theta_; }

private:
    TrainingData train_;
    Hyperparameters theta_;
    KernelType kernel_;
    Eigen::LLT<Eigen::MatrixXd> chol_;  // of K + (sigma_n^2 + jitter) I
    Eigen::VectorXd alpha_;             // (K + sigma_n^2 I)^-1 (y - c_m)
};

/// One-shot exact GP prediction. An empty training set yields the prior
/// (mean c_m, variance k(x*,x*)).
LatentPrediction gp_predict(const TrainingData& train, const Hyperparameters& theta,
                            const Eigen::VectorXd& x_star,
                            KernelType kernel = KernelType::Matern52);

/// Negative log marginal likelihood split into its three terms plus the
/// gradient over the packed parameter vector [log_ell..., log_sigma_f,
/// log_sigma_n, mean_const].
struct NlmlResult {
    double value = 0.0;
    double data_fit = 0.0;    // 1/2 (y-m)^T K_y^-1 (y-m)
    double complexity = 0.0;  // 1/2 log |K_y|
    double constant = 0.0;    // n/2 log 2pi
    Eigen::VectorXd gradient;
};

NlmlResult nlml(const TrainingData& train, const Hyperparameters& theta,
                KernelType kernel = KernelType::Matern52);

}  // namespace semap
