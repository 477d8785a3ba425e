#include "semap/gp.hpp"

#include <algorithm>
#include <cmath>

#include "semap/errors.hpp"
#include "semap/normal.hpp"

namespace semap {

GpRegressor::GpRegressor(TrainingData train, Hyperparameters theta, KernelType kernel)
    : train_(std::move(train)), theta_(std::move(theta)), kernel_(kernel) {
    if (train_.inputs.cols() != train_.targets.size()) {
        throw InputError("GpRegressor: inputs/targets size mismatch");
    }
    if (train_.empty()) {
        return;
    }
    const Eigen::MatrixXd Ky =
        cov_matrix(train_.inputs, train_.inputs, theta_, /*add_noise=*/true, kernel_).values;
    chol_.compute(Ky);
    if (chol_.info() != Eigen::Success) {
        throw NumericalError("GpRegressor: Cholesky factorization of the " +
                             std::to_string(train_.size()) + "x" + std::to_string(train_.size()) +
                             " noisy training covariance failed after jitter");
    }
    alpha_ = chol_.solve((train_.targets.array() - theta_.mean_const).matrix());
}

LatentPrediction GpRegressor::predict(const Eigen::VectorXd& x_star) const {
    const double k_star_star = kernel_value(kernel_, x_star, x_star, theta_);
    if (train_.empty()) {
        return {theta_.mean_const, k_star_star};
    }
    const Eigen::VectorXd k_star =
        cov_matrix(train_.inputs, x_star, theta_, /*add_noise=*/false, kernel_).values.col(0);
    LatentPrediction p;
    p.mean = k_star.dot(alpha_) + theta_.mean_const;
    const Eigen::VectorXd v = chol_.matrixL().solve(k_star);
    p.variance = std::max(0.0, k_star_star - v.squaredNorm());
    return p;
}

LatentPrediction gp_predict(const TrainingData& train, const Hyperparameters& theta,
                            const Eigen::VectorXd& x_star, KernelType kernel) {
    return GpRegressor(train, theta, kernel).predict(x_star);
}

NlmlResult nlml(const TrainingData& train, const Hyperparameters& theta, KernelType kernel) {
    if (train.inputs.cols() != train.targets.size()) {
        throw InputError("nlml: inputs/targets size mismatch");
    }
    const Eigen::Index n = train.size();
    const int d = theta.input_dim();

    const Eigen::MatrixXd Ky =
        cov_matrix(train.inputs, train.inputs, theta, /*add_noise=*/true, kernel).values;
    Eigen::LLT<Eigen::MatrixXd> chol(Ky);
    if (chol.info() != Eigen::Success) {
        throw NumericalError("nlml: Cholesky factorization failed after jitter (n = " +
                             std::to_string(n) + ")");
    }
    const Eigen::VectorXd resid = train.targets.array() - theta.mean_const;
    const Eigen::VectorXd alpha = chol.solve(resid);

    NlmlResult r;
    r.data_fit = 0.5 * resid.dot(alpha);
    r.complexity = Eigen::MatrixXd(chol.matrixL()).diagonal().array().log().sum();
    r.constant = 0.5 * static_cast<double>(n) * kLog2Pi;
    r.value = r.data_fit + r.complexity + r.constant;

    // d nlml / d theta_h = 1/2 tr((K_y^-1 - alpha alpha^T) dK_h)
    const Eigen::MatrixXd Kinv = chol.solve(Eigen::MatrixXd::Identity(n, n));
    const std::vector<Eigen::MatrixXd> dK = cov_grad(train.inputs, theta, kernel);
    r.gradient.resize(Hyperparameters::packed_size(d));
    for (int h = 0; h < d + 2; ++h) {
        const double tr_kinv = Kinv.cwiseProduct(dK[h]).sum();
        const double quad = alpha.dot(dK[h] * alpha);
        r.gradient(h) = 0.5 * (tr_kinv - quad);
    }
    r.gradient(d + 2) = -alpha.sum();  // d/d c_m
    return r;
}

}  // namespace semap
