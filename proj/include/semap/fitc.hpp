#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <vector>

#include "semap/gp.hpp"
#include "semap/laplace.hpp"

namespace semap {

/// Sparse GP regression with the FITC low-rank-plus-diagonal approximation
///   K ~ Q_ff + diag(K_ff - Q_ff),  Q_ff = K_fu K_uu^-1 K_uf.
/// After the fit no operation touches an n_t x n_t dense matrix; prediction
/// is O(n_u^2) per query.
///
/// Inducing points are usually a subset of the training inputs, passed by
/// column index. For those pairs the (u_j, x_idx_j) entry of K_uf is a
/// self-covariance of one latent variable and carries the same diagonal
/// jitter as K_uu, which makes the all-points-inducing case collapse to the
/// exact GP algebraically instead of only up to O(jitter) terms.
class FitcModel {
public:
    FitcModel(const TrainingData& train, const std::vector<Eigen::Index>& inducing_indices,
              Hyperparameters theta, KernelType kernel = KernelType::Matern52);

    /// Free-standing inducing locations (grid layouts and the like); no
    /// coincidence credit is applied.
    FitcModel(const TrainingData& train, Eigen::MatrixXd inducing_inputs, Hyperparameters theta,
              KernelType kernel = KernelType::Matern52);

    LatentPrediction predict(const Eigen::VectorXd& x_star) const;

    const Eigen::MatrixXd& inducing_inputs() const { return inducing_; }
    const Hyperparameters& theta() const { return theta_; }
    Eigen::Index num_inducing() const { return inducing_.cols(); }

private:
    void fit(const TrainingData& train, const std::vector<Eigen::Index>* indices);

    Eigen::MatrixXd inducing_;  // d x n_u
    Hyperparameters theta_;
    KernelType kernel_;
    Eigen::MatrixXd chol_kuu_;    // lower factor of K_uu + jitter I
    Eigen::MatrixXd chol_sigma_;  // lower factor of B = I + A Lam^-1 A^T
    Eigen::VectorXd beta_;        // chol_sigma^-1 A Lam^-1 (y - c_m)
};

FitcModel fitc_fit(const TrainingData& train, const std::vector<Eigen::Index>& inducing_indices,
                   const Hyperparameters& theta, KernelType kernel = KernelType::Matern52);

inline LatentPrediction fitc_predict(const FitcModel& model, const Eigen::VectorXd& x_star) {
    return model.predict(x_star);
}

enum class InducingSelection : std::uint8_t {
    UniformRandom = 0,
    FarthestPoint = 1,
};

/// Pick n_u inducing points from the columns of inputs. UniformRandom draws
/// a seeded subsample; FarthestPoint runs greedy max-min selection starting
/// from the first column. Returns sorted column indices.
std::vector<Eigen::Index> select_inducing(const Eigen::MatrixXd& inputs, Eigen::Index n_u,
                                          InducingSelection method, std::uint64_t seed);

/// Binary probit GPC whose prior covariance is the FITC approximation; the
/// Laplace mode is found with Woodbury solves so fitting costs O(n_t n_u^2)
/// and each latent query costs O(n_u^2). Inducing points are training
/// columns, selected by index.
class FitcLaplaceClassifier {
public:
    FitcLaplaceClassifier(const TrainingData& train, std::vector<Eigen::Index> inducing_indices,
                          Hyperparameters theta, KernelType kernel = KernelType::Matern52);

    /// Rebuild the prediction caches from a previously computed mode
    /// (deserialization path; skips the Newton iteration).
    FitcLaplaceClassifier(const TrainingData& train, std::vector<Eigen::Index> inducing_indices,
                          Hyperparameters theta, KernelType kernel, Eigen::VectorXd mode,
                          bool converged);

    LatentPrediction predict_latent(const Eigen::VectorXd& x_star) const;

    /// Latent means/variances for every column of x_stars in one pass.
    void predict_latent_batch(const Eigen::MatrixXd& x_stars, Eigen::VectorXd& means,
                              Eigen::VectorXd& variances) const;

    const Eigen::VectorXd& mode() const { return mode_; }
    bool converged() const { return converged_; }
    double approx_log_marginal() const { return approx_log_marginal_; }
    const Eigen::MatrixXd& inducing_inputs() const { return inducing_; }
    const std::vector<Eigen::Index>& inducing_indices() const { return indices_; }

private:
    void finalize(const TrainingData& train);

    std::vector<Eigen::Index> indices_;
    Eigen::MatrixXd inducing_;
    Hyperparameters theta_;
    KernelType kernel_;
    Eigen::VectorXd mode_;
    bool converged_ = false;
    int iterations_ = 0;
    double approx_log_marginal_ = 0.0;
    // Prediction caches: mean = c_m + k_u*^T w_, var = k** - k_u*^T M_ k_u*.
    Eigen::VectorXd w_;
    Eigen::MatrixXd m_;
};

}  // namespace semap
