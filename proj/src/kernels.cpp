#include "semap/kernels.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

#include "semap/errors.hpp"

namespace semap {

namespace {

constexpr double kSqrt5 = 2.2360679774997896964091736687313;

void check_dims(const Eigen::VectorXd& x, const Eigen::VectorXd& x_prime,
                const Hyperparameters& theta) {
    if (x.size() != x_prime.size() || x.size() != theta.log_lengthscales.size()) {
        throw InputError("kernel input dimension mismatch: x is " + std::to_string(x.size()) +
                         ", x' is " + std::to_string(x_prime.size()) + ", theta expects " +
                         std::to_string(theta.log_lengthscales.size()));
    }
}

// Scaled squared distance r^2 = sum_d ((x_d - x'_d)/ell_d)^2.
double scaled_sq_dist(const Eigen::VectorXd& x, const Eigen::VectorXd& x_prime,
                      const Eigen::VectorXd& inv_ls) {
    return ((x - x_prime).array() * inv_ls.array()).matrix().squaredNorm();
}

double matern52_from_r2(double r2, double sf2) {
    const double r = std::sqrt(r2);
    const double z = kSqrt5 * r;
    return sf2 * (1.0 + z + (5.0 / 3.0) * r2) * std::exp(-z);
}

double se_from_r2(double r2, double sf2) {
    return sf2 * std::exp(-0.5 * r2);
}

double value_from_r2(KernelType kernel, double r2, double sf2) {
    return kernel == KernelType::Matern52 ? matern52_from_r2(r2, sf2) : se_from_r2(r2, sf2);
}

}  // namespace

double matern52_ard(const Eigen::VectorXd& x, const Eigen::VectorXd& x_prime,
                    const Hyperparameters& theta) {
    check_dims(x, x_prime, theta);
    const Eigen::VectorXd inv_ls = theta.lengthscales().cwiseInverse();
    return matern52_from_r2(scaled_sq_dist(x, x_prime, inv_ls), theta.signal_var());
}

double se_ard(const Eigen::VectorXd& x, const Eigen::VectorXd& x_prime,
              const Hyperparameters& theta) {
    check_dims(x, x_prime, theta);
    const Eigen::VectorXd inv_ls = theta.lengthscales().cwiseInverse();
    return se_from_r2(scaled_sq_dist(x, x_prime, inv_ls), theta.signal_var());
}

double kernel_value(KernelType kernel, const Eigen::VectorXd& x, const Eigen::VectorXd& x_prime,
                    const Hyperparameters& theta) {
    return kernel == KernelType::Matern52 ? matern52_ard(x, x_prime, theta)
                                          : se_ard(x, x_prime, theta);
}

CovMatrix cov_matrix(const Eigen::MatrixXd& X, const Eigen::MatrixXd& X_prime,
                     const Hyperparameters& theta, bool add_noise, KernelType kernel) {
    if (X.rows() != X_prime.rows() || X.rows() != theta.log_lengthscales.size()) {
        throw InputError("cov_matrix: input dimension mismatch");
    }
    if (add_noise && X.cols() != X_prime.cols()) {
        throw InputError("cov_matrix: add_noise requires a square self-covariance (n == m)");
    }
    const Eigen::Index n = X.cols();
    const Eigen::Index m = X_prime.cols();
    const Eigen::VectorXd inv_ls = theta.lengthscales().cwiseInverse();
    const double sf2 = theta.signal_var();

    CovMatrix out;
    out.symmetric = add_noise;
    out.values.resize(n, m);
    for (Eigen::Index j = 0; j < m; ++j) {
        const Eigen::VectorXd xj = X_prime.col(j);
        for (Eigen::Index i = 0; i < n; ++i) {
            const double r2 = ((X.col(i) - xj).array() * inv_ls.array()).matrix().squaredNorm();
            out.values(i, j) = value_from_r2(kernel, r2, sf2);
        }
    }
    if (add_noise) {
        out.values.diagonal().array() += theta.noise_var() + theta.jitter();
    }
    return out;
}

Eigen::MatrixXd self_cov_jittered(const Eigen::MatrixXd& X, const Hyperparameters& theta,
                                  KernelType kernel) {
    Eigen::MatrixXd K = cov_matrix(X, X, theta, /*add_noise=*/false, kernel).values;
    K.diagonal().array() += theta.jitter();
    return K;
}

std::vector<Eigen::MatrixXd> cov_grad(const Eigen::MatrixXd& X, const Hyperparameters& theta,
                                      KernelType kernel) {
    const Eigen::Index n = X.cols();
    const int d = static_cast<int>(X.rows());
    if (d != theta.input_dim()) {
        throw InputError("cov_grad: input dimension mismatch");
    }
    const Eigen::VectorXd inv_ls = theta.lengthscales().cwiseInverse();
    const double sf2 = theta.signal_var();

    std::vector<Eigen::MatrixXd> grads(d + 2, Eigen::MatrixXd::Zero(n, n));
    Eigen::MatrixXd K_nf(n, n);

    Eigen::VectorXd rho(d);  // per-dimension scaled squared distances
    for (Eigen::Index i = 0; i < n; ++i) {
        K_nf(i, i) = sf2;
        for (Eigen::Index j = 0; j < i; ++j) {
            rho = ((X.col(i) - X.col(j)).array() * inv_ls.array()).square();
            const double r2 = rho.sum();
            double k, dk_dlog_ld_scale;
            if (kernel == KernelType::Matern52) {
                const double r = std::sqrt(r2);
                const double e = std::exp(-kSqrt5 * r);
                k = sf2 * (1.0 + kSqrt5 * r + (5.0 / 3.0) * r2) * e;
                // d k / d log ell_d = (5/3) sf2 (1 + sqrt5 r) e^{-sqrt5 r} rho_d
                dk_dlog_ld_scale = (5.0 / 3.0) * sf2 * (1.0 + kSqrt5 * r) * e;
            } else {
                k = sf2 * std::exp(-0.5 * r2);
                // d k / d log ell_d = k rho_d
                dk_dlog_ld_scale = k;
            }
            K_nf(i, j) = K_nf(j, i) = k;
            for (int dd = 0; dd < d; ++dd) {
                const double g = dk_dlog_ld_scale * rho(dd);
                grads[dd](i, j) = g;
                grads[dd](j, i) = g;
            }
        }
    }
    grads[d] = 2.0 * K_nf;
    grads[d + 1] = (2.0 * theta.noise_var()) * Eigen::MatrixXd::Identity(n, n);
    return grads;
}

std::string hyperparameters_to_json(const Hyperparameters& h) {
    nlohmann::json j;
    j["log_lengthscales"] = std::vector<double>(h.log_lengthscales.begin(),
                                                h.log_lengthscales.end());
    j["log_signal_std"] = h.log_signal_std;
    j["log_noise_std"] = h.log_noise_std;
    j["mean_const"] = h.mean_const;
    return j.dump(2);
}

Hyperparameters hyperparameters_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("hyperparameters JSON: ") + e.what(), e.byte);
    }
    Hyperparameters h;
    const auto ls = j.at("log_lengthscales").get<std::vector<double>>();
    h.log_lengthscales = Eigen::Map<const Eigen::VectorXd>(ls.data(),
                                                           static_cast<Eigen::Index>(ls.size()));
    h.log_signal_std = j.at("log_signal_std").get<double>();
    h.log_noise_std = j.at("log_noise_std").get<double>();
    h.mean_const = j.at("mean_const").get<double>();
    return h;
}

}  // namespace semap
