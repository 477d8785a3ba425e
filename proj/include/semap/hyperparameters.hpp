#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>

namespace semap {

/// Kernel/likelihood/mean parameters, stored in log-space so that every
/// optimizer step keeps lengthscales and standard deviations positive.
struct Hyperparameters {
    Eigen::VectorXd log_lengthscales;  // one ARD lengthscale per input dimension
    double log_signal_std = 0.0;       // log sigma_f
    double log_noise_std = std::log(0.1);
    double mean_const = 0.0;           // constant latent mean c_m

    Hyperparameters() = default;

    Hyperparameters(const Eigen::VectorXd& log_ls, double log_sf, double log_sn, double cm)
        : log_lengthscales(log_ls), log_signal_std(log_sf), log_noise_std(log_sn), mean_const(cm) {}

    /// Isotropic constructor from natural-space values.
    static Hyperparameters from_values(int dim, double lengthscale, double signal_std,
                                       double noise_std, double mean = 0.0) {
        Hyperparameters h;
        h.log_lengthscales = Eigen::VectorXd::Constant(dim, std::log(lengthscale));
        h.log_signal_std = std::log(signal_std);
        h.log_noise_std = std::log(noise_std);
        h.mean_const = mean;
        return h;
    }

    int input_dim() const { return static_cast<int>(log_lengthscales.size()); }

    Eigen::VectorXd lengthscales() const { return log_lengthscales.array().exp(); }
    double signal_std() const { return std::exp(log_signal_std); }
    double signal_var() const { return std::exp(2.0 * log_signal_std); }
    double noise_std() const { return std::exp(log_noise_std); }
    double noise_var() const { return std::exp(2.0 * log_noise_std); }

    /// Diagonal jitter added to every training self-covariance before
    /// factorization.
    double jitter() const { return 1e-8 * signal_var(); }

    /// Flat parameter vector [log_lengthscales..., log_signal_std,
    /// log_noise_std, mean_const] used by the optimizer and gradient code.
    Eigen::VectorXd pack() const {
        Eigen::VectorXd v(input_dim() + 3);
        v.head(input_dim()) = log_lengthscales;
        v(input_dim()) = log_signal_std;
        v(input_dim() + 1) = log_noise_std;
        v(input_dim() + 2) = mean_const;
        return v;
    }

    static Hyperparameters unpack(const Eigen::VectorXd& v) {
        const int d = static_cast<int>(v.size()) - 3;
        Hyperparameters h;
        h.log_lengthscales = v.head(d);
        h.log_signal_std = v(d);
        h.log_noise_std = v(d + 1);
        h.mean_const = v(d + 2);
        return h;
    }

    /// Number of packed parameters for input dimension d.
    static int packed_size(int dim) { return dim + 3; }
};

/// JSON (de)serialization with fields log_lengthscales, log_signal_std,
/// log_noise_std, mean_const.
std::string hyperparameters_to_json(const Hyperparameters& h);
Hyperparameters hyperparameters_from_json(const std::string& text);

}  // namespace semap
