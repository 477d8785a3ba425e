#include "semap/laplace.hpp"

#include <cmath>

#include "semap/errors.hpp"
#include "semap/normal.hpp"

namespace semap {

namespace {

constexpr double kObjectiveTol = 1e-11;
constexpr int kMaxNewtonIters = 50;

void check_binary_targets(const Eigen::VectorXd& y) {
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        if (y(i) != 1.0 && y(i) != -1.0) {
            throw InputError("classification targets must be exactly +1 or -1 (entry " +
                             std::to_string(i) + " is " + std::to_string(y(i)) + ")");
        }
    }
}

// Unnormalized log posterior Psi(a) = -1/2 a^T K a + log p(y | m + K a),
// tracked in a-coordinates so the K^-1 quadratic never needs a solve.
double psi(const Eigen::VectorXd& a, const Eigen::VectorXd& Ka, const Eigen::VectorXd& targets,
           const Eigen::VectorXd& f) {
    double log_lik = 0.0;
    for (Eigen::Index i = 0; i < f.size(); ++i) {
        log_lik += norm_log_cdf(targets(i) * f(i));
    }
    return -0.5 * a.dot(Ka) + log_lik;
}

}  // namespace

ProbitDerivs probit_derivs(const Eigen::VectorXd& targets, const Eigen::VectorXd& f) {
    const Eigen::Index n = f.size();
    ProbitDerivs d;
    d.log_lik.resize(n);
    d.d1.resize(n);
    d.w.resize(n);
    d.d3.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double y = targets(i);
        const double z = y * f(i);
        const double u = norm_pdf_over_cdf(z);
        const double zu = z + u;
        d.log_lik(i) = norm_log_cdf(z);
        d.d1(i) = y * u;
        d.w(i) = std::max(0.0, u * zu);  // log-concave likelihood: W >= 0
        d.d3(i) = y * u * (zu * zu + u * zu - 1.0);
    }
    return d;
}

LaplaceState laplace_fit(const TrainingData& train, const Hyperparameters& theta,
                         KernelType kernel) {
    check_binary_targets(train.targets);
    const Eigen::Index n = train.size();
    const Eigen::MatrixXd K = self_cov_jittered(train.inputs, theta, kernel);
    const double c_m = theta.mean_const;

    LaplaceState state;
    Eigen::VectorXd a = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd Ka = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd f = Eigen::VectorXd::Constant(n, c_m);
    double obj = psi(a, Ka, train.targets, f);

    Eigen::LLT<Eigen::MatrixXd> chol_b;
    ProbitDerivs derivs;
    int iter = 0;
    for (; iter < kMaxNewtonIters; ++iter) {
        derivs = probit_derivs(train.targets, f);
        const Eigen::VectorXd sqrt_w = derivs.w.cwiseSqrt();

        Eigen::MatrixXd B = sqrt_w.asDiagonal() * K * sqrt_w.asDiagonal();
        B.diagonal().array() += 1.0;
        chol_b.compute(B);
        if (chol_b.info() != Eigen::Success) {
            throw NumericalError("laplace_fit: factorization of B failed (n = " +
                                 std::to_string(n) + ")");
        }

        // Newton step, GPML-style: a_new = b - W^1/2 B^-1 W^1/2 K b.
        const Eigen::VectorXd b = derivs.w.cwiseProduct(f - Eigen::VectorXd::Constant(n, c_m)) +
                                  derivs.d1;
        const Eigen::VectorXd a_new =
            b - sqrt_w.cwiseProduct(chol_b.solve(sqrt_w.cwiseProduct(K * b)));

        // Backtrack along the Newton direction in a-space until Psi improves.
        const Eigen::VectorXd da = a_new - a;
        double step = 1.0;
        double obj_new;
        Eigen::VectorXd a_try, Ka_try, f_try;
        for (int ls = 0; ls < 20; ++ls) {
            a_try = a + step * da;
            Ka_try = K * a_try;
            f_try = Ka_try.array() + c_m;
            obj_new = psi(a_try, Ka_try, train.targets, f_try);
            if (obj_new >= obj || std::abs(obj_new - obj) < kObjectiveTol) {
                break;
            }
            step *= 0.5;
        }
        a = a_try;
        Ka = Ka_try;
        f = f_try;
        const double delta = obj_new - obj;
        obj = obj_new;
        if (std::abs(delta) < kObjectiveTol) {
            ++iter;
            break;
        }
    }

    // Refresh curvature and the B factorization at the final mode.
    derivs = probit_derivs(train.targets, f);
    state.sqrt_w = derivs.w.cwiseSqrt();
    Eigen::MatrixXd B = state.sqrt_w.asDiagonal() * K * state.sqrt_w.asDiagonal();
    B.diagonal().array() += 1.0;
    Eigen::LLT<Eigen::MatrixXd> chol_final(B);
    if (chol_final.info() != Eigen::Success) {
        throw NumericalError("laplace_fit: factorization of B failed at the mode");
    }

    state.mode = f;
    state.neg_hessian_diag = derivs.w;
    state.grad_log_lik = derivs.d1;
    state.alpha = a;
    state.chol_b = chol_final.matrixL();
    state.iterations = iter;
    state.converged = iter < kMaxNewtonIters;
    state.mode_grad_inf_norm = (derivs.d1 - a).lpNorm<Eigen::Infinity>();
    const double log_det_b = state.chol_b.diagonal().array().log().sum();
    state.approx_log_marginal = -0.5 * a.dot(Ka) + derivs.log_lik.sum() - log_det_b;
    return state;
}

LaplaceState laplace_state_at_mode(const TrainingData& train, const Hyperparameters& theta,
                                   const Eigen::VectorXd& mode, bool converged,
                                   KernelType kernel) {
    check_binary_targets(train.targets);
    const Eigen::Index n = train.size();
    if (mode.size() != n) {
        throw InputError("laplace_state_at_mode: mode length does not match training size");
    }
    const Eigen::MatrixXd K = self_cov_jittered(train.inputs, theta, kernel);
    Eigen::LLT<Eigen::MatrixXd> chol_k(K);
    if (chol_k.info() != Eigen::Success) {
        throw NumericalError("laplace_state_at_mode: covariance factorization failed");
    }
    const Eigen::VectorXd f = mode;
    const Eigen::VectorXd a =
        chol_k.solve((f.array() - theta.mean_const).matrix());

    const ProbitDerivs derivs = probit_derivs(train.targets, f);
    LaplaceState state;
    state.sqrt_w = derivs.w.cwiseSqrt();
    Eigen::MatrixXd B = state.sqrt_w.asDiagonal() * K * state.sqrt_w.asDiagonal();
    B.diagonal().array() += 1.0;
    Eigen::LLT<Eigen::MatrixXd> chol_b(B);
    if (chol_b.info() != Eigen::Success) {
        throw NumericalError("laplace_state_at_mode: factorization of B failed");
    }
    state.mode = f;
    state.neg_hessian_diag = derivs.w;
    state.grad_log_lik = derivs.d1;
    state.alpha = a;
    state.chol_b = chol_b.matrixL();
    state.iterations = 0;
    state.converged = converged;
    state.mode_grad_inf_norm = (derivs.d1 - a).lpNorm<Eigen::Infinity>();
    const double log_det_b = state.chol_b.diagonal().array().log().sum();
    state.approx_log_marginal =
        -0.5 * a.dot((f.array() - theta.mean_const).matrix()) + derivs.log_lik.sum() - log_det_b;
    return state;
}

LatentPrediction laplace_predict_latent(const LaplaceState& state, const TrainingData& train,
                                        const Hyperparameters& theta,
                                        const Eigen::VectorXd& x_star, KernelType kernel) {
    const Eigen::VectorXd k_star =
        cov_matrix(train.inputs, x_star, theta, /*add_noise=*/false, kernel).values.col(0);
    const double k_star_star = kernel_value(kernel, x_star, x_star, theta);

    LatentPrediction p;
    p.mean = k_star.dot(state.grad_log_lik) + theta.mean_const;
    const Eigen::VectorXd v = state.chol_b.triangularView<Eigen::Lower>().solve(
        state.sqrt_w.cwiseProduct(k_star));
    p.variance = std::max(0.0, k_star_star - v.squaredNorm());
    return p;
}

void laplace_predict_latent_batch(const LaplaceState& state, const TrainingData& train,
                                  const Hyperparameters& theta, const Eigen::MatrixXd& x_stars,
                                  Eigen::VectorXd& means, Eigen::VectorXd& variances,
                                  KernelType kernel) {
    const Eigen::Index n_q = x_stars.cols();
    const Eigen::MatrixXd k_star =
        cov_matrix(train.inputs, x_stars, theta, /*add_noise=*/false, kernel).values;
    means = (k_star.transpose() * state.grad_log_lik).array() + theta.mean_const;
    const Eigen::MatrixXd v = state.chol_b.triangularView<Eigen::Lower>().solve(
        Eigen::MatrixXd(state.sqrt_w.asDiagonal() * k_star));
    variances.resize(n_q);
    for (Eigen::Index q = 0; q < n_q; ++q) {
        const double k_star_star = kernel_value(kernel, x_stars.col(q), x_stars.col(q), theta);
        variances(q) = std::max(0.0, k_star_star - v.col(q).squaredNorm());
    }
}

double probit_predict(const LatentPrediction& latent) {
    if (latent.variance < 0.0) {
        throw InputError("probit_predict: negative latent variance");
    }
    return norm_cdf(latent.mean / std::sqrt(1.0 + latent.variance));
}

LaplaceNlmlResult laplace_nlml(const TrainingData& train, const Hyperparameters& theta,
                               KernelType kernel) {
    const Eigen::Index n = train.size();
    const int d = theta.input_dim();
    const LaplaceState state = laplace_fit(train, theta, kernel);
    const Eigen::MatrixXd K = self_cov_jittered(train.inputs, theta, kernel);

    LaplaceNlmlResult r;
    r.value = -state.approx_log_marginal;
    r.converged = state.converged;

    // Implicit-differentiation gradient of the Laplace evidence
    // (Rasmussen & Williams Alg. 5.1, extended with the constant mean).
    const ProbitDerivs derivs = probit_derivs(train.targets, state.mode);
    const Eigen::VectorXd& sqrt_w = state.sqrt_w;
    const Eigen::Index nn = n;

    // R = W^1/2 B^-1 W^1/2 and the posterior variance diagonal.
    const Eigen::MatrixXd X =
        state.chol_b.triangularView<Eigen::Lower>().solve(Eigen::MatrixXd(sqrt_w.asDiagonal()));
    const Eigen::MatrixXd R = X.transpose() * X;
    const Eigen::MatrixXd C = state.chol_b.triangularView<Eigen::Lower>().solve(
        Eigen::MatrixXd(sqrt_w.asDiagonal() * K));
    Eigen::VectorXd post_var_diag(nn);
    for (Eigen::Index i = 0; i < nn; ++i) {
        post_var_diag(i) = K(i, i) - C.col(i).squaredNorm();
    }
    // dZ/df_hat: only the log det term is non-stationary at the mode, and
    // d log|B| / df_i = -postvar_ii d3_i.
    const Eigen::VectorXd s2 = (0.5 * post_var_diag.array() * derivs.d3.array()).matrix();

    const std::vector<Eigen::MatrixXd> dK = cov_grad(train.inputs, theta, kernel);
    r.gradient = Eigen::VectorXd::Zero(Hyperparameters::packed_size(d));
    for (int h = 0; h <= d; ++h) {  // lengthscales and log sigma_f
        const Eigen::MatrixXd& dKh = dK[h];
        const double s1 =
            0.5 * state.alpha.dot(dKh * state.alpha) - 0.5 * R.cwiseProduct(dKh).sum();
        const Eigen::VectorXd b = dKh * state.grad_log_lik;
        const Eigen::VectorXd s3 = b - K * (R * b);
        r.gradient(h) = -(s1 + s2.dot(s3));
    }
    // log sigma_n has no effect on the classification model; entry d+1 stays 0.

    // Constant mean: dm = 1. Explicit part alpha^T dm, implicit part through
    // the mode shift df_hat/dc_m = (I - K R) 1.
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(nn);
    const Eigen::VectorXd s3_mean = ones - K * (R * ones);
    r.gradient(d + 2) = -(state.alpha.sum() + s2.dot(s3_mean));
    return r;
}

}  // namespace semap
