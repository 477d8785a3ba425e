#include "semap/fitc.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "semap/errors.hpp"
#include "semap/normal.hpp"

namespace semap {

namespace {

constexpr double kObjectiveTol = 1e-11;
constexpr int kMaxNewtonIters = 50;

Eigen::MatrixXd chol_lower(const Eigen::MatrixXd& m, const char* context) {
    Eigen::LLT<Eigen::MatrixXd> llt(m);
    if (llt.info() != Eigen::Success) {
        throw NumericalError(std::string(context) + ": Cholesky factorization failed (" +
                             std::to_string(m.rows()) + "x" + std::to_string(m.cols()) + ")");
    }
    return llt.matrixL();
}

Eigen::MatrixXd gather_columns(const Eigen::MatrixXd& x, const std::vector<Eigen::Index>& idx) {
    Eigen::MatrixXd out(x.rows(), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t j = 0; j < idx.size(); ++j) {
        if (idx[j] < 0 || idx[j] >= x.cols()) {
            throw InputError("inducing index " + std::to_string(idx[j]) + " out of range");
        }
        out.col(static_cast<Eigen::Index>(j)) = x.col(idx[j]);
    }
    return out;
}

/// Inducing/training cross-covariance. Entries that pair an inducing point
/// with the training column it was taken from are self-covariances of one
/// latent value and get the diagonal jitter, keeping the prior internally
/// consistent when the inducing set grows toward the full training set.
Eigen::MatrixXd cross_cov(const Eigen::MatrixXd& inducing, const TrainingData& train,
                          const Hyperparameters& theta, KernelType kernel,
                          const std::vector<Eigen::Index>* indices) {
    Eigen::MatrixXd kuf = cov_matrix(inducing, train.inputs, theta, /*add_noise=*/false,
                                     kernel).values;
    if (indices != nullptr) {
        for (std::size_t j = 0; j < indices->size(); ++j) {
            kuf(static_cast<Eigen::Index>(j), (*indices)[j]) += theta.jitter();
        }
    }
    return kuf;
}

}  // namespace

FitcModel::FitcModel(const TrainingData& train, const std::vector<Eigen::Index>& inducing_indices,
                     Hyperparameters theta, KernelType kernel)
    : inducing_(gather_columns(train.inputs, inducing_indices)),
      theta_(std::move(theta)),
      kernel_(kernel) {
    fit(train, &inducing_indices);
}

FitcModel::FitcModel(const TrainingData& train, Eigen::MatrixXd inducing_inputs,
                     Hyperparameters theta, KernelType kernel)
    : inducing_(std::move(inducing_inputs)), theta_(std::move(theta)), kernel_(kernel) {
    fit(train, nullptr);
}

void FitcModel::fit(const TrainingData& train, const std::vector<Eigen::Index>* indices) {
    const Eigen::Index n = train.size();
    const Eigen::Index n_u = inducing_.cols();
    if (n_u < 1) {
        throw InputError("fitc_fit: at least one inducing point is required");
    }
    if (n_u > n) {
        throw InputError("fitc_fit: more inducing points than training points");
    }

    chol_kuu_ = chol_lower(self_cov_jittered(inducing_, theta_, kernel_), "fitc_fit K_uu");
    const Eigen::MatrixXd Kuf = cross_cov(inducing_, train, theta_, kernel_, indices);
    const Eigen::MatrixXd A = chol_kuu_.triangularView<Eigen::Lower>().solve(Kuf);

    // Lambda = diag(K_ff - Q_ff) + sigma_n^2, with the training diagonal
    // carrying the same jitter as the exact path.
    const double k_diag = theta_.signal_var() + theta_.jitter();
    const double sn2 = theta_.noise_var();
    Eigen::VectorXd lam_inv(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        lam_inv(i) = 1.0 / (std::max(0.0, k_diag - A.col(i).squaredNorm()) + sn2);
    }

    Eigen::MatrixXd B = A * lam_inv.asDiagonal() * A.transpose();
    B.diagonal().array() += 1.0;
    chol_sigma_ = chol_lower(B, "fitc_fit system");

    const Eigen::VectorXd resid = train.targets.array() - theta_.mean_const;
    beta_ = chol_sigma_.triangularView<Eigen::Lower>().solve(A * lam_inv.cwiseProduct(resid));
}

LatentPrediction FitcModel::predict(const Eigen::VectorXd& x_star) const {
    const Eigen::VectorXd k_u =
        cov_matrix(inducing_, x_star, theta_, /*add_noise=*/false, kernel_).values.col(0);
    const double k_star_star = kernel_value(kernel_, x_star, x_star, theta_);

    const Eigen::VectorXd a = chol_kuu_.triangularView<Eigen::Lower>().solve(k_u);
    const Eigen::VectorXd b = chol_sigma_.triangularView<Eigen::Lower>().solve(a);

    LatentPrediction p;
    p.mean = b.dot(beta_) + theta_.mean_const;
    p.variance = std::max(0.0, k_star_star - a.squaredNorm() + b.squaredNorm());
    return p;
}

FitcModel fitc_fit(const TrainingData& train, const std::vector<Eigen::Index>& inducing_indices,
                   const Hyperparameters& theta, KernelType kernel) {
    return FitcModel(train, inducing_indices, theta, kernel);
}

std::vector<Eigen::Index> select_inducing(const Eigen::MatrixXd& inputs, Eigen::Index n_u,
                                          InducingSelection method, std::uint64_t seed) {
    const Eigen::Index n = inputs.cols();
    if (n_u < 1 || n_u > n) {
        throw InputError("select_inducing: need 1 <= n_u <= n_t");
    }
    std::vector<Eigen::Index> chosen;
    chosen.reserve(static_cast<std::size_t>(n_u));

    if (method == InducingSelection::UniformRandom) {
        std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
        std::iota(idx.begin(), idx.end(), Eigen::Index{0});
        std::mt19937_64 rng(seed);
        for (Eigen::Index i = 0; i < n_u; ++i) {
            std::uniform_int_distribution<Eigen::Index> pick(i, n - 1);
            std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(pick(rng))]);
        }
        chosen.assign(idx.begin(), idx.begin() + n_u);
    } else {
        // Greedy max-min selection, seeded at the first column.
        Eigen::VectorXd min_dist = Eigen::VectorXd::Constant(n, std::numeric_limits<double>::max());
        Eigen::Index current = 0;
        chosen.push_back(current);
        for (Eigen::Index k = 1; k < n_u; ++k) {
            Eigen::Index best = -1;
            double best_dist = -1.0;
            for (Eigen::Index i = 0; i < n; ++i) {
                const double dist = (inputs.col(i) - inputs.col(current)).squaredNorm();
                min_dist(i) = std::min(min_dist(i), dist);
                if (min_dist(i) > best_dist) {
                    best_dist = min_dist(i);
                    best = i;
                }
            }
            current = best;
            chosen.push_back(current);
        }
    }
    std::sort(chosen.begin(), chosen.end());
    return chosen;
}

// ---------------------------------------------------------------------------
// FITC-backed Laplace classification
// ---------------------------------------------------------------------------

namespace {

// Low-rank plus diagonal prior covariance K = V^T V + diag(D), with Woodbury
// machinery for B = I + W^1/2 K W^1/2 solves at a given W.
struct FitcPrior {
    Eigen::MatrixXd v;  // n_u x n, V = L_uu^-1 K_uf
    Eigen::VectorXd d;  // FITC diagonal correction, >= 0

    Eigen::VectorXd apply(const Eigen::VectorXd& x) const {
        return v.transpose() * (v * x) + d.cwiseProduct(x);
    }
};

FitcPrior build_prior(const Eigen::MatrixXd& chol_kuu, const Eigen::MatrixXd& inducing,
                      const TrainingData& train, const Hyperparameters& theta, KernelType kernel,
                      const std::vector<Eigen::Index>& indices) {
    FitcPrior prior;
    prior.v = chol_kuu.triangularView<Eigen::Lower>().solve(
        cross_cov(inducing, train, theta, kernel, &indices));
    const double k_diag = theta.signal_var() + theta.jitter();
    prior.d.resize(train.size());
    for (Eigen::Index i = 0; i < train.size(); ++i) {
        prior.d(i) = std::max(0.0, k_diag - prior.v.col(i).squaredNorm());
    }
    return prior;
}

struct WoodburySolver {
    Eigen::VectorXd t_inv;   // (1 + w.*d)^-1
    Eigen::MatrixXd p;       // n x n_u, diag(sqrt_w) V^T
    Eigen::MatrixXd chol_g;  // lower factor of I + P^T T^-1 P
    double log_det_b = 0.0;

    WoodburySolver(const FitcPrior& prior, const Eigen::VectorXd& w) {
        const Eigen::VectorXd sqrt_w = w.cwiseSqrt();
        const Eigen::VectorXd t = (1.0 + w.array() * prior.d.array()).matrix();
        t_inv = t.cwiseInverse();
        p = sqrt_w.asDiagonal() * prior.v.transpose();
        Eigen::MatrixXd g = p.transpose() * t_inv.asDiagonal() * p;
        g.diagonal().array() += 1.0;
        chol_g = chol_lower(g, "fitc laplace inner system");
        log_det_b = t.array().log().sum() + 2.0 * chol_g.diagonal().array().log().sum();
    }

    Eigen::VectorXd solve(const Eigen::VectorXd& r) const {
        const Eigen::VectorXd tr = t_inv.cwiseProduct(r);
        const Eigen::VectorXd inner =
            chol_g.triangularView<Eigen::Lower>().solve(p.transpose() * tr);
        const Eigen::VectorXd outer =
            chol_g.transpose().triangularView<Eigen::Upper>().solve(inner);
        return tr - t_inv.cwiseProduct(p * outer);
    }

    Eigen::MatrixXd solve_cols(const Eigen::MatrixXd& r) const {
        const Eigen::MatrixXd tr = t_inv.asDiagonal() * r;
        const Eigen::MatrixXd inner =
            chol_g.triangularView<Eigen::Lower>().solve(p.transpose() * tr);
        const Eigen::MatrixXd outer =
            chol_g.transpose().triangularView<Eigen::Upper>().solve(inner);
        return tr - t_inv.asDiagonal() * (p * outer);
    }
};

double log_lik_sum(const Eigen::VectorXd& targets, const Eigen::VectorXd& f) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < f.size(); ++i) {
        s += norm_log_cdf(targets(i) * f(i));
    }
    return s;
}

}  // namespace

FitcLaplaceClassifier::FitcLaplaceClassifier(const TrainingData& train,
                                             std::vector<Eigen::Index> inducing_indices,
                                             Hyperparameters theta, KernelType kernel)
    : indices_(std::move(inducing_indices)),
      inducing_(gather_columns(train.inputs, indices_)),
      theta_(std::move(theta)),
      kernel_(kernel) {
    const Eigen::Index n = train.size();
    const double c_m = theta_.mean_const;

    const Eigen::MatrixXd chol_kuu =
        chol_lower(self_cov_jittered(inducing_, theta_, kernel_), "fitc laplace K_uu");
    const FitcPrior prior = build_prior(chol_kuu, inducing_, train, theta_, kernel_, indices_);

    Eigen::VectorXd a = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd Ka = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd f = Eigen::VectorXd::Constant(n, c_m);
    double obj = -0.5 * a.dot(Ka) + log_lik_sum(train.targets, f);
    double log_det_b = 0.0;

    int iter = 0;
    for (; iter < kMaxNewtonIters; ++iter) {
        const ProbitDerivs derivs = probit_derivs(train.targets, f);
        const Eigen::VectorXd sqrt_w = derivs.w.cwiseSqrt();
        const WoodburySolver solver(prior, derivs.w);
        log_det_b = solver.log_det_b;

        const Eigen::VectorXd b =
            derivs.w.cwiseProduct(f - Eigen::VectorXd::Constant(n, c_m)) + derivs.d1;
        const Eigen::VectorXd a_new =
            b - sqrt_w.cwiseProduct(solver.solve(sqrt_w.cwiseProduct(prior.apply(b))));

        const Eigen::VectorXd da = a_new - a;
        double step = 1.0;
        double obj_new;
        Eigen::VectorXd a_try, Ka_try, f_try;
        for (int ls = 0; ls < 20; ++ls) {
            a_try = a + step * da;
            Ka_try = prior.apply(a_try);
            f_try = Ka_try.array() + c_m;
            obj_new = -0.5 * a_try.dot(Ka_try) + log_lik_sum(train.targets, f_try);
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

    mode_ = f;
    converged_ = iter < kMaxNewtonIters;
    iterations_ = iter;
    approx_log_marginal_ = -0.5 * a.dot(Ka) + log_lik_sum(train.targets, f) - 0.5 * log_det_b;
    finalize(train);
}

FitcLaplaceClassifier::FitcLaplaceClassifier(const TrainingData& train,
                                             std::vector<Eigen::Index> inducing_indices,
                                             Hyperparameters theta, KernelType kernel,
                                             Eigen::VectorXd mode, bool converged)
    : indices_(std::move(inducing_indices)),
      inducing_(gather_columns(train.inputs, indices_)),
      theta_(std::move(theta)),
      kernel_(kernel),
      mode_(std::move(mode)),
      converged_(converged) {
    if (mode_.size() != train.size()) {
        throw InputError("FitcLaplaceClassifier: stored mode length does not match training set");
    }
    finalize(train);
}

void FitcLaplaceClassifier::finalize(const TrainingData& train) {
    const Eigen::MatrixXd chol_kuu =
        chol_lower(self_cov_jittered(inducing_, theta_, kernel_), "fitc laplace K_uu");
    const FitcPrior prior = build_prior(chol_kuu, inducing_, train, theta_, kernel_, indices_);

    const ProbitDerivs derivs = probit_derivs(train.targets, mode_);
    const Eigen::VectorXd sqrt_w = derivs.w.cwiseSqrt();
    const WoodburySolver solver(prior, derivs.w);

    // mean(x*) = c_m + k_u*^T K_uu^-1 K_uf grad = c_m + k_u*^T w_
    w_ = chol_kuu.transpose().triangularView<Eigen::Upper>().solve(prior.v * derivs.d1);

    // var(x*) = k** - k_u*^T M k_u*,
    // M = K_uu^-1 K_uf W^1/2 B^-1 W^1/2 K_fu K_uu^-1.
    const Eigen::MatrixXd p = sqrt_w.asDiagonal() * prior.v.transpose();      // n x n_u
    const Eigen::MatrixXd inner = p.transpose() * solver.solve_cols(p);       // n_u x n_u
    const Eigen::MatrixXd half = chol_kuu.transpose().triangularView<Eigen::Upper>().solve(inner);
    m_ = chol_kuu.transpose()
             .triangularView<Eigen::Upper>()
             .solve(half.transpose())
             .transpose();
}

LatentPrediction FitcLaplaceClassifier::predict_latent(const Eigen::VectorXd& x_star) const {
    const Eigen::VectorXd k_u =
        cov_matrix(inducing_, x_star, theta_, /*add_noise=*/false, kernel_).values.col(0);
    const double k_star_star = kernel_value(kernel_, x_star, x_star, theta_);
    LatentPrediction p;
    p.mean = k_u.dot(w_) + theta_.mean_const;
    p.variance = std::max(0.0, k_star_star - k_u.dot(m_ * k_u));
    return p;
}

void FitcLaplaceClassifier::predict_latent_batch(const Eigen::MatrixXd& x_stars,
                                                 Eigen::VectorXd& means,
                                                 Eigen::VectorXd& variances) const {
    const Eigen::Index n_q = x_stars.cols();
    const Eigen::MatrixXd k_u =
        cov_matrix(inducing_, x_stars, theta_, /*add_noise=*/false, kernel_).values;
    means = (k_u.transpose() * w_).array() + theta_.mean_const;
    const Eigen::MatrixXd mk = m_ * k_u;
    variances.resize(n_q);
    for (Eigen::Index q = 0; q < n_q; ++q) {
        const double k_star_star = kernel_value(kernel_, x_stars.col(q), x_stars.col(q), theta_);
        variances(q) = std::max(0.0, k_star_star - k_u.col(q).dot(mk.col(q)));
    }
}

}  // namespace semap
