#include "semap/optimize.hpp"

#include <vector>

#include "semap/errors.hpp"
#include "semap/laplace.hpp"

namespace semap {

OptimizeResult optimize_hyperparameters(const TrainingData& train, const Hyperparameters& theta0,
                                        const OptimizeOptions& opts) {
    if (train.empty()) {
        throw InputError("optimize_hyperparameters: empty training set");
    }
    const int d = theta0.input_dim();
    if (d != train.dim()) {
        throw InputError("optimize_hyperparameters: lengthscale count does not match input dim");
    }

    // Free coordinates within the packed vector; masked entries stay at
    // their theta0 values.
    std::vector<int> free_idx;
    for (int i = 0; i <= d; ++i) {
        free_idx.push_back(i);  // log lengthscales and log sigma_f
    }
    if (opts.optimize_noise && opts.objective == Objective::ExactNlml) {
        free_idx.push_back(d + 1);
    }
    if (opts.optimize_mean) {
        free_idx.push_back(d + 2);
    }
    const int n_free = static_cast<int>(free_idx.size());
    const Eigen::VectorXd packed0 = theta0.pack();

    auto expand = [&](const Eigen::VectorXd& reduced) {
        Eigen::VectorXd full = packed0;
        for (int i = 0; i < n_free; ++i) {
            full(free_idx[static_cast<std::size_t>(i)]) = reduced(i);
        }
        return Hyperparameters::unpack(full);
    };

    ObjectiveFn fn = [&](const Eigen::VectorXd& reduced, Eigen::VectorXd& grad) {
        const Hyperparameters theta = expand(reduced);
        Eigen::VectorXd full_grad;
        double value;
        if (opts.objective == Objective::ExactNlml) {
            const NlmlResult r = nlml(train, theta, opts.kernel);
            value = r.value;
            full_grad = r.gradient;
        } else {
            const LaplaceNlmlResult r = laplace_nlml(train, theta, opts.kernel);
            value = r.value;
            full_grad = r.gradient;
        }
        grad.resize(n_free);
        for (int i = 0; i < n_free; ++i) {
            grad(i) = full_grad(free_idx[static_cast<std::size_t>(i)]);
        }
        return value;
    };

    Eigen::VectorXd reduced0(n_free);
    for (int i = 0; i < n_free; ++i) {
        reduced0(i) = packed0(free_idx[static_cast<std::size_t>(i)]);
    }

    LbfgsOptions lopts;
    lopts.max_evals = opts.max_evals;
    const LbfgsResult lr = lbfgs_minimize(fn, reduced0, lopts);

    OptimizeResult out;
    out.theta = expand(lr.x);
    out.nlml = lr.value;
    out.evaluations = lr.evaluations;
    out.made_progress = lr.made_progress;
    out.converged = lr.converged;
    return out;
}

}  // namespace semap
