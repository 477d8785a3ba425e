#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "semap/gp.hpp"
#include "semap/laplace.hpp"
#include "semap/lbfgs.hpp"
#include "semap/optimize.hpp"
#include "support/generators.hpp"

using namespace semap;
namespace st = semap::testing;

TEST_CASE("quadratic bowl is minimized in a few evaluations") {
    Eigen::MatrixXd a(3, 3);
    a << 4.0, 1.0, 0.0, 1.0, 3.0, 0.5, 0.0, 0.5, 2.0;
    Eigen::VectorXd target(3);
    target << 1.0, -2.0, 0.5;
    const ObjectiveFn fn = [&](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
        const Eigen::VectorXd r = x - target;
        g = a * r;
        return 0.5 * r.dot(a * r);
    };
    const LbfgsResult res = lbfgs_minimize(fn, Eigen::VectorXd::Zero(3));
    CHECK(res.converged);
    CHECK(res.made_progress);
    CHECK((res.x - target).lpNorm<Eigen::Infinity>() < 1e-5);
    CHECK(res.value < 1e-10);
}

TEST_CASE("rosenbrock valley is followed to the optimum") {
    const ObjectiveFn fn = [](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
        const double a = 1.0 - x(0);
        const double b = x(1) - x(0) * x(0);
        g.resize(2);
        g(0) = -2.0 * a - 400.0 * x(0) * b;
        g(1) = 200.0 * b;
        return a * a + 100.0 * b * b;
    };
    Eigen::VectorXd x0(2);
    x0 << -1.2, 1.0;
    LbfgsOptions opts;
    opts.max_evals = 400;
    const LbfgsResult res = lbfgs_minimize(fn, x0, opts);
    CHECK(res.made_progress);
    CHECK(std::abs(res.x(0) - 1.0) < 1e-4);
    CHECK(std::abs(res.x(1) - 1.0) < 1e-4);
}

TEST_CASE("zero budget returns the starting point untouched") {
    int calls = 0;
    const ObjectiveFn fn = [&](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
        ++calls;
        g = 2.0 * x;
        return x.squaredNorm();
    };
    Eigen::VectorXd x0(2);
    x0 << 3.0, -4.0;
    LbfgsOptions opts;
    opts.max_evals = 0;
    const LbfgsResult res = lbfgs_minimize(fn, x0, opts);
    CHECK(res.x == x0);
    CHECK(res.evaluations == 0);
    CHECK(calls == 1);  // the initial evaluation only
    CHECK(!res.made_progress);
}

TEST_CASE("evaluation budget is an upper bound") {
    int calls = 0;
    const ObjectiveFn fn = [&](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
        ++calls;
        const double a = 1.0 - x(0);
        const double b = x(1) - x(0) * x(0);
        g.resize(2);
        g(0) = -2.0 * a - 400.0 * x(0) * b;
        g(1) = 200.0 * b;
        return a * a + 100.0 * b * b;
    };
    Eigen::VectorXd x0(2);
    x0 << -1.2, 1.0;
    LbfgsOptions opts;
    opts.max_evals = 15;
    const LbfgsResult res = lbfgs_minimize(fn, x0, opts);
    CHECK(res.evaluations <= 15 + 1);  // one line-search eval may be in flight at cutoff
    CHECK(calls <= 17);
    CHECK(res.made_progress);
}

TEST_CASE("non-finite regions are stepped around, best point wins") {
    const ObjectiveFn fn = [](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
        if (x(0) < -2.0) {
            g.setZero(1);
            return std::numeric_limits<double>::quiet_NaN();
        }
        g.resize(1);
        g(0) = 2.0 * (x(0) - (-1.5));
        return (x(0) + 1.5) * (x(0) + 1.5);
    };
    Eigen::VectorXd x0(1);
    x0 << 5.0;
    const LbfgsResult res = lbfgs_minimize(fn, x0);
    CHECK(res.made_progress);
    CHECK(std::abs(res.x(0) + 1.5) < 1e-4);
}

TEST_CASE("hyperparameter fit recovers usable values on synthetic regression data") {
    std::mt19937_64 rng(51);
    const int n = 60;
    const Hyperparameters truth = Hyperparameters::from_values(2, 0.7, 1.2, 0.1, 0.4);
    TrainingData train;
    train.inputs = st::random_inputs(rng, 2, n);
    // a sample path surrogate: smooth function plus observation noise
    train.targets.resize(n);
    std::normal_distribution<double> noise(0.0, 0.1);
    for (int i = 0; i < n; ++i) {
        const double v = std::sin(2.0 * train.inputs(0, i)) * std::cos(train.inputs(1, i));
        train.targets(i) = 0.4 + v + noise(rng);
    }

    Hyperparameters start = Hyperparameters::from_values(2, 2.5, 0.3, 0.5, 0.0);
    OptimizeOptions opts;
    opts.max_evals = 80;
    const OptimizeResult res = optimize_hyperparameters(train, start, opts);
    CHECK(res.made_progress);
    CHECK(res.nlml < nlml(train, start).value);
    // fitted noise should land near the generating noise level
    CHECK(res.theta.noise_std() > 0.03);
    CHECK(res.theta.noise_std() < 0.4);
}

TEST_CASE("classification fit leaves the noise parameter untouched") {
    std::mt19937_64 rng(52);
    TrainingData train;
    train.inputs = st::random_inputs(rng, 2, 40);
    train.targets.resize(40);
    for (int i = 0; i < 40; ++i) {
        train.targets(i) = train.inputs(0, i) > 0.0 ? 1.0 : -1.0;
    }
    Hyperparameters start = Hyperparameters::from_values(2, 1.0, 1.0, 0.1, 0.0);
    OptimizeOptions opts;
    opts.objective = Objective::LaplaceNlml;
    opts.max_evals = 40;
    const OptimizeResult res = optimize_hyperparameters(train, start, opts);
    CHECK(res.theta.log_noise_std == start.log_noise_std);
    CHECK(res.made_progress);
    CHECK(res.nlml <= laplace_nlml(train, start).value);
}

TEST_CASE("zero optimizer budget keeps the starting hyperparameters") {
    std::mt19937_64 rng(53);
    const TrainingData train = st::random_regression_instance(rng, 2, 20);
    const Hyperparameters start = st::random_hyperparameters(rng, 2);
    OptimizeOptions opts;
    opts.max_evals = 0;
    const OptimizeResult res = optimize_hyperparameters(train, start, opts);
    CHECK((res.theta.pack() - start.pack()).lpNorm<Eigen::Infinity>() == 0.0);
    CHECK(!res.made_progress);
}
