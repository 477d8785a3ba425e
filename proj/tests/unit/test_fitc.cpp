#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <numeric>
#include <random>

#include "semap/errors.hpp"
#include "semap/fitc.hpp"
#include "support/generators.hpp"

using namespace semap;
namespace st = semap::testing;

TEST_CASE("with all training points inducing, sparse prediction is exact") {
    std::mt19937_64 rng(41);
    for (int rep = 0; rep < 10; ++rep) {
        const int d = 1 + static_cast<int>(rng() % 3);
        const int n = 10 + static_cast<int>(rng() % 51);
        const Hyperparameters h = st::random_hyperparameters(rng, d);
        const TrainingData train = st::random_regression_instance(rng, d, n);

        std::vector<Eigen::Index> all_idx(static_cast<std::size_t>(n));
        std::iota(all_idx.begin(), all_idx.end(), Eigen::Index{0});
        const GpRegressor exact(train, h);
        const FitcModel sparse(train, all_idx, h);
        for (int q = 0; q < 10; ++q) {
            const Eigen::VectorXd x = st::random_inputs(rng, d, 1).col(0);
            const LatentPrediction pe = exact.predict(x);
            const LatentPrediction ps = sparse.predict(x);
            CHECK(std::abs(pe.mean - ps.mean) < 1e-8);
            CHECK(std::abs(pe.variance - ps.variance) < 1e-8);
        }
    }
}

TEST_CASE("degeneracy holds even when the prior covariance is near singular") {
    // dense 1-d sampling with a long lengthscale drives cond(K) past 1e9;
    // the index-matched cross-covariance keeps the collapse exact anyway
    std::mt19937_64 rng(48);
    Hyperparameters h = Hyperparameters::from_values(1, 1.2, 1.0, 0.1, 0.0);
    TrainingData train;
    train.inputs = st::random_inputs(rng, 1, 60);
    train.targets = st::random_targets(rng, 60);
    std::vector<Eigen::Index> all_idx(60);
    std::iota(all_idx.begin(), all_idx.end(), Eigen::Index{0});
    const GpRegressor exact(train, h);
    const FitcModel sparse(train, all_idx, h);
    for (int q = 0; q < 20; ++q) {
        const Eigen::VectorXd x = st::random_inputs(rng, 1, 1).col(0);
        const LatentPrediction pe = exact.predict(x);
        const LatentPrediction ps = sparse.predict(x);
        CHECK(ps.variance >= 0.0);
        CHECK(std::abs(pe.mean - ps.mean) < 1e-8);
        CHECK(std::abs(pe.variance - ps.variance) < 1e-8);
    }
}

TEST_CASE("sparse predictive variance stays within prior bounds") {
    std::mt19937_64 rng(42);
    const Hyperparameters h = st::random_hyperparameters(rng, 3);
    const TrainingData train = st::random_regression_instance(rng, 3, 200);
    const std::vector<Eigen::Index> idx =
        select_inducing(train.inputs, 30, InducingSelection::UniformRandom, 7);
    const FitcModel sparse(train, idx, h);
    for (int q = 0; q < 50; ++q) {
        const Eigen::VectorXd x = st::random_inputs(rng, 3, 1).col(0);
        const LatentPrediction p = sparse.predict(x);
        CHECK(p.variance >= 0.0);
        CHECK(p.variance <= h.signal_var() * (1.0 + 1e-12));
    }
}

TEST_CASE("inducing point selection is deterministic, sorted, and in range") {
    std::mt19937_64 rng(43);
    const Eigen::MatrixXd x = st::random_inputs(rng, 3, 100);
    for (InducingSelection method :
         {InducingSelection::UniformRandom, InducingSelection::FarthestPoint}) {
        const auto a = select_inducing(x, 20, method, 12345);
        const auto b = select_inducing(x, 20, method, 12345);
        CHECK(a == b);
        CHECK(a.size() == 20);
        CHECK(std::is_sorted(a.begin(), a.end()));
        CHECK(std::adjacent_find(a.begin(), a.end()) == a.end());  // unique
        CHECK(a.front() >= 0);
        CHECK(a.back() < 100);
    }
    const auto c = select_inducing(x, 20, InducingSelection::UniformRandom, 999);
    const auto d = select_inducing(x, 20, InducingSelection::UniformRandom, 12345);
    CHECK(c != d);
    CHECK_THROWS_AS((void)select_inducing(x, 0, InducingSelection::UniformRandom, 1), InputError);
    CHECK_THROWS_AS((void)select_inducing(x, 101, InducingSelection::UniformRandom, 1),
                    InputError);
}

TEST_CASE("farthest-point selection on a segment picks the endpoints first") {
    Eigen::MatrixXd x(1, 11);
    for (int i = 0; i <= 10; ++i) {
        x(0, i) = static_cast<double>(i);  // 0..10, first column is 0
    }
    const auto idx = select_inducing(x, 3, InducingSelection::FarthestPoint, 0);
    // seed 0, then 10 (farthest from 0), then 5 (max-min between them)
    CHECK(idx == std::vector<Eigen::Index>{0, 5, 10});
}

TEST_CASE("sparse classifier with all points inducing matches the dense one") {
    std::mt19937_64 rng(44);
    for (int rep = 0; rep < 8; ++rep) {
        const int n = 10 + static_cast<int>(rng() % 30);
        const Hyperparameters h = st::random_hyperparameters(rng, 3);
        TrainingData train;
        train.inputs = st::random_inputs(rng, 3, n);
        train.targets = st::random_pm1_labels(rng, n);

        std::vector<Eigen::Index> all_idx(static_cast<std::size_t>(n));
        std::iota(all_idx.begin(), all_idx.end(), Eigen::Index{0});
        const LaplaceState dense = laplace_fit(train, h);
        const FitcLaplaceClassifier sparse(train, all_idx, h);
        REQUIRE(dense.converged);
        REQUIRE(sparse.converged());
        CHECK((dense.mode - sparse.mode()).lpNorm<Eigen::Infinity>() < 1e-7);
        CHECK(sparse.approx_log_marginal() ==
              doctest::Approx(dense.approx_log_marginal).epsilon(1e-7));

        for (int q = 0; q < 5; ++q) {
            const Eigen::VectorXd x = st::random_inputs(rng, 3, 1).col(0);
            const LatentPrediction pd = laplace_predict_latent(dense, train, h, x);
            const LatentPrediction ps = sparse.predict_latent(x);
            CHECK(std::abs(pd.mean - ps.mean) < 1e-7);
            CHECK(std::abs(pd.variance - ps.variance) < 1e-7);
        }
    }
}

TEST_CASE("sparse classifier batch prediction equals the per-query path") {
    std::mt19937_64 rng(45);
    const Hyperparameters h = st::random_hyperparameters(rng, 3);
    TrainingData train;
    train.inputs = st::random_inputs(rng, 3, 80);
    train.targets = st::random_pm1_labels(rng, 80);
    const std::vector<Eigen::Index> idx =
        select_inducing(train.inputs, 16, InducingSelection::FarthestPoint, 0);
    const FitcLaplaceClassifier clf(train, idx, h);

    const Eigen::MatrixXd queries = st::random_inputs(rng, 3, 40);
    Eigen::VectorXd means, vars;
    clf.predict_latent_batch(queries, means, vars);
    for (int q = 0; q < queries.cols(); ++q) {
        const LatentPrediction p = clf.predict_latent(queries.col(q));
        CHECK(std::abs(means(q) - p.mean) < 1e-10);
        CHECK(std::abs(vars(q) - p.variance) < 1e-10);
    }
}

TEST_CASE("rebuilding a sparse classifier from its stored mode reproduces predictions") {
    std::mt19937_64 rng(46);
    const Hyperparameters h = st::random_hyperparameters(rng, 3);
    TrainingData train;
    train.inputs = st::random_inputs(rng, 3, 60);
    train.targets = st::random_pm1_labels(rng, 60);
    const std::vector<Eigen::Index> idx =
        select_inducing(train.inputs, 12, InducingSelection::UniformRandom, 3);
    const FitcLaplaceClassifier fitted(train, idx, h);
    const FitcLaplaceClassifier rebuilt(train, idx, h, KernelType::Matern52, fitted.mode(),
                                        fitted.converged());
    for (int q = 0; q < 20; ++q) {
        const Eigen::VectorXd x = st::random_inputs(rng, 3, 1).col(0);
        const LatentPrediction pf = fitted.predict_latent(x);
        const LatentPrediction pr = rebuilt.predict_latent(x);
        CHECK(pf.mean == doctest::Approx(pr.mean).epsilon(1e-14));
        CHECK(pf.variance == doctest::Approx(pr.variance).epsilon(1e-14));
    }
}

TEST_CASE("more inducing points than training points is rejected") {
    std::mt19937_64 rng(47);
    const Hyperparameters h = st::random_hyperparameters(rng, 2);
    const TrainingData train = st::random_regression_instance(rng, 2, 5);
    const Eigen::MatrixXd too_many = st::random_inputs(rng, 2, 6);
    CHECK_THROWS_AS(FitcModel(train, too_many, h), InputError);
}
