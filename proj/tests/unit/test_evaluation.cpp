#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "semap/errors.hpp"
#include "semap/evaluation.hpp"

using namespace semap;

namespace {

/// Brute-force Mann-Whitney statistic: enumerate every (positive, negative)
/// pair, full credit for a correctly ordered pair, half for a tie.
double auc_by_pairs(const std::vector<double>& scores, const std::vector<bool>& positives) {
    double credit = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (!positives[i]) continue;
        for (std::size_t j = 0; j < scores.size(); ++j) {
            if (positives[j]) continue;
            ++pairs;
            if (scores[i] > scores[j]) {
                credit += 1.0;
            } else if (scores[i] == scores[j]) {
                credit += 0.5;
            }
        }
    }
    return credit / static_cast<double>(pairs);
}

/// Trapezoidal area under the ROC curve, a second independent oracle.
double auc_by_trapezoid(const std::vector<RocPoint>& curve) {
    double area = 0.0;
    for (std::size_t i = 1; i < curve.size(); ++i) {
        area += 0.5 * (curve[i].tpr + curve[i - 1].tpr) * (curve[i].fpr - curve[i - 1].fpr);
    }
    return area;
}

}  // namespace

TEST_CASE("binary AUC on the worked examples") {
    CHECK(*binary_auc({0.9, 0.8, 0.1, 0.2}, {true, true, false, false}) == 1.0);
    CHECK(*binary_auc({0.9, 0.8, 0.7, 0.85}, {true, true, false, false}) ==
          doctest::Approx(0.75).epsilon(1e-15));
    CHECK(*binary_auc({0.4, 0.4, 0.4, 0.4}, {true, false, true, false}) ==
          doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("single-class inputs have no defined AUC") {
    CHECK(!binary_auc({0.1, 0.2}, {true, true}).has_value());
    CHECK(!binary_auc({0.1, 0.2}, {false, false}).has_value());
    CHECK_THROWS_AS(binary_auc({0.1}, {true, false}), InputError);
}

TEST_CASE("rank-based AUC matches pair enumeration, with heavy ties") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int rep = 0; rep < 60; ++rep) {
        const int n = 5 + static_cast<int>(rng() % 40);
        std::vector<double> scores(static_cast<std::size_t>(n));
        std::vector<bool> positives(static_cast<std::size_t>(n));
        bool any_pos = false, any_neg = false;
        for (int i = 0; i < n; ++i) {
            // quantized scores force tie groups
            scores[static_cast<std::size_t>(i)] = std::round(u(rng) * 8.0) / 8.0;
            const bool p = u(rng) < 0.4;
            positives[static_cast<std::size_t>(i)] = p;
            any_pos |= p;
            any_neg |= !p;
        }
        if (!any_pos || !any_neg) continue;
        const auto fast = binary_auc(scores, positives);
        REQUIRE(fast.has_value());
        CHECK(*fast == doctest::Approx(auc_by_pairs(scores, positives)).epsilon(1e-12));
        CHECK(auc_by_trapezoid(roc_points(scores, positives)) ==
              doctest::Approx(*fast).epsilon(1e-12));
    }
}

TEST_CASE("AUC is invariant under strictly increasing score transforms") {
    std::mt19937_64 rng(19);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> scores(30);
    std::vector<bool> positives(30);
    for (int i = 0; i < 30; ++i) {
        scores[static_cast<std::size_t>(i)] = u(rng);
        positives[static_cast<std::size_t>(i)] = i % 3 == 0;
    }
    std::vector<double> warped = scores;
    for (double& s : warped) s = std::exp(3.0 * s) - 10.0;
    CHECK(*binary_auc(scores, positives) ==
          doctest::Approx(*binary_auc(warped, positives)).epsilon(1e-14));
}

TEST_CASE("AUC of the complementary labeling is one minus the AUC") {
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> scores(25);
    std::vector<bool> positives(25), negated(25);
    for (int i = 0; i < 25; ++i) {
        scores[static_cast<std::size_t>(i)] = std::round(u(rng) * 4.0) / 4.0;
        positives[static_cast<std::size_t>(i)] = i % 2 == 0;
        negated[static_cast<std::size_t>(i)] = !positives[static_cast<std::size_t>(i)];
    }
    CHECK(*binary_auc(scores, positives) + *binary_auc(scores, negated) ==
          doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("ROC curve has monotone endpoints") {
    const auto curve = roc_points({0.9, 0.1, 0.5, 0.5}, {true, false, true, false});
    REQUIRE(curve.size() >= 2);
    CHECK(curve.front().tpr == 0.0);
    CHECK(curve.front().fpr == 0.0);
    CHECK(curve.back().tpr == 1.0);
    CHECK(curve.back().fpr == 1.0);
    for (std::size_t i = 1; i < curve.size(); ++i) {
        CHECK(curve[i].tpr >= curve[i - 1].tpr);
        CHECK(curve[i].fpr >= curve[i - 1].fpr);
    }
}

TEST_CASE("one-hot predictions matching truth score a perfect total AUC") {
    const ClassSet cs({{1, "a", {}}, {2, "b", {}}, {3, "c", {}}});
    std::vector<Eigen::VectorXd> preds;
    std::vector<std::uint16_t> truth = {1, 2, 3, 1, 2, 3};
    for (std::uint16_t t : truth) {
        Eigen::VectorXd p = Eigen::VectorXd::Zero(3);
        p(*cs.index_of(t)) = 1.0;
        preds.push_back(p);
    }
    const AucReport report = total_auc(preds, truth, cs);
    CHECK(report.total_auc == 1.0);
    CHECK(report.classes_evaluated == 3);
    for (const auto& pc : report.per_class) {
        REQUIRE(pc.auc.has_value());
        CHECK(*pc.auc == 1.0);
    }
}

TEST_CASE("uniform predictions score one half per defined class") {
    const ClassSet cs({{1, "a", {}}, {2, "b", {}}});
    std::vector<Eigen::VectorXd> preds(8, Eigen::VectorXd::Constant(2, 0.5));
    std::vector<std::uint16_t> truth = {1, 2, 1, 2, 1, 2, 1, 1};
    const AucReport report = total_auc(preds, truth, cs);
    CHECK(report.total_auc == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("total AUC matches the per-class pair oracle on random instances") {
    const ClassSet cs({{10, "a", {}}, {20, "b", {}}, {30, "c", {}}});
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int rep = 0; rep < 20; ++rep) {
        std::vector<Eigen::VectorXd> preds;
        std::vector<std::uint16_t> truth;
        for (int i = 0; i < 20; ++i) {
            Eigen::VectorXd p(3);
            p << u(rng), u(rng), u(rng);
            p /= p.sum();
            preds.push_back(p);
            truth.push_back(cs.at(static_cast<int>(rng() % 3)).id);
        }
        AucReport report;
        try {
            report = total_auc(preds, truth, cs);
        } catch (const EvaluationError&) {
            continue;  // all-one-class draw
        }
        double expected_sum = 0.0;
        int defined = 0;
        for (int j = 0; j < 3; ++j) {
            std::vector<double> scores;
            std::vector<bool> positives;
            bool any_pos = false, any_neg = false;
            for (std::size_t i = 0; i < preds.size(); ++i) {
                scores.push_back(preds[i](j));
                positives.push_back(truth[i] == cs.at(j).id);
                any_pos |= positives.back();
                any_neg |= !positives.back();
            }
            if (!any_pos || !any_neg) continue;
            expected_sum += auc_by_pairs(scores, positives);
            ++defined;
        }
        CHECK(report.classes_evaluated == static_cast<std::size_t>(defined));
        CHECK(report.total_auc ==
              doctest::Approx(expected_sum / defined).epsilon(1e-12));
    }
}

TEST_CASE("classes missing from the ground truth are excluded from the mean") {
    const ClassSet cs({{1, "a", {}}, {2, "b", {}}, {3, "ghost", {}}});
    std::vector<Eigen::VectorXd> preds;
    std::vector<std::uint16_t> truth = {1, 2, 1, 2};
    for (std::uint16_t t : truth) {
        Eigen::VectorXd p = Eigen::VectorXd::Constant(3, 0.1);
        p(*cs.index_of(t)) = 0.8;
        preds.push_back(p);
    }
    const AucReport report = total_auc(preds, truth, cs);
    CHECK(report.classes_evaluated == 2);
    CHECK(!report.per_class[2].auc.has_value());
    CHECK(report.per_class[2].positives == 0);
}

TEST_CASE("total AUC is invariant under sample permutation") {
    const ClassSet cs({{1, "a", {}}, {2, "b", {}}});
    std::mt19937_64 rng(41);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<Eigen::VectorXd> preds;
    std::vector<std::uint16_t> truth;
    for (int i = 0; i < 15; ++i) {
        Eigen::VectorXd p(2);
        p << u(rng), u(rng);
        preds.push_back(p);
        truth.push_back(i % 2 == 0 ? 1 : 2);
    }
    const double base = total_auc(preds, truth, cs).total_auc;
    std::vector<std::size_t> perm(preds.size());
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<Eigen::VectorXd> preds_p;
    std::vector<std::uint16_t> truth_p;
    for (std::size_t i : perm) {
        preds_p.push_back(preds[i]);
        truth_p.push_back(truth[i]);
    }
    CHECK(total_auc(preds_p, truth_p, cs).total_auc == doctest::Approx(base).epsilon(1e-14));
}

TEST_CASE("evaluation errors surface as exceptions") {
    const ClassSet cs({{1, "a", {}}, {2, "b", {}}});
    std::vector<Eigen::VectorXd> preds(3, Eigen::VectorXd::Constant(2, 0.5));
    CHECK_THROWS_AS(total_auc(preds, {1, 1, 1}, cs), EvaluationError);
    CHECK_THROWS_AS(total_auc(preds, {1, 2}, cs), InputError);
    CHECK_THROWS_AS(total_auc(preds, {1, 2, 9}, cs), InputError);
    std::vector<Eigen::VectorXd> bad(3, Eigen::VectorXd::Constant(3, 0.3));
    CHECK_THROWS_AS(total_auc(bad, {1, 2, 1}, cs), InputError);
}

TEST_CASE("report serializes to JSON with null for undefined AUCs") {
    const ClassSet cs({{1, "a", {}}, {2, "b", {}}, {3, "ghost", {}}});
    std::vector<Eigen::VectorXd> preds;
    std::vector<std::uint16_t> truth = {1, 2, 1, 2};
    for (std::uint16_t t : truth) {
        Eigen::VectorXd p = Eigen::VectorXd::Constant(3, 0.1);
        p(*cs.index_of(t)) = 0.8;
        preds.push_back(p);
    }
    const std::string json = total_auc(preds, truth, cs).to_json();
    CHECK(json.find("\"total_auc\"") != std::string::npos);
    CHECK(json.find("\"ghost\"") != std::string::npos);
    CHECK(json.find("null") != std::string::npos);
}
