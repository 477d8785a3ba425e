#include "semap/evaluation.hpp"

#include <algorithm>
#include <fstream>
#include <json.hpp>
#include <limits>
#include <numeric>

#include "semap/errors.hpp"

namespace semap {

std::optional<double> binary_auc(const std::vector<double>& scores,
                                 const std::vector<bool>& positives) {
    if (scores.size() != positives.size()) {
        throw InputError("binary_auc: scores and positives differ in length");
    }
    const std::size_t n = scores.size();
    std::size_t n_pos = 0;
    for (bool p : positives) n_pos += p ? 1 : 0;
    const std::size_t n_neg = n - n_pos;
    if (n_pos == 0 || n_neg == 0) return std::nullopt;

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // rank-sum form of the Mann-Whitney statistic; tied scores share their
    // average rank, which yields exactly the half-credit pair count
    double rank_sum_pos = 0.0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j < n && scores[order[j]] == scores[order[i]]) ++j;
        const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // ranks are 1-based
        for (std::size_t k = i; k < j; ++k) {
            if (positives[order[k]]) rank_sum_pos += avg_rank;
        }
        i = j;
    }
    const double u_stat =
        rank_sum_pos - 0.5 * static_cast<double>(n_pos) * static_cast<double>(n_pos + 1);
    return u_stat / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

std::vector<RocPoint> roc_points(const std::vector<double>& scores,
                                 const std::vector<bool>& positives) {
    if (scores.size() != positives.size()) {
        throw InputError("roc_points: scores and positives differ in length");
    }
    std::size_t n_pos = 0;
    for (bool p : positives) n_pos += p ? 1 : 0;
    const std::size_t n_neg = scores.size() - n_pos;

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    std::vector<RocPoint> curve;
    curve.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
    std::size_t tp = 0, fp = 0;
    std::size_t i = 0;
    while (i < order.size()) {
        const double s = scores[order[i]];
        while (i < order.size() && scores[order[i]] == s) {
            if (positives[order[i]]) {
                ++tp;
            } else {
                ++fp;
            }
            ++i;
        }
        RocPoint pt;
        pt.threshold = s;
        pt.tpr = n_pos > 0 ? static_cast<double>(tp) / static_cast<double>(n_pos) : 0.0;
        pt.fpr = n_neg > 0 ? static_cast<double>(fp) / static_cast<double>(n_neg) : 0.0;
        curve.push_back(pt);
    }
    return curve;
}

AucReport total_auc(const std::vector<Eigen::VectorXd>& predictions,
                    const std::vector<std::uint16_t>& truth, const ClassSet& class_set) {
    if (predictions.size() != truth.size()) {
        throw InputError("total_auc: predictions and truth differ in length");
    }
    const int n_c = class_set.size();
    for (const Eigen::VectorXd& p : predictions) {
        if (p.size() != n_c) {
            throw InputError("total_auc: prediction vector length does not match class set");
        }
    }
    for (std::uint16_t t : truth) {
        if (!class_set.contains(t)) {
            throw InputError("total_auc: ground-truth label " + std::to_string(t) +
                             " is not in the class set");
        }
    }

    AucReport report;
    double sum = 0.0;
    for (int j = 0; j < n_c; ++j) {
        const ClassInfo& info = class_set.at(j);
        std::vector<double> scores(predictions.size());
        std::vector<bool> positives(predictions.size());
        for (std::size_t i = 0; i < predictions.size(); ++i) {
            scores[i] = predictions[i](j);
            positives[i] = truth[i] == info.id;
        }
        AucReport::PerClass pc;
        pc.class_id = info.id;
        pc.class_name = info.name;
        pc.positives = static_cast<std::size_t>(
            std::count(positives.begin(), positives.end(), true));
        pc.negatives = predictions.size() - pc.positives;
        pc.auc = binary_auc(scores, positives);
        if (pc.auc) {
            sum += *pc.auc;
            ++report.classes_evaluated;
        }
        report.per_class.push_back(std::move(pc));
    }
    if (report.classes_evaluated == 0) {
        throw EvaluationError("total_auc: no class has both positive and negative samples");
    }
    report.total_auc = sum / static_cast<double>(report.classes_evaluated);
    return report;
}

std::string AucReport::to_json() const {
    nlohmann::json doc;
    doc["total_auc"] = total_auc;
    doc["classes_evaluated"] = classes_evaluated;
    doc["per_class"] = nlohmann::json::array();
    for (const PerClass& pc : per_class) {
        nlohmann::json entry;
        entry["class_id"] = pc.class_id;
        entry["class_name"] = pc.class_name;
        if (pc.auc) {
            entry["auc"] = *pc.auc;
        } else {
            entry["auc"] = nullptr;
        }
        entry["positives"] = pc.positives;
        entry["negatives"] = pc.negatives;
        doc["per_class"].push_back(std::move(entry));
    }
    return doc.dump(2) + "\n";
}

void write_roc_csv(const std::vector<RocPoint>& points, const std::string& path) {
    std::ofstream out(path);
    if (!out) {
        throw InputError("cannot write ROC CSV: " + path);
    }
    out << "threshold,tpr,fpr\n";
    for (const RocPoint& p : points) {
        out << p.threshold << "," << p.tpr << "," << p.fpr << "\n";
    }
}

}  // namespace semap
