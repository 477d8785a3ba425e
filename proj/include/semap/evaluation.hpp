#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "semap/class_set.hpp"

namespace semap {

/// Per-class and averaged AUC. Classes whose AUC is undefined (no positive
/// or no negative ground-truth samples) carry nullopt and are excluded from
/// the mean.
struct AucReport {
    struct PerClass {
        std::uint16_t class_id = 0;
        std::string class_name;
        std::optional<double> auc;
        std::size_t positives = 0;
        std::size_t negatives = 0;
    };

    std::vector<PerClass> per_class;
    double total_auc = 0.0;  // mean of the defined per-class AUCs
    std::size_t classes_evaluated = 0;

    std::string to_json() const;
};

/// One ROC operating point; curves are exported for external plotting.
struct RocPoint {
    double threshold = 0.0;
    double tpr = 0.0;
    double fpr = 0.0;
};

/// Mann-Whitney AUC: the fraction of (positive, negative) pairs ranked
/// correctly, ties counted one half. Computed from average ranks in
/// O(n log n). Returns nullopt when either class is empty.
std::optional<double> binary_auc(const std::vector<double>& scores,
                                 const std::vector<bool>& positives);

/// ROC curve of (threshold, TPR, FPR), one point per distinct score,
/// endpoints included. Thresholds descend.
std::vector<RocPoint> roc_points(const std::vector<double>& scores,
                                 const std::vector<bool>& positives);

/// One-vs-rest AUC per class plus the class-averaged total. predictions[i]
/// is a length-n_c probability vector ordered like class_set; truth[i] is a
/// class id from class_set. Throws EvaluationError when no class has both
/// positives and negatives, InputError on misaligned sizes or foreign ids.
AucReport total_auc(const std::vector<Eigen::VectorXd>& predictions,
                    const std::vector<std::uint16_t>& truth, const ClassSet& class_set);

/// Writes one CSV per class: threshold,tpr,fpr rows for plotting.
void write_roc_csv(const std::vector<RocPoint>& points, const std::string& path);

}  // namespace semap
