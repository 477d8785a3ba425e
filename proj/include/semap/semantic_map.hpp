#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "semap/class_set.hpp"
#include "semap/fitc.hpp"
#include "semap/laplace.hpp"
#include "semap/optimize.hpp"
#include "semap/pointcloud.hpp"

namespace semap {

/// Labeled points chosen for GP training: inputs as columns plus the class
/// id of each column, and where each column came from in the source cloud.
struct TrainingSubset {
    Eigen::MatrixXd inputs;  // d x n_t
    std::vector<std::uint16_t> labels;
    std::vector<Eigen::Index> source_indices;
};

/// Keeps only labeled points; when more than max_points remain, draws a
/// seeded uniform subset of exactly max_points (without replacement).
/// Throws InputError when the cloud has no labeled point.
TrainingSubset select_training_subset(const LabeledPointCloud& cloud, Eigen::Index max_points,
                                      std::uint64_t seed);

/// Training configuration for the one-vs-rest stack.
struct GpsmConfig {
    enum class Backend : std::uint8_t { Exact = 0, Fitc = 1 };

    Backend backend = Backend::Fitc;
    Eigen::Index n_inducing = 256;  // fitc only, capped at n_t
    KernelType kernel = KernelType::Matern52;
    /// Starting hyperparameters; lengthscales are broadcast to the input
    /// dimension when theta0 was built for another d.
    Hyperparameters theta0 = Hyperparameters::from_values(3, 0.5, 1.0, 0.1, 0.0);
    /// Minimize the Laplace marginal likelihood per class over
    /// [log_lengthscales, log_sigma_f, mean_const] before fitting.
    bool optimize = false;
    int optimize_budget = 40;
    /// Optimization runs on an exact-GP subsample of at most this many
    /// points when the training set (or the fitc backend) is larger.
    Eigen::Index optimize_subsample = 400;
    std::uint64_t seed = 0;  // inducing selection and optimizer subsample
};

/// Class probabilities at one query location. Probabilities are the
/// normalized per-class probit predictions; hard_label is their argmax with
/// ties broken toward the lowest class index.
struct SemanticPrediction {
    Eigen::VectorXd location;
    Eigen::VectorXd class_probs;  // length n_c, sums to 1
    std::uint16_t hard_label = 0;
    std::vector<LatentPrediction> per_class_latent;
};

/// One-vs-rest semantic GP map: one binary probit classifier per class over
/// a shared training input set. Immutable after construction; queries are
/// safe to run concurrently.
class GpsmModel {
public:
    /// Trains every per-class classifier. Each label must be in class_set;
    /// classes with no positive example get a degenerate always-negative
    /// classifier (flagged, constant probability).
    GpsmModel(Eigen::MatrixXd inputs, std::vector<std::uint16_t> labels,
              const ClassSet& class_set, const GpsmConfig& config);

    SemanticPrediction query(const Eigen::VectorXd& x_star) const;
    std::vector<SemanticPrediction> query_batch(const Eigen::MatrixXd& x_stars) const;

    const ClassSet& class_set() const { return class_set_; }
    const Eigen::MatrixXd& training_inputs() const { return inputs_; }
    const std::vector<std::uint16_t>& training_labels() const { return labels_; }
    GpsmConfig::Backend backend() const { return backend_; }
    KernelType kernel() const { return kernel_; }
    Eigen::Index num_inducing() const;
    bool class_degenerate(int class_index) const;
    const Hyperparameters& class_theta(int class_index) const;

    /// Binary model file: version byte first, little-endian, 64-bit floats.
    /// Stores the class set, training inputs and labels, per-class
    /// hyperparameters and Laplace modes, and the inducing indices.
    void save(const std::string& path) const;
    static GpsmModel load(const std::string& path);

private:
    struct ClassModel {
        Hyperparameters theta;
        bool degenerate = false;
        TrainingData train;                         // exact backend queries only
        std::optional<LaplaceState> state;          // exact backend
        std::optional<FitcLaplaceClassifier> fitc;  // fitc backend
    };

    /// Deserialization constructor: rebuilds classifier caches from modes.
    struct FromFileTag {};
    GpsmModel(FromFileTag, Eigen::MatrixXd inputs, std::vector<std::uint16_t> labels,
              ClassSet class_set, GpsmConfig::Backend backend, KernelType kernel,
              std::vector<Eigen::Index> inducing, std::vector<Hyperparameters> thetas,
              std::vector<std::uint8_t> degenerate, std::vector<Eigen::VectorXd> modes);

    SemanticPrediction assemble(const Eigen::VectorXd& location,
                                const std::vector<LatentPrediction>& latents) const;

    ClassSet class_set_;
    Eigen::MatrixXd inputs_;
    std::vector<std::uint16_t> labels_;
    GpsmConfig::Backend backend_ = GpsmConfig::Backend::Fitc;
    KernelType kernel_ = KernelType::Matern52;
    std::vector<Eigen::Index> inducing_indices_;  // shared by all classes (fitc)
    std::vector<ClassModel> classes_;
};

/// Function-style spelling of the constructor; pairs with
/// select_training_subset for the usual build pipeline.
GpsmModel train_gpsm(const Eigen::MatrixXd& inputs, const std::vector<std::uint16_t>& labels,
                     const ClassSet& class_set, const GpsmConfig& config);

}  // namespace semap
