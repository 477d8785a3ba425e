#include "semap/semantic_map.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>

#include "semap/errors.hpp"

namespace semap {

namespace {

// Constant-mean prior for classes with no positive training example;
// Phi(-6 / sqrt(1 + sigma_f^2)) keeps their probability a small constant.
constexpr double kDegenerateMean = -6.0;

/// Seeded sample of k distinct entries from pool, returned sorted.
std::vector<Eigen::Index> sample_without_replacement(std::vector<Eigen::Index> pool,
                                                     std::size_t k, std::mt19937_64& rng) {
    if (k >= pool.size()) {
        std::sort(pool.begin(), pool.end());
        return pool;
    }
    for (std::size_t i = 0; i < k; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
        std::swap(pool[i], pool[pick(rng)]);
    }
    pool.resize(k);
    std::sort(pool.begin(), pool.end());
    return pool;
}

Hyperparameters adapt_dim(const Hyperparameters& theta, int d) {
    if (theta.input_dim() == d) return theta;
    Hyperparameters out = theta;
    const double log_ls = theta.input_dim() > 0 ? theta.log_lengthscales.mean()
                                                : std::log(0.5);
    out.log_lengthscales = Eigen::VectorXd::Constant(d, log_ls);
    return out;
}

void write_bytes(std::ofstream& out, const void* p, std::size_t n) {
    out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

void read_bytes(std::ifstream& in, void* p, std::size_t n, const char* what) {
    in.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in.gcount()) != n) {
        throw ParseError(std::string("model file truncated reading ") + what,
                         static_cast<std::size_t>(std::max<std::streamoff>(
                             0, static_cast<std::streamoff>(in.tellg()))));
    }
}

constexpr std::uint8_t kModelVersion = 1;
constexpr char kModelMagic[7] = {'S', 'E', 'M', 'A', 'P', 'G', 'P'};

}  // namespace

TrainingSubset select_training_subset(const LabeledPointCloud& cloud, Eigen::Index max_points,
                                      std::uint64_t seed) {
    cloud.validate();
    if (max_points < 1) {
        throw InputError("select_training_subset: max_points must be >= 1");
    }
    std::vector<Eigen::Index> labeled;
    for (Eigen::Index i = 0; i < cloud.n(); ++i) {
        if (cloud.is_labeled(i)) labeled.push_back(i);
    }
    if (labeled.empty()) {
        throw InputError("select_training_subset: the cloud has no labeled point");
    }
    std::mt19937_64 rng(seed);
    const std::vector<Eigen::Index> chosen =
        sample_without_replacement(std::move(labeled), static_cast<std::size_t>(max_points), rng);

    TrainingSubset subset;
    subset.inputs.resize(3, static_cast<Eigen::Index>(chosen.size()));
    subset.labels.reserve(chosen.size());
    subset.source_indices = chosen;
    for (std::size_t i = 0; i < chosen.size(); ++i) {
        subset.inputs.col(static_cast<Eigen::Index>(i)) = cloud.points.col(chosen[i]);
        subset.labels.push_back(cloud.labels[static_cast<std::size_t>(chosen[i])]);
    }
    return subset;
}

GpsmModel::GpsmModel(Eigen::MatrixXd inputs, std::vector<std::uint16_t> labels,
                     const ClassSet& class_set, const GpsmConfig& config)
    : class_set_(class_set),
      inputs_(std::move(inputs)),
      labels_(std::move(labels)),
      backend_(config.backend),
      kernel_(config.kernel) {
    const Eigen::Index n_t = inputs_.cols();
    const int d = static_cast<int>(inputs_.rows());
    if (n_t < 1) {
        throw InputError("train_gpsm: training set is empty");
    }
    if (static_cast<Eigen::Index>(labels_.size()) != n_t) {
        throw InputError("train_gpsm: label count does not match input count");
    }
    for (std::uint16_t lab : labels_) {
        if (!class_set_.contains(lab)) {
            throw InputError("train_gpsm: label " + std::to_string(lab) +
                             " is not in the class set");
        }
    }

    const Hyperparameters theta0 = adapt_dim(config.theta0, d);
    if (backend_ == GpsmConfig::Backend::Fitc) {
        const Eigen::Index n_u = std::min(config.n_inducing, n_t);
        if (n_u < 1) {
            throw InputError("train_gpsm: n_inducing must be >= 1");
        }
        inducing_indices_ =
            select_inducing(inputs_, n_u, InducingSelection::UniformRandom, config.seed);
    }

    const int n_c = class_set_.size();
    classes_.reserve(static_cast<std::size_t>(n_c));
    for (int j = 0; j < n_c; ++j) {
        ClassModel cm;
        cm.theta = theta0;
        Eigen::VectorXd targets(n_t);
        std::vector<Eigen::Index> positives;
        for (Eigen::Index i = 0; i < n_t; ++i) {
            const bool pos = labels_[static_cast<std::size_t>(i)] == class_set_.at(j).id;
            targets(i) = pos ? 1.0 : -1.0;
            if (pos) positives.push_back(i);
        }

        if (positives.empty()) {
            cm.degenerate = true;
            cm.theta.mean_const = kDegenerateMean;
            classes_.push_back(std::move(cm));
            continue;
        }

        if (config.optimize) {
            // The marginal-likelihood objective is cubic in the subset size,
            // so tune on a stratified subsample and reuse theta for the full
            // fit. Positives are retained up to half the budget so rare
            // classes stay visible to the objective.
            TrainingData tune;
            const Eigen::Index budget = std::max<Eigen::Index>(config.optimize_subsample, 16);
            if (n_t <= budget && backend_ == GpsmConfig::Backend::Exact) {
                tune.inputs = inputs_;
                tune.targets = targets;
            } else {
                std::mt19937_64 rng(config.seed + 0x9e3779b97f4a7c15ULL *
                                                       static_cast<std::uint64_t>(j + 1));
                std::vector<Eigen::Index> negatives;
                for (Eigen::Index i = 0; i < n_t; ++i) {
                    if (targets(i) < 0.0) negatives.push_back(i);
                }
                const std::size_t n_pos_keep = std::min<std::size_t>(
                    positives.size(), static_cast<std::size_t>(budget) / 2);
                std::vector<Eigen::Index> keep =
                    sample_without_replacement(positives, n_pos_keep, rng);
                const std::vector<Eigen::Index> neg_keep = sample_without_replacement(
                    std::move(negatives), static_cast<std::size_t>(budget) - keep.size(), rng);
                keep.insert(keep.end(), neg_keep.begin(), neg_keep.end());
                std::sort(keep.begin(), keep.end());
                tune.inputs.resize(d, static_cast<Eigen::Index>(keep.size()));
                tune.targets.resize(static_cast<Eigen::Index>(keep.size()));
                for (std::size_t i = 0; i < keep.size(); ++i) {
                    tune.inputs.col(static_cast<Eigen::Index>(i)) = inputs_.col(keep[i]);
                    tune.targets(static_cast<Eigen::Index>(i)) = targets(keep[i]);
                }
            }
            OptimizeOptions opts;
            opts.objective = Objective::LaplaceNlml;
            opts.kernel = kernel_;
            opts.max_evals = config.optimize_budget;
            opts.optimize_noise = false;  // probit link: no noise parameter
            opts.optimize_mean = true;
            cm.theta = optimize_hyperparameters(tune, cm.theta, opts).theta;
        }

        if (backend_ == GpsmConfig::Backend::Exact) {
            cm.train.inputs = inputs_;
            cm.train.targets = std::move(targets);
            cm.state = laplace_fit(cm.train, cm.theta, kernel_);
        } else {
            TrainingData train_j;
            train_j.inputs = inputs_;
            train_j.targets = std::move(targets);
            cm.fitc = FitcLaplaceClassifier(train_j, inducing_indices_, cm.theta, kernel_);
        }
        classes_.push_back(std::move(cm));
    }
}

GpsmModel::GpsmModel(FromFileTag, Eigen::MatrixXd inputs, std::vector<std::uint16_t> labels,
                     ClassSet class_set, GpsmConfig::Backend backend, KernelType kernel,
                     std::vector<Eigen::Index> inducing, std::vector<Hyperparameters> thetas,
                     std::vector<std::uint8_t> degenerate, std::vector<Eigen::VectorXd> modes)
    : class_set_(std::move(class_set)),
      inputs_(std::move(inputs)),
      labels_(std::move(labels)),
      backend_(backend),
      kernel_(kernel),
      inducing_indices_(std::move(inducing)) {
    const Eigen::Index n_t = inputs_.cols();
    for (int j = 0; j < class_set_.size(); ++j) {
        const std::size_t sj = static_cast<std::size_t>(j);
        ClassModel cm;
        cm.theta = thetas[sj];
        cm.degenerate = degenerate[sj] != 0;
        if (!cm.degenerate) {
            Eigen::VectorXd targets(n_t);
            for (Eigen::Index i = 0; i < n_t; ++i) {
                targets(i) =
                    labels_[static_cast<std::size_t>(i)] == class_set_.at(j).id ? 1.0 : -1.0;
            }
            if (backend_ == GpsmConfig::Backend::Exact) {
                cm.train.inputs = inputs_;
                cm.train.targets = std::move(targets);
                cm.state = laplace_state_at_mode(cm.train, cm.theta, modes[sj], true, kernel_);
            } else {
                TrainingData train_j;
                train_j.inputs = inputs_;
                train_j.targets = std::move(targets);
                cm.fitc = FitcLaplaceClassifier(train_j, inducing_indices_, cm.theta, kernel_,
                                                modes[sj], true);
            }
        }
        classes_.push_back(std::move(cm));
    }
}

Eigen::Index GpsmModel::num_inducing() const {
    return static_cast<Eigen::Index>(inducing_indices_.size());
}

bool GpsmModel::class_degenerate(int class_index) const {
    return classes_.at(static_cast<std::size_t>(class_index)).degenerate;
}

const Hyperparameters& GpsmModel::class_theta(int class_index) const {
    return classes_.at(static_cast<std::size_t>(class_index)).theta;
}

SemanticPrediction GpsmModel::assemble(const Eigen::VectorXd& location,
                                       const std::vector<LatentPrediction>& latents) const {
    SemanticPrediction pred;
    pred.location = location;
    pred.per_class_latent = latents;
    const int n_c = class_set_.size();
    pred.class_probs.resize(n_c);
    double sum = 0.0;
    for (int j = 0; j < n_c; ++j) {
        pred.class_probs(j) = probit_predict(latents[static_cast<std::size_t>(j)]);
        sum += pred.class_probs(j);
    }
    if (sum > 0.0) {
        pred.class_probs /= sum;
    } else {
        // unreachable with the probit link (Phi > 0); defensive fallback
        pred.class_probs.setConstant(1.0 / n_c);
    }
    int best = 0;
    for (int j = 1; j < n_c; ++j) {
        if (pred.class_probs(j) > pred.class_probs(best)) best = j;
    }
    pred.hard_label = class_set_.at(best).id;
    return pred;
}

SemanticPrediction GpsmModel::query(const Eigen::VectorXd& x_star) const {
    std::vector<LatentPrediction> latents;
    latents.reserve(classes_.size());
    for (const ClassModel& cm : classes_) {
        if (cm.degenerate) {
            latents.push_back({cm.theta.mean_const, cm.theta.signal_var()});
        } else if (backend_ == GpsmConfig::Backend::Exact) {
            latents.push_back(laplace_predict_latent(*cm.state, cm.train, cm.theta, x_star,
                                                     kernel_));
        } else {
            latents.push_back(cm.fitc->predict_latent(x_star));
        }
    }
    return assemble(x_star, latents);
}

std::vector<SemanticPrediction> GpsmModel::query_batch(const Eigen::MatrixXd& x_stars) const {
    const Eigen::Index n_q = x_stars.cols();
    const int n_c = class_set_.size();
    std::vector<Eigen::VectorXd> means(static_cast<std::size_t>(n_c));
    std::vector<Eigen::VectorXd> vars(static_cast<std::size_t>(n_c));
    for (int j = 0; j < n_c; ++j) {
        const ClassModel& cm = classes_[static_cast<std::size_t>(j)];
        const std::size_t sj = static_cast<std::size_t>(j);
        if (cm.degenerate) {
            means[sj] = Eigen::VectorXd::Constant(n_q, cm.theta.mean_const);
            vars[sj] = Eigen::VectorXd::Constant(n_q, cm.theta.signal_var());
        } else if (backend_ == GpsmConfig::Backend::Exact) {
            laplace_predict_latent_batch(*cm.state, cm.train, cm.theta, x_stars, means[sj],
                                         vars[sj], kernel_);
        } else {
            cm.fitc->predict_latent_batch(x_stars, means[sj], vars[sj]);
        }
    }

    std::vector<SemanticPrediction> out;
    out.reserve(static_cast<std::size_t>(n_q));
    std::vector<LatentPrediction> latents(static_cast<std::size_t>(n_c));
    for (Eigen::Index q = 0; q < n_q; ++q) {
        for (int j = 0; j < n_c; ++j) {
            const std::size_t sj = static_cast<std::size_t>(j);
            latents[sj] = {means[sj](q), vars[sj](q)};
        }
        out.push_back(assemble(x_stars.col(q), latents));
    }
    return out;
}

void GpsmModel::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw InputError("cannot write model file: " + path);
    }
    write_bytes(out, &kModelVersion, 1);
    write_bytes(out, kModelMagic, sizeof(kModelMagic));
    const std::uint8_t backend = static_cast<std::uint8_t>(backend_);
    const std::uint8_t kernel = static_cast<std::uint8_t>(kernel_);
    write_bytes(out, &backend, 1);
    write_bytes(out, &kernel, 1);

    const std::uint32_t n_c = static_cast<std::uint32_t>(class_set_.size());
    write_bytes(out, &n_c, sizeof(n_c));
    for (const ClassInfo& info : class_set_.classes()) {
        write_bytes(out, &info.id, sizeof(info.id));
        write_bytes(out, info.color.data(), 3);
        const std::uint32_t len = static_cast<std::uint32_t>(info.name.size());
        write_bytes(out, &len, sizeof(len));
        write_bytes(out, info.name.data(), info.name.size());
    }

    const std::uint32_t d = static_cast<std::uint32_t>(inputs_.rows());
    const std::uint64_t n_t = static_cast<std::uint64_t>(inputs_.cols());
    write_bytes(out, &d, sizeof(d));
    write_bytes(out, &n_t, sizeof(n_t));
    write_bytes(out, inputs_.data(), sizeof(double) * inputs_.size());
    write_bytes(out, labels_.data(), sizeof(std::uint16_t) * labels_.size());

    const std::uint64_t n_u = static_cast<std::uint64_t>(inducing_indices_.size());
    write_bytes(out, &n_u, sizeof(n_u));
    for (Eigen::Index idx : inducing_indices_) {
        const std::uint64_t v = static_cast<std::uint64_t>(idx);
        write_bytes(out, &v, sizeof(v));
    }

    for (const ClassModel& cm : classes_) {
        const std::uint8_t degenerate = cm.degenerate ? 1 : 0;
        write_bytes(out, &degenerate, 1);
        write_bytes(out, cm.theta.log_lengthscales.data(),
                    sizeof(double) * cm.theta.log_lengthscales.size());
        write_bytes(out, &cm.theta.log_signal_std, sizeof(double));
        write_bytes(out, &cm.theta.log_noise_std, sizeof(double));
        write_bytes(out, &cm.theta.mean_const, sizeof(double));
        std::uint64_t mode_len = 0;
        const Eigen::VectorXd* mode = nullptr;
        if (!cm.degenerate) {
            mode = backend_ == GpsmConfig::Backend::Exact ? &cm.state->mode : &cm.fitc->mode();
            mode_len = static_cast<std::uint64_t>(mode->size());
        }
        write_bytes(out, &mode_len, sizeof(mode_len));
        if (mode != nullptr) {
            write_bytes(out, mode->data(), sizeof(double) * mode->size());
        }
    }
    if (!out) {
        throw InputError("write failed for model file: " + path);
    }
}

GpsmModel GpsmModel::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw InputError("cannot open model file: " + path);
    }
    std::uint8_t version = 0;
    read_bytes(in, &version, 1, "version");
    if (version != kModelVersion) {
        throw ParseError("unsupported model version " + std::to_string(version), 0);
    }
    char magic[7];
    read_bytes(in, magic, sizeof(magic), "magic");
    if (std::memcmp(magic, kModelMagic, sizeof(kModelMagic)) != 0) {
        throw ParseError("not a semantic map model file (bad magic)", 1);
    }
    std::uint8_t backend_raw = 0, kernel_raw = 0;
    read_bytes(in, &backend_raw, 1, "backend");
    read_bytes(in, &kernel_raw, 1, "kernel");
    if (backend_raw > 1 || kernel_raw > 1) {
        throw ParseError("model file has an unknown backend or kernel tag", 8);
    }

    std::uint32_t n_c = 0;
    read_bytes(in, &n_c, sizeof(n_c), "class count");
    std::vector<ClassInfo> infos;
    for (std::uint32_t j = 0; j < n_c; ++j) {
        ClassInfo info;
        read_bytes(in, &info.id, sizeof(info.id), "class id");
        read_bytes(in, info.color.data(), 3, "class color");
        std::uint32_t len = 0;
        read_bytes(in, &len, sizeof(len), "class name length");
        info.name.resize(len);
        if (len > 0) read_bytes(in, info.name.data(), len, "class name");
        infos.push_back(std::move(info));
    }
    ClassSet class_set(std::move(infos));

    std::uint32_t d = 0;
    std::uint64_t n_t = 0;
    read_bytes(in, &d, sizeof(d), "input dimension");
    read_bytes(in, &n_t, sizeof(n_t), "training count");
    Eigen::MatrixXd inputs(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(n_t));
    read_bytes(in, inputs.data(), sizeof(double) * static_cast<std::size_t>(inputs.size()),
               "training inputs");
    std::vector<std::uint16_t> labels(static_cast<std::size_t>(n_t));
    read_bytes(in, labels.data(), sizeof(std::uint16_t) * labels.size(), "training labels");

    std::uint64_t n_u = 0;
    read_bytes(in, &n_u, sizeof(n_u), "inducing count");
    std::vector<Eigen::Index> inducing(static_cast<std::size_t>(n_u));
    for (std::uint64_t i = 0; i < n_u; ++i) {
        std::uint64_t v = 0;
        read_bytes(in, &v, sizeof(v), "inducing index");
        if (v >= n_t) {
            throw ParseError("inducing index out of range", 0);
        }
        inducing[static_cast<std::size_t>(i)] = static_cast<Eigen::Index>(v);
    }

    std::vector<Hyperparameters> thetas;
    std::vector<std::uint8_t> degenerate;
    std::vector<Eigen::VectorXd> modes;
    for (std::uint32_t j = 0; j < n_c; ++j) {
        std::uint8_t deg = 0;
        read_bytes(in, &deg, 1, "degenerate flag");
        Hyperparameters theta;
        theta.log_lengthscales.resize(static_cast<Eigen::Index>(d));
        read_bytes(in, theta.log_lengthscales.data(), sizeof(double) * d, "lengthscales");
        read_bytes(in, &theta.log_signal_std, sizeof(double), "signal std");
        read_bytes(in, &theta.log_noise_std, sizeof(double), "noise std");
        read_bytes(in, &theta.mean_const, sizeof(double), "mean const");
        std::uint64_t mode_len = 0;
        read_bytes(in, &mode_len, sizeof(mode_len), "mode length");
        Eigen::VectorXd mode(static_cast<Eigen::Index>(mode_len));
        if (mode_len > 0) {
            if (mode_len != n_t) {
                throw ParseError("mode length does not match training count", 0);
            }
            read_bytes(in, mode.data(), sizeof(double) * static_cast<std::size_t>(mode_len),
                       "mode");
        }
        thetas.push_back(std::move(theta));
        degenerate.push_back(deg);
        modes.push_back(std::move(mode));
    }

    return GpsmModel(FromFileTag{}, std::move(inputs), std::move(labels), std::move(class_set),
                     static_cast<GpsmConfig::Backend>(backend_raw),
                     static_cast<KernelType>(kernel_raw), std::move(inducing), std::move(thetas),
                     std::move(degenerate), std::move(modes));
}

GpsmModel train_gpsm(const Eigen::MatrixXd& inputs, const std::vector<std::uint16_t>& labels,
                     const ClassSet& class_set, const GpsmConfig& config) {
    return GpsmModel(inputs, labels, class_set, config);
}

}  // namespace semap
