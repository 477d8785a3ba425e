#include <CLI11.hpp>

#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "semap/class_set.hpp"
#include "semap/errors.hpp"
#include "semap/evaluation.hpp"
#include "semap/ply_io.hpp"
#include "semap/pointcloud.hpp"
#include "semap/semantic_map.hpp"
#include "semap/semantic_octree.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

/// Configuration mistakes abort with exit code 2 before any heavy work.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Everything the subcommands read. A --config JSON file can supply any
/// field; command-line flags override it.
struct RunConfig {
    std::string config_path;

    // shared
    std::string input;
    std::string classes_path;
    std::string method = "both";  // gpsm | som | both
    std::string out_dir = ".";
    std::uint64_t seed = 0;

    // gp options
    std::string backend = "fitc";  // exact | fitc
    std::int64_t max_train = 4000;
    std::int64_t n_inducing = 256;
    bool optimize = false;
    int optimize_budget = 40;
    double lengthscale0 = 0.5;
    double signal_std0 = 1.0;
    double noise_std0 = 0.1;
    double mean0 = 0.0;

    // som options
    double resolution = 0.02;
    double p_hit = 0.7;
    double p_miss = 0.4;
    double clamp_min = -2.0;
    double clamp_max = 3.5;
    std::vector<double> origin{0.0, 0.0, 0.0};

    // pipeline
    std::int64_t downsample = 1;
    double query_grid = 0.0;  // 0: query at the pre-downsample cloud points

    // eval
    std::string artifacts = ".";
    std::string truth;
    std::string report_path;

    // export
    std::string model_path;
    std::string octree_path;
    std::string query_path;
    std::string output_path;
    double threshold = 0.5;
};

void apply_config_file(RunConfig& cfg, const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open config file: " + path);
    }
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("config file " + path + ": " + e.what());
    }
    if (!doc.is_object()) {
        throw ConfigError("config file must hold a JSON object");
    }
    for (const auto& [key, value] : doc.items()) {
        try {
            if (key == "input") {
                cfg.input = value.get<std::string>();
            } else if (key == "classes") {
                cfg.classes_path = value.get<std::string>();
            } else if (key == "method") {
                cfg.method = value.get<std::string>();
            } else if (key == "out") {
                cfg.out_dir = value.get<std::string>();
            } else if (key == "seed") {
                cfg.seed = value.get<std::uint64_t>();
            } else if (key == "backend") {
                cfg.backend = value.get<std::string>();
            } else if (key == "max_train") {
                cfg.max_train = value.get<std::int64_t>();
            } else if (key == "n_inducing") {
                cfg.n_inducing = value.get<std::int64_t>();
            } else if (key == "optimize") {
                cfg.optimize = value.get<bool>();
            } else if (key == "optimize_budget") {
                cfg.optimize_budget = value.get<int>();
            } else if (key == "lengthscale0") {
                cfg.lengthscale0 = value.get<double>();
            } else if (key == "signal_std0") {
                cfg.signal_std0 = value.get<double>();
            } else if (key == "noise_std0") {
                cfg.noise_std0 = value.get<double>();
            } else if (key == "mean0") {
                cfg.mean0 = value.get<double>();
            } else if (key == "resolution") {
                cfg.resolution = value.get<double>();
            } else if (key == "p_hit") {
                cfg.p_hit = value.get<double>();
            } else if (key == "p_miss") {
                cfg.p_miss = value.get<double>();
            } else if (key == "clamp_min") {
                cfg.clamp_min = value.get<double>();
            } else if (key == "clamp_max") {
                cfg.clamp_max = value.get<double>();
            } else if (key == "origin") {
                cfg.origin = value.get<std::vector<double>>();
            } else if (key == "downsample") {
                cfg.downsample = value.get<std::int64_t>();
            } else if (key == "query_grid") {
                cfg.query_grid = value.get<double>();
            } else if (key == "artifacts") {
                cfg.artifacts = value.get<std::string>();
            } else if (key == "truth") {
                cfg.truth = value.get<std::string>();
            } else if (key == "report") {
                cfg.report_path = value.get<std::string>();
            } else if (key == "model") {
                cfg.model_path = value.get<std::string>();
            } else if (key == "octree") {
                cfg.octree_path = value.get<std::string>();
            } else if (key == "query") {
                cfg.query_path = value.get<std::string>();
            } else if (key == "output") {
                cfg.output_path = value.get<std::string>();
            } else if (key == "threshold") {
                cfg.threshold = value.get<double>();
            } else {
                throw ConfigError("unknown config key: " + key);
            }
        } catch (const json::exception& e) {
            throw ConfigError("config key '" + key + "': " + e.what());
        }
    }
}

/// Names the running stage so failures can report where they happened, and
/// collects per-stage wall-clock seconds for the run summary.
struct StageClock {
    std::string current = "startup";
    std::vector<std::pair<std::string, double>> seconds;

    template <typename F>
    auto run(const std::string& name, F&& f) {
        current = name;
        const auto t0 = std::chrono::steady_clock::now();
        if constexpr (std::is_void_v<std::invoke_result_t<F>>) {
            f();
            record(name, t0);
        } else {
            auto result = f();
            record(name, t0);
            return result;
        }
    }

    void record(const std::string& name, std::chrono::steady_clock::time_point t0) {
        const auto t1 = std::chrono::steady_clock::now();
        seconds.emplace_back(name, std::chrono::duration<double>(t1 - t0).count());
    }

    double total() const {
        double sum = 0.0;
        for (const auto& [name, s] : seconds) sum += s;
        return sum;
    }
};

void require_file(const std::string& path, const std::string& what) {
    if (path.empty()) {
        throw ConfigError(what + " is required");
    }
    if (!fs::exists(path)) {
        throw ConfigError(what + " does not exist: " + path);
    }
}

void validate_ranges(const RunConfig& cfg) {
    if (cfg.method != "gpsm" && cfg.method != "som" && cfg.method != "both") {
        throw ConfigError("method must be gpsm, som, or both");
    }
    if (cfg.backend != "exact" && cfg.backend != "fitc") {
        throw ConfigError("backend must be exact or fitc");
    }
    if (cfg.max_train < 1) throw ConfigError("max_train must be >= 1");
    if (cfg.n_inducing < 1) throw ConfigError("n_inducing must be >= 1");
    if (cfg.optimize_budget < 1) throw ConfigError("optimize_budget must be >= 1");
    if (cfg.lengthscale0 <= 0 || cfg.signal_std0 <= 0 || cfg.noise_std0 <= 0) {
        throw ConfigError("lengthscale0, signal_std0, and noise_std0 must be positive");
    }
    if (cfg.resolution <= 0) throw ConfigError("resolution must be positive");
    if (cfg.p_hit <= 0 || cfg.p_hit >= 1 || cfg.p_miss <= 0 || cfg.p_miss >= 1) {
        throw ConfigError("p_hit and p_miss must lie in (0, 1)");
    }
    if (cfg.clamp_min >= cfg.clamp_max) {
        throw ConfigError("clamp_min must be below clamp_max");
    }
    if (cfg.origin.size() != 3) throw ConfigError("origin needs exactly three coordinates");
    if (cfg.downsample < 1) throw ConfigError("downsample must be >= 1");
    if (cfg.query_grid < 0) throw ConfigError("query_grid must be positive when set");
    if (cfg.threshold <= 0 || cfg.threshold >= 1) {
        throw ConfigError("threshold must lie in (0, 1)");
    }
}

semap::GpsmConfig gp_config(const RunConfig& cfg, int dim) {
    semap::GpsmConfig gc;
    gc.backend = cfg.backend == "exact" ? semap::GpsmConfig::Backend::Exact
                                        : semap::GpsmConfig::Backend::Fitc;
    gc.n_inducing = cfg.n_inducing;
    gc.theta0 = semap::Hyperparameters::from_values(dim, cfg.lengthscale0, cfg.signal_std0,
                                                    cfg.noise_std0, cfg.mean0);
    gc.optimize = cfg.optimize;
    gc.optimize_budget = cfg.optimize_budget;
    gc.seed = cfg.seed;
    return gc;
}

semap::OctreeParams octree_params(const RunConfig& cfg) {
    semap::OctreeParams params;
    params.resolution = cfg.resolution;
    params.p_hit = cfg.p_hit;
    params.p_miss = cfg.p_miss;
    params.clamp_min = cfg.clamp_min;
    params.clamp_max = cfg.clamp_max;
    return params;
}

/// Voxel-center lattice over the cloud's bounding box, used when querying
/// at the raw points is not wanted.
Eigen::MatrixXd grid_queries(const semap::LabeledPointCloud& cloud, double res) {
    const Eigen::Vector3d lo = cloud.points.rowwise().minCoeff();
    const Eigen::Vector3d hi = cloud.points.rowwise().maxCoeff();
    Eigen::Vector3i counts;
    for (int a = 0; a < 3; ++a) {
        counts(a) = std::max(1, static_cast<int>(std::ceil((hi(a) - lo(a)) / res)));
    }
    const std::int64_t total =
        std::int64_t{counts(0)} * counts(1) * counts(2);
    if (total > 20'000'000) {
        throw ConfigError("query grid would hold " + std::to_string(total) +
                          " points; raise --query-grid");
    }
    Eigen::MatrixXd queries(3, total);
    Eigen::Index col = 0;
    for (int i = 0; i < counts(0); ++i) {
        for (int j = 0; j < counts(1); ++j) {
            for (int k = 0; k < counts(2); ++k, ++col) {
                queries.col(col) = lo + res * Eigen::Vector3d(i + 0.5, j + 0.5, k + 0.5);
            }
        }
    }
    return queries;
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw semap::InputError("cannot write " + path);
    }
    out << text;
}

json stages_json(const StageClock& clock) {
    json stages = json::object();
    for (const auto& [name, s] : clock.seconds) stages[name] = s;
    return stages;
}

int cmd_build(RunConfig& cfg, StageClock& clock) {
    require_file(cfg.input, "input cloud (--input)");
    require_file(cfg.classes_path, "class set (--classes)");
    validate_ranges(cfg);
    fs::create_directories(cfg.out_dir);
    const fs::path out(cfg.out_dir);

    const semap::ClassSet class_set = clock.run(
        "load-classes", [&] { return semap::ClassSet::load_json(cfg.classes_path); });
    const semap::LabeledPointCloud cloud = clock.run("load-cloud", [&] {
        semap::LabeledPointCloud c = semap::load_ply(cfg.input);
        c.validate();
        return c;
    });
    std::cout << "loaded " << cloud.n() << " points, " << class_set.size() << " classes\n";

    // query locations default to the cloud before any downsampling, so
    // dropped labels must be inferred
    const Eigen::MatrixXd queries = clock.run("build-queries", [&] {
        return cfg.query_grid > 0 ? grid_queries(cloud, cfg.query_grid)
                                  : Eigen::MatrixXd(cloud.points);
    });

    const semap::LabeledPointCloud train_cloud = clock.run("downsample", [&] {
        return cfg.downsample > 1 ? semap::uniform_downsample(cloud, cfg.downsample) : cloud;
    });
    if (cfg.downsample > 1) {
        std::cout << "downsampled to " << train_cloud.n() << " points (every "
                  << cfg.downsample << "th)\n";
    }

    json summary;
    summary["command"] = "build";
    summary["input"] = cfg.input;
    summary["method"] = cfg.method;
    summary["seed"] = cfg.seed;
    summary["n_c"] = class_set.size();
    summary["n_q"] = queries.cols();
    summary["n_t"] = 0;
    summary["n_u"] = 0;

    const bool want_gpsm = cfg.method != "som";
    const bool want_som = cfg.method != "gpsm";

    if (want_gpsm) {
        const semap::TrainingSubset subset = clock.run("select-training-subset", [&] {
            return semap::select_training_subset(train_cloud, cfg.max_train, cfg.seed);
        });
        const semap::GpsmModel model = clock.run("train-gpsm", [&] {
            return semap::GpsmModel(subset.inputs, subset.labels, class_set,
                                    gp_config(cfg, 3));
        });
        summary["n_t"] = subset.inputs.cols();
        summary["n_u"] = model.num_inducing();
        std::cout << "gpsm trained on " << subset.inputs.cols() << " points ("
                  << cfg.backend << " backend";
        if (model.num_inducing() > 0) {
            std::cout << ", " << model.num_inducing() << " inducing points";
        }
        std::cout << ")\n";

        clock.run("save-gpsm", [&] { model.save((out / "gpsm_model.bin").string()); });
        const std::vector<semap::SemanticPrediction> preds =
            clock.run("query-gpsm", [&] { return model.query_batch(queries); });
        clock.run("export-gpsm", [&] {
            semap::LabeledPointCloud colored;
            colored.points = queries;
            for (const semap::SemanticPrediction& p : preds) {
                const int idx = *class_set.index_of(p.hard_label);
                colored.labels.push_back(p.hard_label);
                colored.colors.push_back(class_set.at(idx).color);
            }
            semap::save_ply(colored, (out / "predictions_gpsm.ply").string());
        });
        std::cout << "gpsm queried " << queries.cols() << " locations\n";
    }

    if (want_som) {
        const Eigen::Vector3d origin(cfg.origin[0], cfg.origin[1], cfg.origin[2]);
        semap::SemanticOctree tree(octree_params(cfg), class_set);
        const semap::InsertSummary ins = clock.run("build-som", [&] {
            return tree.insert_scan(origin, train_cloud);
        });
        summary["som_hits"] = ins.hits;
        summary["som_misses"] = ins.misses;
        summary["som_skipped_points"] = ins.skipped_points;
        const auto occupied = tree.occupied_leaves(cfg.threshold);
        summary["som_occupied_leaves"] = occupied.size();
        std::cout << "som holds " << occupied.size() << " occupied leaves ("
                  << ins.hits << " hits, " << ins.misses << " misses)\n";

        clock.run("save-som", [&] { tree.save((out / "som_octree.bin").string()); });
        clock.run("export-som", [&] {
            semap::save_ply(tree.export_colored_points(cfg.threshold),
                            (out / "predictions_som.ply").string());
        });
    }

    clock.run("write-summary", [&] {
        summary["stages_s"] = stages_json(clock);
        summary["total_s"] = clock.total();
        write_text_file((out / "run_summary.json").string(), summary.dump(2) + "\n");
    });
    std::cout << "artifacts written to " << out.string() << "\n";
    return 0;
}

int cmd_eval(RunConfig& cfg, StageClock& clock) {
    validate_ranges(cfg);
    const fs::path dir(cfg.artifacts);
    if (cfg.model_path.empty()) cfg.model_path = (dir / "gpsm_model.bin").string();
    if (cfg.octree_path.empty()) cfg.octree_path = (dir / "som_octree.bin").string();
    if (cfg.report_path.empty()) cfg.report_path = (dir / "report.json").string();
    require_file(cfg.truth, "ground-truth cloud (--truth)");
    const bool want_gpsm = cfg.method != "som";
    const bool want_som = cfg.method != "gpsm";
    if (want_gpsm) require_file(cfg.model_path, "gpsm model (--model)");
    if (want_som) {
        require_file(cfg.octree_path, "octree dump (--octree)");
        require_file(cfg.classes_path, "class set (--classes, needed to read the octree)");
    }

    const semap::LabeledPointCloud truth = clock.run("load-truth", [&] {
        semap::LabeledPointCloud c = semap::load_ply(cfg.truth);
        c.validate();
        return c;
    });
    std::vector<Eigen::Index> labeled;
    for (Eigen::Index i = 0; i < truth.n(); ++i) {
        if (truth.is_labeled(i)) labeled.push_back(i);
    }
    if (labeled.empty()) {
        throw semap::InputError("ground-truth cloud carries no labels");
    }
    Eigen::MatrixXd locations(3, static_cast<Eigen::Index>(labeled.size()));
    std::vector<std::uint16_t> truth_labels;
    for (std::size_t i = 0; i < labeled.size(); ++i) {
        locations.col(static_cast<Eigen::Index>(i)) = truth.points.col(labeled[i]);
        truth_labels.push_back(truth.labels[static_cast<std::size_t>(labeled[i])]);
    }
    std::cout << "evaluating at " << labeled.size() << " labeled ground-truth points\n";

    json report;
    report["truth"] = cfg.truth;
    report["n_query"] = labeled.size();
    std::optional<double> gpsm_auc;
    std::optional<double> som_auc;

    if (want_gpsm) {
        const semap::GpsmModel model = clock.run(
            "load-gpsm", [&] { return semap::GpsmModel::load(cfg.model_path); });
        if (!cfg.classes_path.empty()) {
            const semap::ClassSet file_set = semap::ClassSet::load_json(cfg.classes_path);
            if (!(file_set == model.class_set())) {
                throw semap::InputError("class set file disagrees with the model's class set");
            }
        }
        const std::vector<semap::SemanticPrediction> preds =
            clock.run("query-gpsm", [&] { return model.query_batch(locations); });
        std::vector<Eigen::VectorXd> probs;
        probs.reserve(preds.size());
        for (const semap::SemanticPrediction& p : preds) probs.push_back(p.class_probs);
        const semap::AucReport auc = clock.run("auc-gpsm", [&] {
            return semap::total_auc(probs, truth_labels, model.class_set());
        });
        report["gpsm"] = json::parse(auc.to_json());
        report["gpsm"]["model"] = cfg.model_path;
        gpsm_auc = auc.total_auc;
        std::cout << "gpsm total_auc " << auc.total_auc << "\n";
    }

    if (want_som) {
        const semap::ClassSet class_set = clock.run(
            "load-classes", [&] { return semap::ClassSet::load_json(cfg.classes_path); });
        const semap::SemanticOctree tree = clock.run("load-som", [&] {
            return semap::SemanticOctree::load(cfg.octree_path, class_set);
        });
        const std::vector<Eigen::VectorXd> probs = clock.run("query-som", [&] {
            // voxels never seen, or seen without labels, fall back to the
            // uninformative uniform belief
            const Eigen::VectorXd uniform = Eigen::VectorXd::Constant(
                class_set.size(), 1.0 / static_cast<double>(class_set.size()));
            std::vector<Eigen::VectorXd> out;
            out.reserve(static_cast<std::size_t>(locations.cols()));
            for (Eigen::Index i = 0; i < locations.cols(); ++i) {
                const auto q = tree.query_voxel(locations.col(i));
                if (q && q->class_belief.sum() > 0) {
                    out.push_back(q->class_belief);
                } else {
                    out.push_back(uniform);
                }
            }
            return out;
        });
        const semap::AucReport auc = clock.run("auc-som", [&] {
            return semap::total_auc(probs, truth_labels, class_set);
        });
        report["som"] = json::parse(auc.to_json());
        report["som"]["octree"] = cfg.octree_path;
        som_auc = auc.total_auc;
        std::cout << "som total_auc " << auc.total_auc << "\n";
    }

    if (gpsm_auc && som_auc) {
        report["comparison"] = {{"gpsm_total_auc", *gpsm_auc},
                                {"som_total_auc", *som_auc},
                                {"margin", *gpsm_auc - *som_auc}};
    }
    clock.run("write-report", [&] {
        report["stages_s"] = stages_json(clock);
        write_text_file(cfg.report_path, report.dump(2) + "\n");
    });
    std::cout << "report written to " << cfg.report_path << "\n";
    return 0;
}

int cmd_toy2d(RunConfig& cfg, StageClock& clock) {
    fs::create_directories(cfg.out_dir);
    const fs::path out(cfg.out_dir);
    const semap::ClassSet class_set({{1, "red", {220, 50, 47}},
                                     {2, "green", {133, 153, 0}},
                                     {3, "blue", {38, 139, 210}}});

    // three well-separated Gaussian blobs in the plane
    const std::vector<Eigen::Vector2d> centers = {
        {0.0, 0.0}, {2.5, 0.0}, {1.25, 2.2}};
    const int per_cluster = 60;
    Eigen::MatrixXd inputs(2, 3 * per_cluster);
    std::vector<std::uint16_t> labels;
    clock.run("generate", [&] {
        std::mt19937_64 rng(cfg.seed);
        std::normal_distribution<double> jitter(0.0, 0.35);
        Eigen::Index col = 0;
        for (std::size_t c = 0; c < centers.size(); ++c) {
            for (int i = 0; i < per_cluster; ++i, ++col) {
                inputs.col(col) = centers[c] + Eigen::Vector2d(jitter(rng), jitter(rng));
                labels.push_back(static_cast<std::uint16_t>(c + 1));
            }
        }
    });

    semap::GpsmConfig gc;
    gc.backend = semap::GpsmConfig::Backend::Exact;
    gc.theta0 = semap::Hyperparameters::from_values(2, 0.8, 2.0, 0.1, 0.0);
    gc.seed = cfg.seed;
    const semap::GpsmModel model = clock.run(
        "train", [&] { return semap::GpsmModel(inputs, labels, class_set, gc); });

    const std::vector<semap::SemanticPrediction> at_train =
        clock.run("query-train", [&] { return model.query_batch(inputs); });
    int correct = 0;
    std::ostringstream train_csv;
    train_csv << "x,y,label,predicted\n" << std::setprecision(17);
    for (std::size_t i = 0; i < at_train.size(); ++i) {
        train_csv << inputs(0, static_cast<Eigen::Index>(i)) << ','
                  << inputs(1, static_cast<Eigen::Index>(i)) << ',' << labels[i] << ','
                  << at_train[i].hard_label << '\n';
        if (at_train[i].hard_label == labels[i]) ++correct;
    }
    std::cout << "training accuracy " << correct << "/" << labels.size() << "\n";

    // dense evaluation lattice spanning the clusters with margin
    const double x_lo = -1.5, x_hi = 4.0, y_lo = -1.5, y_hi = 3.7;
    const int nx = 71, ny = 67;
    std::ostringstream grid_csv;
    grid_csv << "x,y";
    for (const semap::ClassInfo& info : class_set.classes()) {
        grid_csv << ",logp_" << info.name;
    }
    grid_csv << '\n' << std::setprecision(17);
    clock.run("query-grid", [&] {
        Eigen::MatrixXd nodes(2, static_cast<Eigen::Index>(nx) * ny);
        Eigen::Index col = 0;
        for (int i = 0; i < nx; ++i) {
            for (int j = 0; j < ny; ++j, ++col) {
                nodes(0, col) = x_lo + (x_hi - x_lo) * i / (nx - 1);
                nodes(1, col) = y_lo + (y_hi - y_lo) * j / (ny - 1);
            }
        }
        const std::vector<semap::SemanticPrediction> preds = model.query_batch(nodes);
        for (Eigen::Index c = 0; c < nodes.cols(); ++c) {
            grid_csv << nodes(0, c) << ',' << nodes(1, c);
            const Eigen::VectorXd& p = preds[static_cast<std::size_t>(c)].class_probs;
            for (Eigen::Index k = 0; k < p.size(); ++k) {
                grid_csv << ',' << std::log(p(k));
            }
            grid_csv << '\n';
        }
    });

    clock.run("write-output", [&] {
        write_text_file((out / "toy2d_train.csv").string(), train_csv.str());
        write_text_file((out / "toy2d_grid.csv").string(), grid_csv.str());
    });
    std::cout << "toy2d data written to " << out.string() << "\n";
    return 0;
}

int cmd_export(RunConfig& cfg, StageClock& clock) {
    validate_ranges(cfg);
    if (cfg.output_path.empty()) {
        throw ConfigError("output path (--output) is required");
    }
    const bool from_model = !cfg.model_path.empty();
    const bool from_octree = !cfg.octree_path.empty();
    if (from_model == from_octree) {
        throw ConfigError("pass exactly one of --model or --octree");
    }

    semap::LabeledPointCloud colored;
    if (from_model) {
        require_file(cfg.model_path, "gpsm model (--model)");
        require_file(cfg.query_path, "query cloud (--query)");
        const semap::GpsmModel model = clock.run(
            "load-gpsm", [&] { return semap::GpsmModel::load(cfg.model_path); });
        const semap::LabeledPointCloud queries = clock.run(
            "load-queries", [&] { return semap::load_ply(cfg.query_path); });
        const std::vector<semap::SemanticPrediction> preds =
            clock.run("query-gpsm", [&] { return model.query_batch(queries.points); });
        colored.points = queries.points;
        for (const semap::SemanticPrediction& p : preds) {
            const int idx = *model.class_set().index_of(p.hard_label);
            colored.labels.push_back(p.hard_label);
            colored.colors.push_back(model.class_set().at(idx).color);
        }
    } else {
        require_file(cfg.octree_path, "octree dump (--octree)");
        require_file(cfg.classes_path, "class set (--classes)");
        const semap::ClassSet class_set = clock.run(
            "load-classes", [&] { return semap::ClassSet::load_json(cfg.classes_path); });
        const semap::SemanticOctree tree = clock.run("load-som", [&] {
            return semap::SemanticOctree::load(cfg.octree_path, class_set);
        });
        colored = clock.run("export-som",
                            [&] { return tree.export_colored_points(cfg.threshold); });
    }
    clock.run("write-output", [&] { semap::save_ply(colored, cfg.output_path); });
    std::cout << "wrote " << colored.n() << " colored points to " << cfg.output_path << "\n";
    return 0;
}

void add_shared_options(CLI::App* cmd, RunConfig& cfg) {
    cmd->add_option("--config", cfg.config_path, "JSON config file; flags override its values");
    cmd->add_option("--seed", cfg.seed, "RNG seed for every stochastic choice");
}

void add_gp_options(CLI::App* cmd, RunConfig& cfg) {
    cmd->add_option("--backend", cfg.backend, "GP backend: exact or fitc");
    cmd->add_option("--max-train", cfg.max_train, "training subset budget");
    cmd->add_option("--n-inducing", cfg.n_inducing, "FITC inducing point count");
    cmd->add_flag("--optimize", cfg.optimize, "optimize hyperparameters per class");
    cmd->add_option("--optimize-budget", cfg.optimize_budget, "objective evaluations per class");
    cmd->add_option("--lengthscale0", cfg.lengthscale0, "starting lengthscale (meters)");
    cmd->add_option("--signal-std0", cfg.signal_std0, "starting signal standard deviation");
    cmd->add_option("--noise-std0", cfg.noise_std0, "starting noise standard deviation");
    cmd->add_option("--mean0", cfg.mean0, "constant prior mean");
}

void add_som_options(CLI::App* cmd, RunConfig& cfg) {
    cmd->add_option("--resolution", cfg.resolution, "leaf edge length (meters)");
    cmd->add_option("--p-hit", cfg.p_hit, "occupancy probability of a hit");
    cmd->add_option("--p-miss", cfg.p_miss, "occupancy probability of a miss");
    cmd->add_option("--clamp-min", cfg.clamp_min, "log-odds lower clamp");
    cmd->add_option("--clamp-max", cfg.clamp_max, "log-odds upper clamp");
    cmd->add_option("--origin", cfg.origin, "sensor origin for ray casting")->expected(3);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"continuous semantic mapping from labeled point clouds"};
    app.require_subcommand(1);
    RunConfig cfg;

    CLI::App* build = app.add_subcommand("build", "build maps from a labeled cloud");
    build->add_option("--input,-i", cfg.input, "labeled point cloud (PLY)");
    build->add_option("--classes,-c", cfg.classes_path, "class set JSON");
    build->add_option("--method,-m", cfg.method, "gpsm, som, or both");
    build->add_option("--out,-o", cfg.out_dir, "output directory");
    build->add_option("--downsample,-k", cfg.downsample, "keep every k-th point for training");
    build->add_option("--query-grid", cfg.query_grid,
                      "query at a lattice of this spacing instead of the cloud points");
    build->add_option("--threshold", cfg.threshold, "occupancy threshold for exports");
    add_shared_options(build, cfg);
    add_gp_options(build, cfg);
    add_som_options(build, cfg);

    CLI::App* eval = app.add_subcommand("eval", "score built maps against ground truth");
    eval->add_option("--artifacts,-a", cfg.artifacts, "directory holding build outputs");
    eval->add_option("--model", cfg.model_path, "gpsm model path override");
    eval->add_option("--octree", cfg.octree_path, "octree dump path override");
    eval->add_option("--truth,-t", cfg.truth, "ground-truth labeled cloud (PLY)");
    eval->add_option("--classes,-c", cfg.classes_path, "class set JSON");
    eval->add_option("--method,-m", cfg.method, "gpsm, som, or both");
    eval->add_option("--report,-r", cfg.report_path, "report JSON path");
    add_shared_options(eval, cfg);

    CLI::App* toy = app.add_subcommand("toy2d", "two-dimensional classification demo data");
    toy->add_option("--out,-o", cfg.out_dir, "output directory");
    add_shared_options(toy, cfg);

    CLI::App* exp = app.add_subcommand("export", "re-export built artifacts as colored PLY");
    exp->add_option("--model", cfg.model_path, "gpsm model to query");
    exp->add_option("--query", cfg.query_path, "query locations (PLY) for --model");
    exp->add_option("--octree", cfg.octree_path, "octree dump to export");
    exp->add_option("--classes,-c", cfg.classes_path, "class set JSON (octree export)");
    exp->add_option("--threshold", cfg.threshold, "occupancy threshold");
    exp->add_option("--output", cfg.output_path, "destination PLY");
    add_shared_options(exp, cfg);

    StageClock clock;
    try {
        // the config file seeds the defaults, so it must land before parse
        for (int i = 1; i < argc; ++i) {
            const std::string arg = argv[i];
            if (arg == "--config" && i + 1 < argc) {
                apply_config_file(cfg, argv[i + 1]);
                break;
            }
            if (arg.rfind("--config=", 0) == 0) {
                apply_config_file(cfg, arg.substr(9));
                break;
            }
        }

        try {
            app.parse(argc, argv);
        } catch (const CLI::ParseError& e) {
            const int code = app.exit(e);
            return code == 0 ? 0 : 2;
        }

        if (build->parsed()) return cmd_build(cfg, clock);
        if (eval->parsed()) return cmd_eval(cfg, clock);
        if (toy->parsed()) return cmd_toy2d(cfg, clock);
        if (exp->parsed()) return cmd_export(cfg, clock);
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const semap::NumericalError& e) {
        std::cerr << "numerical error in stage '" << clock.current << "': " << e.what() << "\n";
        return 4;
    } catch (const semap::ParseError& e) {
        std::cerr << "data error in stage '" << clock.current << "': " << e.what() << "\n";
        return 3;
    } catch (const semap::EvaluationError& e) {
        std::cerr << "data error in stage '" << clock.current << "': " << e.what() << "\n";
        return 3;
    } catch (const semap::InputError& e) {
        std::cerr << "data error in stage '" << clock.current << "': " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error in stage '" << clock.current << "': " << e.what() << "\n";
        return 1;
    }
}
