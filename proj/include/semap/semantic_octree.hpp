#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "semap/class_set.hpp"
#include "semap/pointcloud.hpp"

namespace semap {

/// Integer voxel address at the tree's leaf depth. Coordinates are offsets
/// into the 2^depth grid centered on the tree center, so they satisfy
/// 0 <= coordinate < 2^depth.
struct VoxelKey {
    std::uint32_t x = 0;
    std::uint32_t y = 0;
    std::uint32_t z = 0;

    bool operator==(const VoxelKey&) const = default;
};

/// Leaf payload: occupancy log-odds plus per-class observation mass. The
/// semantic belief for class j is class_counts[j] / total_count; counts stay
/// empty until the first labeled observation arrives.
struct SemanticVoxel {
    double log_odds_occ = 0.0;
    std::vector<double> class_counts;  // length n_c once any label is seen
    double total_count = 0.0;

    double occupancy() const { return 1.0 / (1.0 + std::exp(-log_odds_occ)); }
};

/// Sensor model and clamping bounds for occupancy updates.
struct OctreeParams {
    double resolution = 0.02;  // leaf edge length, meters
    int max_depth = 16;
    double p_hit = 0.7;
    double p_miss = 0.4;
    double clamp_min = -2.0;
    double clamp_max = 3.5;
    Eigen::Vector3d center = Eigen::Vector3d::Zero();
};

/// Occupancy result for one queried location.
struct VoxelQuery {
    double occupancy = 0.5;
    Eigen::VectorXd class_belief;               // zeros when no labels were fused
    std::optional<std::uint16_t> hard_label;    // argmax of belief, ties to lowest index
};

/// Counts of what one insert_scan call did.
struct InsertSummary {
    std::size_t hits = 0;
    std::size_t misses = 0;
    std::size_t skipped_points = 0;  // coincident with origin or outside the grid
};

/// Occupancy octree with per-voxel label averaging. Voxels update
/// independently: endpoints as hits, ray-traversed voxels as misses, and a
/// labeled endpoint folds its label (one-hot or soft vector) into the
/// endpoint voxel's counts. Single writer; concurrent reads are safe while
/// no insert_scan is running.
class SemanticOctree {
public:
    SemanticOctree(OctreeParams params, ClassSet class_set);

    const OctreeParams& params() const { return params_; }
    const ClassSet& class_set() const { return class_set_; }
    std::size_t leaf_count() const { return leaf_count_; }

    /// Voxel key containing a world point, or nullopt outside the grid.
    std::optional<VoxelKey> key_of(const Eigen::Vector3d& p) const;

    /// World center of a voxel.
    Eigen::Vector3d center_of(const VoxelKey& key) const;

    /// Ray-casts every point from the origin, applying miss updates along
    /// each ray and a hit plus label update at the endpoint. Points
    /// coincident with the origin or addressing voxels outside the grid are
    /// skipped and counted. Labels come from cloud.label_probs when present,
    /// else cloud.labels; a label id missing from the class set throws
    /// InputError.
    InsertSummary insert_scan(const Eigen::Vector3d& origin, const LabeledPointCloud& cloud);

    /// Folds one labeled observation into a voxel: one-hot for a hard label,
    /// the given distribution for a soft one (must be length n_c, sum 1).
    void update_semantics(SemanticVoxel& voxel, std::uint16_t label) const;
    void update_semantics(SemanticVoxel& voxel, const Eigen::VectorXd& label_probs) const;

    /// Never-observed locations return nullopt.
    std::optional<VoxelQuery> query_voxel(const Eigen::Vector3d& location) const;

    /// All leaves with occupancy strictly above the threshold, in
    /// deterministic (z-order traversal) order. Threshold must lie in (0,1).
    std::vector<std::pair<VoxelKey, const SemanticVoxel*>> occupied_leaves(double threshold) const;

    /// Binary dump of the occupied leaves (threshold 0.5): header with
    /// magic, version, resolution, class count, depth, center, then one
    /// record per leaf with the key, float32 log-odds, and float32 counts.
    void save(const std::string& path) const;
    static SemanticOctree load(const std::string& path, const ClassSet& class_set);

    /// Occupied-voxel centers as a cloud, colored by each voxel's hard
    /// label through the class set (grey when a voxel has no labels).
    LabeledPointCloud export_colored_points(double threshold) const;

private:
    struct Node {
        std::array<std::unique_ptr<Node>, 8> children;
        std::unique_ptr<SemanticVoxel> voxel;  // set on leaves only
    };

    SemanticVoxel& leaf_at(const VoxelKey& key);
    const SemanticVoxel* find_leaf(const VoxelKey& key) const;
    void apply_occupancy(SemanticVoxel& voxel, double delta);

    OctreeParams params_;
    ClassSet class_set_;
    std::unique_ptr<Node> root_;
    std::size_t leaf_count_ = 0;
    double log_odds_hit_ = 0.0;
    double log_odds_miss_ = 0.0;
};

}  // namespace semap
