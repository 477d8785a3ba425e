#include "semap/semantic_octree.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include "semap/errors.hpp"

namespace semap {

namespace {

double log_odds(double p) { return std::log(p / (1.0 - p)); }

/// Argmax of the count vector, ties to the lowest index; nullopt when the
/// voxel has never seen a label.
std::optional<int> hard_label_index(const SemanticVoxel& v) {
    if (v.total_count <= 0.0 || v.class_counts.empty()) return std::nullopt;
    int best = 0;
    for (int j = 1; j < static_cast<int>(v.class_counts.size()); ++j) {
        if (v.class_counts[static_cast<std::size_t>(j)] >
            v.class_counts[static_cast<std::size_t>(best)]) {
            best = j;
        }
    }
    return best;
}

void write_bytes(std::ofstream& out, const void* p, std::size_t n) {
    out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

void read_bytes(std::ifstream& in, void* p, std::size_t n, const char* what) {
    in.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in.gcount()) != n) {
        throw ParseError(std::string("octree dump truncated reading ") + what,
                         static_cast<std::size_t>(std::max<std::streamoff>(
                             0, static_cast<std::streamoff>(in.tellg()))));
    }
}

constexpr char kMagic[8] = {'S', 'E', 'M', 'A', 'P', 'O', 'C', 'T'};
constexpr std::uint32_t kDumpVersion = 1;

}  // namespace

SemanticOctree::SemanticOctree(OctreeParams params, ClassSet class_set)
    : params_(std::move(params)), class_set_(std::move(class_set)), root_(std::make_unique<Node>()) {
    if (!(params_.resolution > 0.0)) {
        throw InputError("octree resolution must be positive");
    }
    if (params_.max_depth < 1 || params_.max_depth > 21) {
        throw InputError("octree max_depth must be in [1, 21]");
    }
    if (!(params_.p_hit > 0.0 && params_.p_hit < 1.0) ||
        !(params_.p_miss > 0.0 && params_.p_miss < 1.0)) {
        throw InputError("sensor model probabilities must lie in (0, 1)");
    }
    if (!(params_.clamp_min <= params_.clamp_max)) {
        throw InputError("log-odds clamp bounds are inverted");
    }
    log_odds_hit_ = log_odds(params_.p_hit);
    log_odds_miss_ = log_odds(params_.p_miss);
}

std::optional<VoxelKey> SemanticOctree::key_of(const Eigen::Vector3d& p) const {
    const std::int64_t half = std::int64_t{1} << (params_.max_depth - 1);
    const std::int64_t size = std::int64_t{1} << params_.max_depth;
    VoxelKey key;
    std::uint32_t* coords[3] = {&key.x, &key.y, &key.z};
    for (int i = 0; i < 3; ++i) {
        const double rel = (p(i) - params_.center(i)) / params_.resolution;
        const std::int64_t k = static_cast<std::int64_t>(std::floor(rel)) + half;
        if (k < 0 || k >= size) return std::nullopt;
        *coords[i] = static_cast<std::uint32_t>(k);
    }
    return key;
}

Eigen::Vector3d SemanticOctree::center_of(const VoxelKey& key) const {
    const double half = static_cast<double>(std::int64_t{1} << (params_.max_depth - 1));
    Eigen::Vector3d c;
    const double k[3] = {static_cast<double>(key.x), static_cast<double>(key.y),
                         static_cast<double>(key.z)};
    for (int i = 0; i < 3; ++i) {
        c(i) = params_.center(i) + (k[i] - half + 0.5) * params_.resolution;
    }
    return c;
}

SemanticVoxel& SemanticOctree::leaf_at(const VoxelKey& key) {
    Node* node = root_.get();
    for (int b = params_.max_depth - 1; b >= 0; --b) {
        const unsigned idx = (((key.x >> b) & 1u) << 2) | (((key.y >> b) & 1u) << 1) |
                             ((key.z >> b) & 1u);
        std::unique_ptr<Node>& child = node->children[idx];
        if (!child) child = std::make_unique<Node>();
        node = child.get();
    }
    if (!node->voxel) {
        node->voxel = std::make_unique<SemanticVoxel>();
        ++leaf_count_;
    }
    return *node->voxel;
}

const SemanticVoxel* SemanticOctree::find_leaf(const VoxelKey& key) const {
    const Node* node = root_.get();
    for (int b = params_.max_depth - 1; b >= 0; --b) {
        const unsigned idx = (((key.x >> b) & 1u) << 2) | (((key.y >> b) & 1u) << 1) |
                             ((key.z >> b) & 1u);
        node = node->children[idx].get();
        if (node == nullptr) return nullptr;
    }
    return node->voxel.get();
}

void SemanticOctree::apply_occupancy(SemanticVoxel& voxel, double delta) {
    voxel.log_odds_occ =
        std::clamp(voxel.log_odds_occ + delta, params_.clamp_min, params_.clamp_max);
}

void SemanticOctree::update_semantics(SemanticVoxel& voxel, std::uint16_t label) const {
    const auto idx = class_set_.index_of(label);
    if (!idx) {
        throw InputError("label " + std::to_string(label) + " is not in the class set");
    }
    if (voxel.class_counts.empty()) {
        voxel.class_counts.assign(static_cast<std::size_t>(class_set_.size()), 0.0);
    }
    voxel.class_counts[static_cast<std::size_t>(*idx)] += 1.0;
    voxel.total_count += 1.0;
}

void SemanticOctree::update_semantics(SemanticVoxel& voxel,
                                      const Eigen::VectorXd& label_probs) const {
    if (label_probs.size() != class_set_.size()) {
        throw InputError("soft label vector length does not match the class set");
    }
    if (label_probs.minCoeff() < 0.0 || std::abs(label_probs.sum() - 1.0) > 1e-6) {
        throw InputError("soft label vector is not a probability distribution");
    }
    if (voxel.class_counts.empty()) {
        voxel.class_counts.assign(static_cast<std::size_t>(class_set_.size()), 0.0);
    }
    for (int j = 0; j < label_probs.size(); ++j) {
        voxel.class_counts[static_cast<std::size_t>(j)] += label_probs(j);
    }
    voxel.total_count += 1.0;
}

InsertSummary SemanticOctree::insert_scan(const Eigen::Vector3d& origin,
                                          const LabeledPointCloud& cloud) {
    cloud.validate();
    if (!origin.allFinite()) {
        throw InputError("sensor origin is not finite");
    }
    InsertSummary summary;
    const auto origin_key = key_of(origin);

    for (Eigen::Index i = 0; i < cloud.n(); ++i) {
        const Eigen::Vector3d endpoint = cloud.points.col(i);
        const Eigen::Vector3d d = endpoint - origin;
        if (d.squaredNorm() < 1e-24) {
            ++summary.skipped_points;
            continue;
        }
        const auto end_key = key_of(endpoint);
        if (!end_key || !origin_key) {
            ++summary.skipped_points;
            continue;
        }

        // integer DDA from the origin voxel to the endpoint voxel; both ends
        // are inside the grid, so the whole segment is too
        if (!(*origin_key == *end_key)) {
            const double len = d.norm();
            std::int64_t k[3] = {origin_key->x, origin_key->y, origin_key->z};
            const std::int64_t ke[3] = {end_key->x, end_key->y, end_key->z};
            std::int64_t step[3];
            double t_max[3];
            double t_delta[3];
            const double half = static_cast<double>(std::int64_t{1}
                                                    << (params_.max_depth - 1));
            for (int a = 0; a < 3; ++a) {
                const double dir = d(a) / len;
                if (dir > 0.0) {
                    step[a] = 1;
                    const double boundary =
                        params_.center(a) + (static_cast<double>(k[a]) - half + 1.0) *
                                                params_.resolution;
                    t_max[a] = (boundary - origin(a)) / dir;
                    t_delta[a] = params_.resolution / dir;
                } else if (dir < 0.0) {
                    step[a] = -1;
                    const double boundary =
                        params_.center(a) +
                        (static_cast<double>(k[a]) - half) * params_.resolution;
                    t_max[a] = (boundary - origin(a)) / dir;
                    t_delta[a] = params_.resolution / -dir;
                } else {
                    step[a] = 0;
                    t_max[a] = std::numeric_limits<double>::infinity();
                    t_delta[a] = std::numeric_limits<double>::infinity();
                }
            }
            std::int64_t guard = std::abs(k[0] - ke[0]) + std::abs(k[1] - ke[1]) +
                                 std::abs(k[2] - ke[2]) + 3;
            while (guard-- > 0) {
                apply_occupancy(
                    leaf_at(VoxelKey{static_cast<std::uint32_t>(k[0]),
                                     static_cast<std::uint32_t>(k[1]),
                                     static_cast<std::uint32_t>(k[2])}),
                    log_odds_miss_);
                ++summary.misses;
                int axis = 0;
                if (t_max[1] < t_max[axis]) axis = 1;
                if (t_max[2] < t_max[axis]) axis = 2;
                if (t_max[axis] > len) break;  // numerical corner: ray exhausted
                k[axis] += step[axis];
                t_max[axis] += t_delta[axis];
                if (k[0] == ke[0] && k[1] == ke[1] && k[2] == ke[2]) break;
            }
        }

        SemanticVoxel& voxel = leaf_at(*end_key);
        apply_occupancy(voxel, log_odds_hit_);
        ++summary.hits;
        const std::size_t si = static_cast<std::size_t>(i);
        if (cloud.has_label_probs()) {
            update_semantics(voxel, cloud.label_probs[si]);
        } else if (cloud.is_labeled(i)) {
            update_semantics(voxel, cloud.labels[si]);
        }
    }
    return summary;
}

std::optional<VoxelQuery> SemanticOctree::query_voxel(const Eigen::Vector3d& location) const {
    const auto key = key_of(location);
    if (!key) return std::nullopt;
    const SemanticVoxel* voxel = find_leaf(*key);
    if (voxel == nullptr) return std::nullopt;

    VoxelQuery q;
    q.occupancy = voxel->occupancy();
    q.class_belief = Eigen::VectorXd::Zero(class_set_.size());
    if (const auto best = hard_label_index(*voxel)) {
        for (int j = 0; j < class_set_.size(); ++j) {
            q.class_belief(j) = voxel->class_counts[static_cast<std::size_t>(j)] /
                                voxel->total_count;
        }
        q.hard_label = class_set_.at(*best).id;
    }
    return q;
}

std::vector<std::pair<VoxelKey, const SemanticVoxel*>> SemanticOctree::occupied_leaves(
    double threshold) const {
    if (!(threshold > 0.0 && threshold < 1.0)) {
        throw InputError("occupancy threshold must lie in (0, 1)");
    }
    std::vector<std::pair<VoxelKey, const SemanticVoxel*>> out;
    struct Frame {
        const Node* node;
        VoxelKey key;
        int level;
    };
    std::vector<Frame> stack;
    stack.push_back({root_.get(), VoxelKey{}, params_.max_depth - 1});
    while (!stack.empty()) {
        const Frame f = stack.back();
        stack.pop_back();
        if (f.level < 0) {
            if (f.node->voxel && f.node->voxel->occupancy() > threshold) {
                out.emplace_back(f.key, f.node->voxel.get());
            }
            continue;
        }
        // reverse child order so the stack pops children in ascending index
        for (int idx = 7; idx >= 0; --idx) {
            const Node* child = f.node->children[static_cast<std::size_t>(idx)].get();
            if (child == nullptr) continue;
            VoxelKey key = f.key;
            key.x |= static_cast<std::uint32_t>((idx >> 2) & 1) << f.level;
            key.y |= static_cast<std::uint32_t>((idx >> 1) & 1) << f.level;
            key.z |= static_cast<std::uint32_t>(idx & 1) << f.level;
            stack.push_back({child, key, f.level - 1});
        }
    }
    return out;
}

void SemanticOctree::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw InputError("cannot write octree dump: " + path);
    }
    const auto leaves = occupied_leaves(0.5);
    write_bytes(out, kMagic, sizeof(kMagic));
    write_bytes(out, &kDumpVersion, sizeof(kDumpVersion));
    write_bytes(out, &params_.resolution, sizeof(double));
    const std::uint32_t n_c = static_cast<std::uint32_t>(class_set_.size());
    write_bytes(out, &n_c, sizeof(n_c));
    const std::uint32_t depth = static_cast<std::uint32_t>(params_.max_depth);
    write_bytes(out, &depth, sizeof(depth));
    for (int i = 0; i < 3; ++i) {
        const double c = params_.center(i);
        write_bytes(out, &c, sizeof(c));
    }
    const std::uint64_t count = leaves.size();
    write_bytes(out, &count, sizeof(count));

    std::vector<float> counts(static_cast<std::size_t>(n_c));
    for (const auto& [key, voxel] : leaves) {
        write_bytes(out, &key.x, sizeof(key.x));
        write_bytes(out, &key.y, sizeof(key.y));
        write_bytes(out, &key.z, sizeof(key.z));
        const float lo = static_cast<float>(voxel->log_odds_occ);
        write_bytes(out, &lo, sizeof(lo));
        std::fill(counts.begin(), counts.end(), 0.0f);
        for (std::size_t j = 0; j < voxel->class_counts.size(); ++j) {
            counts[j] = static_cast<float>(voxel->class_counts[j]);
        }
        write_bytes(out, counts.data(), counts.size() * sizeof(float));
    }
    if (!out) {
        throw InputError("write failed for octree dump: " + path);
    }
}

SemanticOctree SemanticOctree::load(const std::string& path, const ClassSet& class_set) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw InputError("cannot open octree dump: " + path);
    }
    char magic[8];
    read_bytes(in, magic, sizeof(magic), "magic");
    if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw ParseError("not an octree dump (bad magic)", 0);
    }
    std::uint32_t version = 0;
    read_bytes(in, &version, sizeof(version), "version");
    if (version != kDumpVersion) {
        throw ParseError("unsupported octree dump version " + std::to_string(version), 8);
    }
    OctreeParams params;
    read_bytes(in, &params.resolution, sizeof(double), "resolution");
    std::uint32_t n_c = 0;
    read_bytes(in, &n_c, sizeof(n_c), "class count");
    if (static_cast<int>(n_c) != class_set.size()) {
        throw InputError("octree dump class count " + std::to_string(n_c) +
                         " does not match the class set (" + std::to_string(class_set.size()) +
                         ")");
    }
    std::uint32_t depth = 0;
    read_bytes(in, &depth, sizeof(depth), "depth");
    params.max_depth = static_cast<int>(depth);
    for (int i = 0; i < 3; ++i) {
        read_bytes(in, &params.center(i), sizeof(double), "center");
    }
    std::uint64_t count = 0;
    read_bytes(in, &count, sizeof(count), "leaf count");

    SemanticOctree tree(params, class_set);
    std::vector<float> counts(static_cast<std::size_t>(n_c));
    for (std::uint64_t r = 0; r < count; ++r) {
        VoxelKey key;
        read_bytes(in, &key.x, sizeof(key.x), "leaf key");
        read_bytes(in, &key.y, sizeof(key.y), "leaf key");
        read_bytes(in, &key.z, sizeof(key.z), "leaf key");
        float lo = 0.0f;
        read_bytes(in, &lo, sizeof(lo), "leaf log-odds");
        read_bytes(in, counts.data(), counts.size() * sizeof(float), "leaf counts");
        SemanticVoxel& voxel = tree.leaf_at(key);
        voxel.log_odds_occ = static_cast<double>(lo);
        double total = 0.0;
        for (float c : counts) total += static_cast<double>(c);
        if (total > 0.0) {
            voxel.class_counts.assign(counts.begin(), counts.end());
            voxel.total_count = total;
        }
    }
    return tree;
}

LabeledPointCloud SemanticOctree::export_colored_points(double threshold) const {
    const auto leaves = occupied_leaves(threshold);
    LabeledPointCloud cloud;
    cloud.points.resize(3, static_cast<Eigen::Index>(leaves.size()));
    cloud.labels.reserve(leaves.size());
    cloud.colors.reserve(leaves.size());
    for (std::size_t i = 0; i < leaves.size(); ++i) {
        cloud.points.col(static_cast<Eigen::Index>(i)) = center_of(leaves[i].first);
        const auto best = hard_label_index(*leaves[i].second);
        if (best) {
            const ClassInfo& info = class_set_.at(*best);
            cloud.labels.push_back(info.id);
            cloud.colors.push_back(info.color);
        } else {
            cloud.labels.push_back(kUnlabeled);
            cloud.colors.push_back({128, 128, 128});
        }
    }
    return cloud;
}

}  // namespace semap
