#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <vector>

namespace semap {

/// Per-point label value meaning "no label"; also the on-disk sentinel.
inline constexpr std::uint16_t kUnlabeled = 0xFFFF;

/// Point cloud with optional per-point class labels, colors, and soft label
/// distributions. Optional attributes are either empty or sized n().
struct LabeledPointCloud {
    Eigen::Matrix3Xd points;                        // one column per point, meters
    std::vector<std::uint16_t> labels;              // kUnlabeled where absent
    std::vector<std::array<std::uint8_t, 3>> colors;
    std::vector<Eigen::VectorXd> label_probs;       // soft labels, length n_c each

    Eigen::Index n() const { return points.cols(); }
    bool has_labels() const { return !labels.empty(); }
    bool has_colors() const { return !colors.empty(); }
    bool has_label_probs() const { return !label_probs.empty(); }

    bool is_labeled(Eigen::Index i) const {
        return has_labels() && labels[static_cast<std::size_t>(i)] != kUnlabeled;
    }

    /// Throws InputError if attribute sizes disagree with n() or any
    /// coordinate is non-finite.
    void validate() const;
};

/// Pinhole camera model for depth back-projection.
struct CameraIntrinsics {
    double fx = 0.0;
    double fy = 0.0;
    double cx = 0.0;
    double cy = 0.0;
    int width = 0;
    int height = 0;
    double depth_scale = 1.0;  // meters per stored depth unit
};

/// Row-major image, minimal on purpose: the CLI feeds synthetic frames and
/// tests feed hand-built ones.
template <typename T>
struct Image {
    int width = 0;
    int height = 0;
    std::vector<T> data;  // size width*height, row major

    Image() = default;
    Image(int w, int h, T fill = T{}) : width(w), height(h), data(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), fill) {}

    T& at(int v, int u) { return data[static_cast<std::size_t>(v) * static_cast<std::size_t>(width) + static_cast<std::size_t>(u)]; }
    const T& at(int v, int u) const { return data[static_cast<std::size_t>(v) * static_cast<std::size_t>(width) + static_cast<std::size_t>(u)]; }
};

/// Back-projects a depth image through the pinhole model. Depth pixels that
/// are zero or non-finite are skipped. Label images use 0 for "unlabeled"
/// pixels, mapped to kUnlabeled in the cloud; nonzero values are class ids.
/// The label and color images, when given, must match the depth dimensions.
LabeledPointCloud rgbd_to_pointcloud(const Image<float>& depth,
                                     const Image<std::uint16_t>* labels,
                                     const Image<std::array<std::uint8_t, 3>>* colors,
                                     const CameraIntrinsics& intrinsics);

/// Keeps points at indices 0, k, 2k, ... together with their attributes.
LabeledPointCloud uniform_downsample(const LabeledPointCloud& cloud, int keep_one_in);

}  // namespace semap
