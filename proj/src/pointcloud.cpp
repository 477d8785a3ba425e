#include "semap/pointcloud.hpp"

#include <cmath>
#include <string>

#include "semap/errors.hpp"

namespace semap {

void LabeledPointCloud::validate() const {
    const std::size_t count = static_cast<std::size_t>(n());
    if (has_labels() && labels.size() != count) {
        throw InputError("label count " + std::to_string(labels.size()) +
                         " does not match point count " + std::to_string(count));
    }
    if (has_colors() && colors.size() != count) {
        throw InputError("color count " + std::to_string(colors.size()) +
                         " does not match point count " + std::to_string(count));
    }
    if (has_label_probs() && label_probs.size() != count) {
        throw InputError("label_probs count " + std::to_string(label_probs.size()) +
                         " does not match point count " + std::to_string(count));
    }
    if (!points.allFinite()) {
        throw InputError("point cloud contains non-finite coordinates");
    }
}

LabeledPointCloud rgbd_to_pointcloud(const Image<float>& depth,
                                     const Image<std::uint16_t>* labels,
                                     const Image<std::array<std::uint8_t, 3>>* colors,
                                     const CameraIntrinsics& intrinsics) {
    if (intrinsics.fx <= 0.0 || intrinsics.fy <= 0.0 || intrinsics.depth_scale <= 0.0) {
        throw InputError("camera intrinsics need positive fx, fy, depth_scale");
    }
    if (depth.width != intrinsics.width || depth.height != intrinsics.height) {
        throw InputError("depth image dimensions do not match intrinsics");
    }
    if (labels != nullptr && (labels->width != depth.width || labels->height != depth.height)) {
        throw InputError("label image dimensions do not match depth image");
    }
    if (colors != nullptr && (colors->width != depth.width || colors->height != depth.height)) {
        throw InputError("color image dimensions do not match depth image");
    }

    LabeledPointCloud cloud;
    std::vector<Eigen::Vector3d> pts;
    pts.reserve(static_cast<std::size_t>(depth.width) * static_cast<std::size_t>(depth.height));
    for (int v = 0; v < depth.height; ++v) {
        for (int u = 0; u < depth.width; ++u) {
            const float raw = depth.at(v, u);
            if (!(raw > 0.0f) || !std::isfinite(raw)) continue;
            const double z = static_cast<double>(raw) * intrinsics.depth_scale;
            const double x = (static_cast<double>(u) - intrinsics.cx) * z / intrinsics.fx;
            const double y = (static_cast<double>(v) - intrinsics.cy) * z / intrinsics.fy;
            pts.emplace_back(x, y, z);
            if (labels != nullptr) {
                const std::uint16_t lab = labels->at(v, u);
                cloud.labels.push_back(lab == 0 ? kUnlabeled : lab);
            }
            if (colors != nullptr) {
                cloud.colors.push_back(colors->at(v, u));
            }
        }
    }
    cloud.points.resize(3, static_cast<Eigen::Index>(pts.size()));
    for (std::size_t i = 0; i < pts.size(); ++i) {
        cloud.points.col(static_cast<Eigen::Index>(i)) = pts[i];
    }
    return cloud;
}

LabeledPointCloud uniform_downsample(const LabeledPointCloud& cloud, int keep_one_in) {
    if (keep_one_in < 1) {
        throw InputError("downsample stride must be >= 1, got " + std::to_string(keep_one_in));
    }
    if (keep_one_in == 1) return cloud;

    const Eigen::Index n = cloud.n();
    const Eigen::Index kept = (n + keep_one_in - 1) / keep_one_in;
    LabeledPointCloud out;
    out.points.resize(3, kept);
    if (cloud.has_labels()) out.labels.reserve(static_cast<std::size_t>(kept));
    if (cloud.has_colors()) out.colors.reserve(static_cast<std::size_t>(kept));
    if (cloud.has_label_probs()) out.label_probs.reserve(static_cast<std::size_t>(kept));
    Eigen::Index w = 0;
    for (Eigen::Index i = 0; i < n; i += keep_one_in, ++w) {
        out.points.col(w) = cloud.points.col(i);
        const std::size_t si = static_cast<std::size_t>(i);
        if (cloud.has_labels()) out.labels.push_back(cloud.labels[si]);
        if (cloud.has_colors()) out.colors.push_back(cloud.colors[si]);
        if (cloud.has_label_probs()) out.label_probs.push_back(cloud.label_probs[si]);
    }
    return out;
}

}  // namespace semap
