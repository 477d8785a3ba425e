#pragma once

#include <string>

#include "semap/pointcloud.hpp"

namespace semap {

/// Reads a PLY point cloud. Accepts ascii and binary_little_endian formats.
/// Recognized vertex properties: x, y, z (float or double), red, green,
/// blue (uchar), label (ushort, 65535 = unlabeled). Other scalar vertex
/// properties are skipped; list properties on the vertex element are
/// rejected. Elements after the vertex block (faces etc.) are ignored.
/// Malformed headers and truncated bodies raise ParseError with the byte
/// offset of the failure.
LabeledPointCloud load_ply(const std::string& path);

/// Writes binary_little_endian PLY with x,y,z as float32 plus red,green,blue
/// (uchar) when the cloud has colors and label (ushort) when it has labels.
/// Coordinates survive a round trip bit-exactly at float32 precision.
void save_ply(const LabeledPointCloud& cloud, const std::string& path);

}  // namespace semap
