#pragma once

#include <filesystem>
#include <iosfwd>

#include <span>
#include <vector>

#include "i2preg/geometry.hpp"
#include "i2preg/matching.hpp"

namespace i2preg::io {

// Point clouds: ASCII PLY (vertex x/y/z properties; other properties are
// skipped on read) and whitespace-delimited "x y z" text.
PointCloud read_ply(const std::filesystem::path& path);
void write_ply(const std::filesystem::path& path, const PointCloud& cloud);
PointCloud read_xyz(const std::filesystem::path& path);
void write_xyz(const std::filesystem::path& path, const PointCloud& cloud);
/// Dispatches on extension: ".ply" or anything else as "x y z" text.
PointCloud read_cloud(const std::filesystem::path& path);

// Depth maps: ASCII line "DEPTH <width> <height>" then width*height
// little-endian float32 values, row-major; NaN marks invalid pixels.
DepthMap read_depth(const std::filesystem::path& path);
void write_depth(const std::filesystem::path& path, const DepthMap& depth);
DepthMap read_depth(std::istream& in);
void write_depth(std::ostream& out, const DepthMap& depth);

// Normal fields: "NORMAL <width|count> <height|1>" then three float32 per
// element in the same layout; invalid elements are written as NaN.
NormalField read_normals(const std::filesystem::path& path);
void write_normals(const std::filesystem::path& path, const NormalField& field);
NormalField read_normals(std::istream& in);
void write_normals(std::ostream& out, const NormalField& field);

// Correspondences: CSV with header "u,v,point_index,score".
std::vector<Correspondence> read_correspondences(const std::filesystem::path& path);
void write_correspondences(const std::filesystem::path& path, std::span<const Correspondence> corrs);

}  // namespace i2preg::io
