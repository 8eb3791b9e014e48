#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "i2preg/features.hpp"
#include "i2preg/geometry.hpp"
#include "i2preg/matching.hpp"

namespace i2preg {

struct Primitive {
  enum class Kind { Plane, Box, Sphere };
  Kind kind = Kind::Plane;
  Vec3 center = Vec3::Zero();
  // Plane: the two half-edge vectors spanning a parallelogram.
  Vec3 axis_u = Vec3::UnitX();
  Vec3 axis_v = Vec3::UnitY();
  // Box: half extents along the cloud axes.
  Vec3 half_extents = Vec3::Constant(0.5);
  // Sphere
  double radius = 0.5;

  [[nodiscard]] double area() const;
};

struct SceneSpec {
  std::vector<Primitive> primitives;
  int point_count = 40000;
  CameraIntrinsics intrinsics{120.0, 120.0, 63.5, 47.5, 128, 96};
  double max_rotation_deg = 30.0;
  double max_translation_m = 0.5;

  /// Back wall, floor, a box and a sphere in front of the camera.
  static SceneSpec room();
  void validate() const;
};

struct SyntheticScene {
  PointCloud cloud;
  DepthMap depth;
  CameraIntrinsics intrinsics;
  RigidTransform gt_transform;
  /// Visible z-buffer winners, row-major by pixel, at their exact
  /// sub-pixel projections.
  std::vector<Correspondence> gt_correspondences;
  std::uint64_t seed = 0;
};

/// Samples the primitives by area in the cloud frame, draws a pose that
/// rotates about the cloud centroid and translates within the spec ranges,
/// and z-buffers the moved points into the camera. Depths are stored at
/// float32 precision so that a written bundle reloads bit-identically.
SyntheticScene generate_scene(const SceneSpec& spec, std::uint64_t seed);

struct CorruptionConfig {
  double gaussian_sigma_m = 0.0;
  double mask_ratio = 0.0;
  double feature_noise_sigma = 0.0;
  double outlier_fraction = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SyntheticFeatures {
  FeatureField image;  // one row per gt correspondence, same order
  FeatureField cloud;  // one row per cloud point
  std::vector<Vec2> image_pixels;
};

/// Constructed descriptors. Each gt pair shares a base unit vector, every
/// other cloud point gets its own; Gaussian noise of the configured sigma
/// (per image row combined in quadrature with `extra_image_noise`) is added
/// and rows re-normalized; a fraction of image rows becomes random.
SyntheticFeatures synthesize_features(const SyntheticScene& scene, Eigen::Index channels,
                                      const CorruptionConfig& noise, std::span<const double> extra_image_noise = {});

/// Gaussian depth noise on valid pixels, then exactly
/// round(mask_ratio * W * H) uniformly chosen pixels invalidated.
DepthMap corrupt_depth(const DepthMap& depth, const CorruptionConfig& cfg);

/// Row indices per image tile (tile id = row * cols + col) of a rows x cols grid.
std::vector<std::vector<int>> image_tiles(std::span<const Vec2> pixels, const CameraIntrinsics& k, int rows,
                                          int cols);

/// Point indices per occupied voxel, cells ordered by integer coordinates.
std::vector<std::vector<int>> voxel_cells(const PointCloud& cloud, double voxel_size);

/// cloud.ply, depth.bin, intrinsics.json, gt_pose.json, gt_corrs.csv.
void save_scene_bundle(const std::filesystem::path& dir, const SyntheticScene& scene);
SyntheticScene load_scene_bundle(const std::filesystem::path& dir);

void write_intrinsics_json(const std::filesystem::path& path, const CameraIntrinsics& k);
CameraIntrinsics read_intrinsics_json(const std::filesystem::path& path);

}  // namespace i2preg
