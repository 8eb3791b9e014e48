#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace i2preg {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Rigid motion x -> R x + t. Maps cloud coordinates into the camera frame
/// when used as a registration result.
struct RigidTransform {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  static RigidTransform identity() { return {}; }
  static RigidTransform from_axis_angle(const Vec3& axis, double angle_rad, const Vec3& t = Vec3::Zero());

  [[nodiscard]] Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
  [[nodiscard]] RigidTransform inverse() const;
  /// (*this) ∘ other, i.e. apply `other` first.
  [[nodiscard]] RigidTransform compose(const RigidTransform& other) const;
  /// Orthonormality and det = +1 within `tol`.
  [[nodiscard]] bool is_valid(double tol = 1e-9) const;
};

Vec3 apply_transform(const RigidTransform& transform, const Vec3& p);

/// True when R^T R = I and det(R) = +1 within `tol`.
bool is_rotation(const Mat3& r, double tol = 1e-9);

/// Rodrigues map from an axis-angle vector to a rotation matrix.
Mat3 rotation_from_axis_angle(const Vec3& omega);

/// Nearest rotation in Frobenius norm (orthogonal Procrustes).
Mat3 project_to_rotation(const Mat3& m);

struct CameraIntrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 1;
  int height = 1;

  [[nodiscard]] bool is_valid() const;
  [[nodiscard]] bool contains(const Vec2& pixel) const;
};

/// Pinhole projection; throws NonPositiveDepth when p.z <= 0.
Vec2 project_point(const CameraIntrinsics& k, const Vec3& p);

/// Inverse of project_point at a known depth; throws NonPositiveDepth.
Vec3 backproject_pixel(const CameraIntrinsics& k, double u, double v, double depth);

struct PointCloud {
  std::vector<Vec3> points;

  [[nodiscard]] std::size_t size() const { return points.size(); }
  [[nodiscard]] bool empty() const { return points.empty(); }
};

/// Row-major H x W depth image in meters. Pixel (u, v) is column u, row v.
class DepthMap {
 public:
  DepthMap() = default;
  DepthMap(int width, int height);

  [[nodiscard]] int width() const { return width_; }
  [[nodiscard]] int height() const { return height_; }
  [[nodiscard]] std::size_t pixel_count() const { return values_.size(); }

  [[nodiscard]] bool in_bounds(int u, int v) const { return u >= 0 && v >= 0 && u < width_ && v < height_; }
  [[nodiscard]] std::size_t index(int u, int v) const {
    return static_cast<std::size_t>(v) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(u);
  }

  [[nodiscard]] double at(int u, int v) const { return values_[index(u, v)]; }
  [[nodiscard]] bool valid(int u, int v) const { return in_bounds(u, v) && valid_[index(u, v)] != 0; }

  /// Stores a depth; non-finite or non-positive values are stored as invalid.
  void set(int u, int v, double depth);
  void invalidate(int u, int v);

  /// Depth at the pixel nearest to (u, v), if that pixel is valid.
  [[nodiscard]] bool lookup(const Vec2& pixel, double& depth) const;

  [[nodiscard]] std::span<const double> values() const { return values_; }
  [[nodiscard]] std::span<const std::uint8_t> mask() const { return valid_; }
  [[nodiscard]] std::size_t valid_count() const;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<double> values_;
  std::vector<std::uint8_t> valid_;
};

/// Per-element unit normals with a validity mask. Image-carried fields have
/// width x height layout; cloud-carried fields use width = count, height = 1.
struct NormalField {
  int width = 0;
  int height = 1;
  std::vector<Vec3> normals;
  std::vector<std::uint8_t> valid;

  static NormalField for_cloud(std::size_t count);
  static NormalField for_image(int width, int height);

  [[nodiscard]] std::size_t size() const { return normals.size(); }
  [[nodiscard]] std::size_t valid_count() const;
};

/// Nearest-pixel rounding used everywhere a real pixel coordinate indexes an image.
inline int pixel_round(double x) { return static_cast<int>(std::floor(x + 0.5)); }

}  // namespace i2preg
