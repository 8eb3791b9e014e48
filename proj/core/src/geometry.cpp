#include "i2preg/geometry.hpp"

#include <cmath>
#include <limits>

#include <Eigen/SVD>

#include "i2preg/error.hpp"

namespace i2preg {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NonPositiveDepth: return "NonPositiveDepth";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::ChannelMismatch: return "ChannelMismatch";
    case ErrorCode::NotNormalized: return "NotNormalized";
    case ErrorCode::EmptyOverlap: return "EmptyOverlap";
    case ErrorCode::EmptySample: return "EmptySample";
    case ErrorCode::EmptyPatch: return "EmptyPatch";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::EmptyCorrespondences: return "EmptyCorrespondences";
    case ErrorCode::EmptyCloud: return "EmptyCloud";
    case ErrorCode::EmptyVisibleSet: return "EmptyVisibleSet";
    case ErrorCode::InvalidRotation: return "InvalidRotation";
    case ErrorCode::InsufficientPoints: return "InsufficientPoints";
    case ErrorCode::DegenerateConfiguration: return "DegenerateConfiguration";
    case ErrorCode::NoConsensus: return "NoConsensus";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::ParseError: return "ParseError";
  }
  return "Unknown";
}

RigidTransform RigidTransform::from_axis_angle(const Vec3& axis, double angle_rad, const Vec3& t) {
  RigidTransform out;
  const double n = axis.norm();
  out.rotation = n > 0.0 ? rotation_from_axis_angle(axis / n * angle_rad) : Mat3::Identity();
  out.translation = t;
  return out;
}

RigidTransform RigidTransform::inverse() const {
  RigidTransform out;
  out.rotation = rotation.transpose();
  out.translation = -(out.rotation * translation);
  return out;
}

RigidTransform RigidTransform::compose(const RigidTransform& other) const {
  RigidTransform out;
  out.rotation = rotation * other.rotation;
  out.translation = rotation * other.translation + translation;
  return out;
}

bool RigidTransform::is_valid(double tol) const {
  return is_rotation(rotation, tol) && translation.allFinite();
}

Vec3 apply_transform(const RigidTransform& transform, const Vec3& p) { return transform.apply(p); }

bool is_rotation(const Mat3& r, double tol) {
  if (!r.allFinite()) return false;
  if ((r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff() > tol) return false;
  return std::abs(r.determinant() - 1.0) <= tol;
}

Mat3 rotation_from_axis_angle(const Vec3& omega) {
  const double theta = omega.norm();
  Mat3 wx;
  wx << 0.0, -omega.z(), omega.y(), omega.z(), 0.0, -omega.x(), -omega.y(), omega.x(), 0.0;
  if (theta < 1e-8) {
    // Second-order series; exact to double precision at this size.
    return Mat3::Identity() + wx + 0.5 * wx * wx;
  }
  const double a = std::sin(theta) / theta;
  const double b = (1.0 - std::cos(theta)) / (theta * theta);
  return Mat3::Identity() + a * wx + b * wx * wx;
}

Mat3 project_to_rotation(const Mat3& m) {
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 d = Mat3::Identity();
  d(2, 2) = (svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0 ? -1.0 : 1.0;
  return svd.matrixU() * d * svd.matrixV().transpose();
}

bool CameraIntrinsics::is_valid() const {
  return fx > 0.0 && fy > 0.0 && width > 0 && height > 0 && cx >= 0.0 && cx < width && cy >= 0.0 &&
         cy < height;
}

bool CameraIntrinsics::contains(const Vec2& pixel) const {
  const int u = pixel_round(pixel.x());
  const int v = pixel_round(pixel.y());
  return u >= 0 && v >= 0 && u < width && v < height;
}

Vec2 project_point(const CameraIntrinsics& k, const Vec3& p) {
  if (!(p.z() > 0.0)) throw Error(ErrorCode::NonPositiveDepth, "cannot project a point with z <= 0");
  return {k.fx * p.x() / p.z() + k.cx, k.fy * p.y() / p.z() + k.cy};
}

Vec3 backproject_pixel(const CameraIntrinsics& k, double u, double v, double depth) {
  if (!(depth > 0.0)) throw Error(ErrorCode::NonPositiveDepth, "backprojection needs depth > 0");
  return {(u - k.cx) * depth / k.fx, (v - k.cy) * depth / k.fy, depth};
}

DepthMap::DepthMap(int width, int height)
    : width_(width),
      height_(height),
      values_(static_cast<std::size_t>(width) * static_cast<std::size_t>(height),
              std::numeric_limits<double>::quiet_NaN()),
      valid_(values_.size(), 0) {
  if (width <= 0 || height <= 0) throw Error(ErrorCode::InvalidArgument, "depth map dimensions must be positive");
}

void DepthMap::set(int u, int v, double depth) {
  const auto i = index(u, v);
  if (std::isfinite(depth) && depth > 0.0) {
    values_[i] = depth;
    valid_[i] = 1;
  } else {
    values_[i] = std::numeric_limits<double>::quiet_NaN();
    valid_[i] = 0;
  }
}

void DepthMap::invalidate(int u, int v) { set(u, v, std::numeric_limits<double>::quiet_NaN()); }

bool DepthMap::lookup(const Vec2& pixel, double& depth) const {
  const int u = pixel_round(pixel.x());
  const int v = pixel_round(pixel.y());
  if (!valid(u, v)) return false;
  depth = at(u, v);
  return true;
}

std::size_t DepthMap::valid_count() const {
  std::size_t n = 0;
  for (auto m : valid_) n += m != 0;
  return n;
}

NormalField NormalField::for_cloud(std::size_t count) {
  NormalField f;
  f.width = static_cast<int>(count);
  f.height = 1;
  f.normals.assign(count, Vec3::Zero());
  f.valid.assign(count, 0);
  return f;
}

NormalField NormalField::for_image(int width, int height) {
  NormalField f;
  f.width = width;
  f.height = height;
  const auto n = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  f.normals.assign(n, Vec3::Zero());
  f.valid.assign(n, 0);
  return f;
}

std::size_t NormalField::valid_count() const {
  std::size_t n = 0;
  for (auto m : valid) n += m != 0;
  return n;
}

}  // namespace i2preg
