#include "i2preg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "i2preg/error.hpp"

namespace i2preg {

double inlier_ratio(std::span<const Correspondence> corrs, const PointCloud& cloud, const DepthMap& depth,
                    const CameraIntrinsics& k, const RigidTransform& t_gt, double tau1) {
  if (corrs.empty()) throw Error(ErrorCode::EmptyCorrespondences, "no correspondences");
  std::size_t hits = 0;
  for (const auto& c : corrs) {
    if (c.point_index < 0 || static_cast<std::size_t>(c.point_index) >= cloud.size()) {
      throw Error(ErrorCode::InvalidArgument, "correspondence point index out of range");
    }
    double z = 0.0;
    if (!depth.lookup(c.pixel, z)) throw Error(ErrorCode::NonPositiveDepth, "no valid depth at a correspondence pixel");
    const Vec3 observed = backproject_pixel(k, c.pixel.x(), c.pixel.y(), z);
    if ((t_gt.apply(cloud.points[static_cast<std::size_t>(c.point_index)]) - observed).norm() < tau1) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(corrs.size());
}

double feature_matching_recall(std::span<const double> irs, double tau2) {
  if (irs.empty()) throw Error(ErrorCode::EmptyInput, "no inlier ratios");
  const auto n = std::count_if(irs.begin(), irs.end(), [&](double ir) { return ir > tau2; });
  return static_cast<double>(n) / static_cast<double>(irs.size());
}

double registration_rmse(const PointCloud& cloud, const RigidTransform& t_est, const RigidTransform& t_gt) {
  if (cloud.empty()) throw Error(ErrorCode::EmptyCloud, "empty cloud");
  double sum = 0.0;
  for (const auto& p : cloud.points) sum += (t_est.apply(p) - t_gt.apply(p)).squaredNorm();
  return std::sqrt(sum / static_cast<double>(cloud.size()));
}

double registration_recall(std::span<const double> rmses, double tau3) {
  if (rmses.empty()) throw Error(ErrorCode::EmptyInput, "no RMSE values");
  const auto n = std::count_if(rmses.begin(), rmses.end(), [&](double r) { return r < tau3; });
  return static_cast<double>(n) / static_cast<double>(rmses.size());
}

double patch_inlier_ratio(std::span<const PatchPair> pairs, double threshold) {
  if (pairs.empty()) throw Error(ErrorCode::EmptyInput, "no patch pairs");
  const auto n = std::count_if(pairs.begin(), pairs.end(), [&](const PatchPair& p) { return p.ratio() > threshold; });
  return static_cast<double>(n) / static_cast<double>(pairs.size());
}

Vec3 euler_xyz(const Mat3& r) {
  const double b = std::asin(std::clamp(r(0, 2), -1.0, 1.0));
  if (std::hypot(r(0, 0), r(0, 1)) < 1e-9) {
    return {std::atan2(r(2, 1), r(1, 1)), b, 0.0};
  }
  return {std::atan2(-r(1, 2), r(2, 2)), b, std::atan2(-r(0, 1), r(0, 0))};
}

double relative_rotation_error(const Mat3& r_gt, const Mat3& r_est) {
  if (!is_rotation(r_gt, 1e-6) || !is_rotation(r_est, 1e-6)) {
    throw Error(ErrorCode::InvalidRotation, "RRE needs two rotation matrices");
  }
  const Vec3 e = euler_xyz(r_gt.transpose() * r_est);
  return e.cwiseAbs().sum() * 180.0 / std::numbers::pi;
}

double relative_translation_error(const Vec3& t_gt, const Vec3& t_est) { return (t_gt - t_est).norm(); }

Aggregate aggregate(std::span<const double> values) {
  Aggregate a;
  a.count = values.size();
  if (values.empty()) return a;
  std::vector<double> v(values.begin(), values.end());
  double sum = 0.0;
  for (double x : v) sum += x;
  a.mean = sum / static_cast<double>(v.size());
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  a.median = v.size() % 2 == 1 ? v[h] : 0.5 * (v[h - 1] + v[h]);
  return a;
}

}  // namespace i2preg
