#pragma once

#include <optional>
#include <span>
#include <vector>

#include "i2preg/geometry.hpp"
#include "i2preg/matching.hpp"

namespace i2preg {

struct MetricThresholds {
  double tau1_m = 0.05;  // inlier distance
  double tau2 = 0.1;  // inlier ratio for a matched scene
  double tau3_m = 0.1;  // registration RMSE
  double pir_overlap = 0.3;
};

/// Fraction of correspondences whose ground-truth-mapped point lies within
/// tau1 (strictly) of the pixel back-projected with `depth`.
double inlier_ratio(std::span<const Correspondence> corrs, const PointCloud& cloud, const DepthMap& depth,
                    const CameraIntrinsics& k, const RigidTransform& t_gt, double tau1);

/// Fraction of scenes with IR > tau2.
double feature_matching_recall(std::span<const double> irs, double tau2);

double registration_rmse(const PointCloud& cloud, const RigidTransform& t_est, const RigidTransform& t_gt);

/// Fraction of scenes with RMSE < tau3.
double registration_recall(std::span<const double> rmses, double tau3);

/// Fraction of patch pairs whose bilateral overlap ratio exceeds `threshold`.
double patch_inlier_ratio(std::span<const PatchPair> pairs, double threshold = 0.3);

/// Intrinsic XYZ Euler angles (radians) with R = Rx(a) Ry(b) Rz(c),
/// b in [-pi/2, pi/2]. At gimbal lock (cos b < 1e-9) c is fixed to 0.
Vec3 euler_xyz(const Mat3& r);

/// Sum of the absolute Euler angles of R_gt^T R_est, in degrees.
double relative_rotation_error(const Mat3& r_gt, const Mat3& r_est);

double relative_translation_error(const Vec3& t_gt, const Vec3& t_est);

struct SceneEvaluation {
  double inlier_ratio = 0.0;
  bool fmr_flag = false;
  std::optional<double> rmse_m;  // empty when registration failed
  bool rr_flag = false;
  double pir = 0.0;
  std::optional<double> rre_deg;
  std::optional<double> rte_m;
};

struct Aggregate {
  double mean = 0.0;
  double median = 0.0;
  std::size_t count = 0;
};

/// Mean and median of the values; count 0 and zeros for an empty input.
Aggregate aggregate(std::span<const double> values);

}  // namespace i2preg
