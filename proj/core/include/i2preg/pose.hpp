#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "i2preg/geometry.hpp"

namespace i2preg {

/// A pixel observation of a known 3D point (cloud frame).
struct PnpCorrespondence {
  Vec2 pixel = Vec2::Zero();
  Vec3 point = Vec3::Zero();
};

struct GaussNewtonOptions {
  int max_iterations = 50;
  double step_tolerance = 1e-10;
};

/// Squared pixel reprojection error summed over all correspondences.
/// Points at or behind the camera contribute +inf.
double total_reprojection_error(std::span<const PnpCorrespondence> corrs, const CameraIntrinsics& k,
                                const RigidTransform& pose);

/// Pixel distance between the projection of T(point) and the observation;
/// +inf when the transformed point is not in front of the camera.
double reprojection_error(const PnpCorrespondence& c, const CameraIntrinsics& k, const RigidTransform& pose);

/// Gauss-Newton on the total squared reprojection error with updates
/// R <- exp([w]x) R, t <- t + dt. A step that increases the cost is halved
/// until it does not; the cost never goes up between accepted iterates.
RigidTransform refine_pose(std::span<const PnpCorrespondence> corrs, const CameraIntrinsics& k,
                           const RigidTransform& initial, const GaussNewtonOptions& options = {});

/// DLT on normalized coordinates, projection onto SO(3), then refine_pose.
/// Needs at least 6 correspondences on a non-planar point set.
RigidTransform pnp_solve(std::span<const PnpCorrespondence> corrs, const CameraIntrinsics& k,
                         const GaussNewtonOptions& options = {});

/// All real solutions of the three-point problem for unit bearings `f`
/// observing world points `x`. At most four poses.
std::vector<RigidTransform> solve_p3p(const std::array<Vec3, 3>& bearings, const std::array<Vec3, 3>& points);

struct RansacConfig {
  int max_iterations = 1000;
  double inlier_threshold_px = 8.0;
  int min_sample = 4;
  double confidence = 0.999;
  std::uint64_t seed = 0;

  void validate() const;
};

struct PoseEstimate {
  RigidTransform transform;
  std::vector<std::uint8_t> inlier_mask;
  double mean_reprojection_error = 0.0;
  int iterations = 0;

  [[nodiscard]] std::size_t inlier_count() const;
};

/// Hypothesize-and-verify PnP. Each hypothesis comes from a three-point
/// solve on a random minimal sample, disambiguated and refined on the whole
/// sample. The best consensus is refit with pnp_solve. Throws NoConsensus
/// when fewer than 6 correspondences agree with the best hypothesis.
PoseEstimate pnp_ransac(std::span<const PnpCorrespondence> corrs, const CameraIntrinsics& k,
                        const RansacConfig& config = {});

}  // namespace i2preg
