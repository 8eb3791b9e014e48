#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "i2preg/geometry.hpp"

namespace i2preg {

/// Eigen-decomposition of a symmetric 3x3 matrix, eigenvalues ascending.
struct SymmetricEigen3 {
  Vec3 values;  // ascending
  Mat3 vectors;  // column i pairs with values[i]
};

/// Closed-form (trigonometric) solver for symmetric 3x3 matrices.
SymmetricEigen3 symmetric_eigen3(const Mat3& a);

/// Unit eigenvector of the smallest eigenvalue. Returns false when the two
/// smallest eigenvalues coincide, i.e. their gap is at most
/// `gap_tolerance * max(|lambda_max|, tiny)`.
bool smallest_eigenvector(const Mat3& covariance, Vec3& normal, double gap_tolerance = 1e-12);

/// Neighborhood centroid and covariance with 1/k normalization.
Mat3 neighborhood_covariance(std::span<const Vec3> neighbors, Vec3* centroid = nullptr);

struct PointNormalOptions {
  /// Viewpoint the normals are oriented toward.
  Vec3 viewpoint = Vec3::Zero();
  double degeneracy_gap = 1e-12;
};

/// Covariance-PCA normals over the k nearest neighbors of each point (the
/// point itself excluded). Degenerate neighborhoods are marked invalid.
NormalField estimate_point_normals(const PointCloud& cloud, std::size_t k, const PointNormalOptions& options = {});

/// Same, with a per-point neighbor count (see adaptive_neighborhood_sizes).
NormalField estimate_point_normals(const PointCloud& cloud, std::span<const std::size_t> k_per_point,
                                   const PointNormalOptions& options = {});

/// Orients `n` so it does not point away from `viewpoint` as seen from `p`.
Vec3 orient_toward(const Vec3& n, const Vec3& p, const Vec3& viewpoint);

struct AdaptiveNeighborhood {
  std::size_t dense_k = 8;
  std::size_t sparse_k = 12;
};

/// Mean neighbor spacing rho_i over the k0 nearest neighbors of each point.
std::vector<double> mean_neighbor_spacing(const PointCloud& cloud, std::size_t k0);

/// Density-aware neighborhood size: points whose mean spacing exceeds the
/// cloud-wide mean get `sparse_k`, the rest keep `k0`.
std::vector<std::size_t> adaptive_neighborhood_sizes(const PointCloud& cloud, std::size_t k0 = 8,
                                                     std::size_t sparse_k = 12);

/// Image normals from central depth differences in pixel units,
/// n = normalize(-dD/du, -dD/dv, 1) with dD/du = D(u+1,v) - D(u-1,v).
/// The one-pixel rim and any pixel touching an invalid depth are invalid.
NormalField depth_to_normals(const DepthMap& depth);

/// What depth_to_normals would report at pixel (u, v) for a depth map
/// rendered exactly from the plane through `point` with normal `normal`
/// (both in the camera frame). Returns false if the plane is viewed edge-on
/// at any of the four stencil pixels.
bool tangent_plane_depth_normal(const CameraIntrinsics& k, const Vec3& point, const Vec3& normal, double u,
                                double v, Vec3& out);

}  // namespace i2preg
