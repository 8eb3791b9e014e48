#include "i2preg/normals.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "i2preg/error.hpp"
#include "i2preg/knn.hpp"

namespace i2preg {

SymmetricEigen3 symmetric_eigen3(const Mat3& a) {
  SymmetricEigen3 out;
  // Shift and scale so the trigonometric formula works on a well-conditioned matrix.
  const double scale = a.cwiseAbs().maxCoeff();
  if (scale == 0.0) {
    out.values.setZero();
    out.vectors.setIdentity();
    return out;
  }
  const Mat3 s = a / scale;
  const double m = s.trace() / 3.0;
  const Mat3 b = s - m * Mat3::Identity();
  const double p = (b.cwiseProduct(b)).sum() / 6.0;
  const double q = b.determinant() / 2.0;

  double l0 = m;
  double l2 = m;
  if (p > 0.0) {
    const double sp = std::sqrt(p);
    const double disc = std::max(p * p * p - q * q, 0.0);
    const double phi = std::atan2(std::sqrt(disc), q) / 3.0;
    const double c = std::cos(phi);
    const double sn = std::sin(phi);
    l2 = m + 2.0 * sp * c;
    l0 = m - sp * (c + std::numbers::sqrt3 * sn);
  }
  // The root farthest from the mean is simple, so its eigenvector is well
  // conditioned. The other two come from the 2x2 problem on its orthogonal
  // complement, which resolves a near-repeated pair to full precision.
  const bool top_isolated = (l2 - m) >= (m - l0);
  const double l_iso = top_isolated ? l2 : l0;
  Vec3 v_iso;
  {
    const Mat3 r = s - l_iso * Mat3::Identity();
    const Vec3 c01 = r.row(0).cross(r.row(1));
    const Vec3 c02 = r.row(0).cross(r.row(2));
    const Vec3 c12 = r.row(1).cross(r.row(2));
    const double n01 = c01.squaredNorm();
    const double n02 = c02.squaredNorm();
    const double n12 = c12.squaredNorm();
    if (n01 >= n02 && n01 >= n12 && n01 > 0.0) {
      v_iso = c01 / std::sqrt(n01);
    } else if (n02 >= n12 && n02 > 0.0) {
      v_iso = c02 / std::sqrt(n02);
    } else if (n12 > 0.0) {
      v_iso = c12 / std::sqrt(n12);
    } else {
      v_iso = Vec3::UnitZ();
    }
  }
  const Vec3 u = v_iso.unitOrthogonal();
  const Vec3 w = v_iso.cross(u);
  const double s_uu = u.dot(s * u);
  const double s_uw = u.dot(s * w);
  const double s_ww = w.dot(s * w);
  const double half = 0.5 * (s_uu + s_ww);
  const double radius = std::hypot(0.5 * (s_uu - s_ww), s_uw);
  const double theta = 0.5 * std::atan2(2.0 * s_uw, s_uu - s_ww);
  const Vec3 v_hi = std::cos(theta) * u + std::sin(theta) * w;
  const Vec3 v_lo = -std::sin(theta) * u + std::cos(theta) * w;

  std::array<std::pair<double, Vec3>, 3> pairs{
      std::pair{v_iso.dot(s * v_iso), v_iso}, std::pair{half - radius, v_lo}, std::pair{half + radius, v_hi}};
  std::sort(pairs.begin(), pairs.end(), [](const auto& x, const auto& y) { return x.first < y.first; });
  for (int i = 0; i < 3; ++i) {
    out.values[i] = pairs[static_cast<std::size_t>(i)].first * scale;
    out.vectors.col(i) = pairs[static_cast<std::size_t>(i)].second;
  }
  return out;
}

bool smallest_eigenvector(const Mat3& covariance, Vec3& normal, double gap_tolerance) {
  const SymmetricEigen3 eig = symmetric_eigen3(covariance);
  const double top = std::abs(eig.values[2]);
  if (!(top > 0.0)) return false;
  if (eig.values[1] - eig.values[0] <= gap_tolerance * top) return false;
  normal = eig.vectors.col(0).normalized();
  return normal.allFinite();
}

Mat3 neighborhood_covariance(std::span<const Vec3> neighbors, Vec3* centroid) {
  Vec3 mean = Vec3::Zero();
  for (const auto& p : neighbors) mean += p;
  const double inv_k = 1.0 / static_cast<double>(neighbors.size());
  mean *= inv_k;
  Mat3 cov = Mat3::Zero();
  for (const auto& p : neighbors) {
    const Vec3 d = p - mean;
    cov.noalias() += d * d.transpose();
  }
  cov *= inv_k;
  if (centroid != nullptr) *centroid = mean;
  return cov;
}

Vec3 orient_toward(const Vec3& n, const Vec3& p, const Vec3& viewpoint) {
  const double d = n.dot(viewpoint - p);
  if (d > 0.0) return n;
  if (d < 0.0) return -n;
  // Viewpoint in the tangent plane: make the dominant component positive.
  Eigen::Index i = 0;
  n.cwiseAbs().maxCoeff(&i);
  return n[i] < 0.0 ? Vec3(-n) : n;
}

namespace {

NormalField estimate_with(const PointCloud& cloud, const PointNormalOptions& options, std::size_t k_max,
                          auto&& k_for) {
  if (cloud.size() < k_max + 1) {
    throw Error(ErrorCode::InvalidArgument, "cloud needs at least k + 1 points for normal estimation");
  }
  const KdTree3 tree(cloud.points);
  NormalField field = NormalField::for_cloud(cloud.size());
  std::vector<Vec3> neighborhood;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const std::size_t k = k_for(i);
    const auto nn = tree.knn_of(static_cast<int>(i), k);
    neighborhood.clear();
    for (const auto& n : nn) neighborhood.push_back(cloud.points[static_cast<std::size_t>(n.index)]);
    const Mat3 cov = neighborhood_covariance(neighborhood);
    Vec3 normal;
    if (!smallest_eigenvector(cov, normal, options.degeneracy_gap)) continue;
    field.normals[i] = orient_toward(normal, cloud.points[i], options.viewpoint);
    field.valid[i] = 1;
  }
  return field;
}

}  // namespace

NormalField estimate_point_normals(const PointCloud& cloud, std::size_t k, const PointNormalOptions& options) {
  if (k < 3) throw Error(ErrorCode::InvalidArgument, "normal estimation needs k >= 3");
  return estimate_with(cloud, options, k, [k](std::size_t) { return k; });
}

NormalField estimate_point_normals(const PointCloud& cloud, std::span<const std::size_t> k_per_point,
                                   const PointNormalOptions& options) {
  if (k_per_point.size() != cloud.size()) {
    throw Error(ErrorCode::DimensionMismatch, "one neighbor count per point is required");
  }
  if (cloud.empty()) throw Error(ErrorCode::EmptyCloud, "empty cloud");
  const std::size_t k_max = *std::max_element(k_per_point.begin(), k_per_point.end());
  const std::size_t k_min = *std::min_element(k_per_point.begin(), k_per_point.end());
  if (k_min < 3) throw Error(ErrorCode::InvalidArgument, "normal estimation needs k >= 3");
  return estimate_with(cloud, options, k_max, [&](std::size_t i) { return k_per_point[i]; });
}

std::vector<double> mean_neighbor_spacing(const PointCloud& cloud, std::size_t k0) {
  if (k0 < 1) throw Error(ErrorCode::InvalidArgument, "k0 must be >= 1");
  if (cloud.size() < k0 + 1) throw Error(ErrorCode::InvalidArgument, "cloud needs at least k0 + 1 points");
  const KdTree3 tree(cloud.points);
  std::vector<double> rho(cloud.size(), 0.0);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    double sum = 0.0;
    for (const auto& n : tree.knn_of(static_cast<int>(i), k0)) sum += std::sqrt(n.dist2);
    rho[i] = sum / static_cast<double>(k0);
  }
  return rho;
}

std::vector<std::size_t> adaptive_neighborhood_sizes(const PointCloud& cloud, std::size_t k0,
                                                     std::size_t sparse_k) {
  const std::vector<double> rho = mean_neighbor_spacing(cloud, k0);
  double mean = 0.0;
  for (double r : rho) mean += r;
  mean /= static_cast<double>(rho.size());
  // Relative slack so spacings that are equal up to rounding stay "not sparse".
  const double cut = mean * (1.0 + 1e-12);
  std::vector<std::size_t> k(rho.size(), k0);
  for (std::size_t i = 0; i < rho.size(); ++i) {
    if (rho[i] > cut) k[i] = sparse_k;
  }
  return k;
}

NormalField depth_to_normals(const DepthMap& depth) {
  const int w = depth.width();
  const int h = depth.height();
  NormalField field = NormalField::for_image(w, h);
  for (int v = 1; v + 1 < h; ++v) {
    for (int u = 1; u + 1 < w; ++u) {
      if (!depth.valid(u, v) || !depth.valid(u - 1, v) || !depth.valid(u + 1, v) || !depth.valid(u, v - 1) ||
          !depth.valid(u, v + 1)) {
        continue;
      }
      const double gu = depth.at(u + 1, v) - depth.at(u - 1, v);
      const double gv = depth.at(u, v + 1) - depth.at(u, v - 1);
      const auto i = depth.index(u, v);
      field.normals[i] = Vec3(-gu, -gv, 1.0).normalized();
      field.valid[i] = 1;
    }
  }
  return field;
}

bool tangent_plane_depth_normal(const CameraIntrinsics& k, const Vec3& point, const Vec3& normal, double u,
                                double v, Vec3& out) {
  const double offset = normal.dot(point);
  auto plane_depth = [&](double pu, double pv, double& z) {
    const Vec3 ray((pu - k.cx) / k.fx, (pv - k.cy) / k.fy, 1.0);
    const double denom = normal.dot(ray);
    if (std::abs(denom) < 1e-15) return false;
    z = offset / denom;
    return std::isfinite(z);
  };
  double zu_p = 0.0;
  double zu_m = 0.0;
  double zv_p = 0.0;
  double zv_m = 0.0;
  if (!plane_depth(u + 1.0, v, zu_p) || !plane_depth(u - 1.0, v, zu_m) || !plane_depth(u, v + 1.0, zv_p) ||
      !plane_depth(u, v - 1.0, zv_m)) {
    return false;
  }
  out = Vec3(-(zu_p - zu_m), -(zv_p - zv_m), 1.0).normalized();
  return true;
}

}  // namespace i2preg
