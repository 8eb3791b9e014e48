#pragma once

#include <cmath>
#include <vector>

#include "i2preg/geometry.hpp"
#include "i2preg/matching.hpp"
#include "i2preg/random.hpp"

// Scalar-loop reimplementations used as independent references. They avoid
// Eigen arithmetic and library helpers on purpose.
namespace i2preg::oracles {

inline void apply(const RigidTransform& t, const double p[3], double out[3]) {
  for (int r = 0; r < 3; ++r) {
    out[r] = t.translation[r];
    for (int c = 0; c < 3; ++c) out[r] += t.rotation(r, c) * p[c];
  }
}

inline double inlier_ratio(const std::vector<Correspondence>& corrs, const PointCloud& cloud, const DepthMap& depth,
                           const CameraIntrinsics& k, const RigidTransform& t, double tau1) {
  int hits = 0;
  for (const auto& c : corrs) {
    const int u = static_cast<int>(std::floor(c.pixel[0] + 0.5));
    const int v = static_cast<int>(std::floor(c.pixel[1] + 0.5));
    const double z = depth.values()[static_cast<std::size_t>(v * depth.width() + u)];
    const double obs[3] = {(c.pixel[0] - k.cx) / k.fx * z, (c.pixel[1] - k.cy) / k.fy * z, z};
    const Vec3& p = cloud.points[static_cast<std::size_t>(c.point_index)];
    const double pp[3] = {p[0], p[1], p[2]};
    double q[3];
    apply(t, pp, q);
    double d2 = 0.0;
    for (int i = 0; i < 3; ++i) d2 += (q[i] - obs[i]) * (q[i] - obs[i]);
    if (std::sqrt(d2) < tau1) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(corrs.size());
}

inline double rmse(const PointCloud& cloud, const RigidTransform& est, const RigidTransform& gt) {
  double sum = 0.0;
  for (const auto& p : cloud.points) {
    const double pp[3] = {p[0], p[1], p[2]};
    double a[3];
    double b[3];
    apply(est, pp, a);
    apply(gt, pp, b);
    for (int i = 0; i < 3; ++i) sum += (a[i] - b[i]) * (a[i] - b[i]);
  }
  return std::sqrt(sum / static_cast<double>(cloud.size()));
}

inline double fraction_above(const std::vector<double>& v, double t) {
  int n = 0;
  for (double x : v) n += x > t ? 1 : 0;
  return static_cast<double>(n) / static_cast<double>(v.size());
}

inline double fraction_below(const std::vector<double>& v, double t) {
  int n = 0;
  for (double x : v) n += x < t ? 1 : 0;
  return static_cast<double>(n) / static_cast<double>(v.size());
}

/// A random depth map, cloud and correspondence list where roughly half the
/// pairs are exact and the rest are displaced by up to 0.2 m.
struct MetricFixture {
  CameraIntrinsics k{80.0, 80.0, 15.5, 11.5, 32, 24};
  DepthMap depth;
  PointCloud cloud;
  std::vector<Correspondence> corrs;
  RigidTransform gt;
  RigidTransform est;
};

inline MetricFixture make_metric_fixture(std::uint64_t seed) {
  Rng rng = make_rng(seed, 0x3e7);
  std::uniform_real_distribution<double> z(1.0, 3.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> shift(-0.2, 0.2);
  MetricFixture f;
  f.depth = DepthMap(f.k.width, f.k.height);
  for (int v = 0; v < f.k.height; ++v)
    for (int u = 0; u < f.k.width; ++u) f.depth.set(u, v, static_cast<float>(z(rng)));
  f.gt = RigidTransform::from_axis_angle(random_unit_vector(rng, 3), unit(rng), gaussian_vector(rng, 3));
  f.est = RigidTransform::from_axis_angle(random_unit_vector(rng, 3), 0.1 * unit(rng), 0.1 * gaussian_vector(rng, 3))
              .compose(f.gt);
  const RigidTransform inv = f.gt.inverse();
  const int n = 10 + static_cast<int>(unit(rng) * 40);
  for (int i = 0; i < n; ++i) {
    const int u = static_cast<int>(unit(rng) * f.k.width);
    const int v = static_cast<int>(unit(rng) * f.k.height);
    const Vec2 px(u + 0.4 * (unit(rng) - 0.5), v + 0.4 * (unit(rng) - 0.5));
    Vec3 cam = backproject_pixel(f.k, px.x(), px.y(), f.depth.at(u, v));
    if (unit(rng) < 0.5) cam += Vec3(shift(rng), shift(rng), shift(rng));
    f.corrs.push_back({px, static_cast<int>(f.cloud.size()), 1.0});
    f.cloud.points.push_back(inv.apply(cam));
  }
  return f;
}

}  // namespace i2preg::oracles
