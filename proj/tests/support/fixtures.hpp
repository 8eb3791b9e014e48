#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "i2preg/geometry.hpp"
#include "i2preg/pose.hpp"
#include "i2preg/random.hpp"

namespace i2preg::fixtures {

inline const CameraIntrinsics kVga{500.0, 500.0, 319.5, 239.5, 640, 480};

inline RigidTransform random_pose(Rng& rng, double max_angle = std::numbers::pi, double max_shift = 1.0) {
  std::uniform_real_distribution<double> angle(-max_angle, max_angle);
  std::uniform_real_distribution<double> shift(-max_shift, max_shift);
  return RigidTransform::from_axis_angle(random_unit_vector(rng, 3), angle(rng), Vec3(shift(rng), shift(rng), shift(rng)));
}

struct PnpFixture {
  std::vector<PnpCorrespondence> corrs;
  std::vector<std::uint8_t> planted_inlier;
  RigidTransform gt;
};

/// Noiseless pixel/point pairs under a random pose. The first
/// round(n * outlier_fraction) entries after shuffling get a random pixel at
/// least `min_outlier_px` away from the true projection.
inline PnpFixture make_pnp_fixture(std::uint64_t seed, int n, double outlier_fraction, double min_outlier_px = 24.0,
                                   const CameraIntrinsics& k = kVga) {
  Rng rng = make_rng(seed, 0xf1);
  std::uniform_real_distribution<double> u(0.0, k.width - 1.0);
  std::uniform_real_distribution<double> v(0.0, k.height - 1.0);
  std::uniform_real_distribution<double> z(2.0, 6.0);
  PnpFixture f;
  f.gt = random_pose(rng);
  const RigidTransform inv = f.gt.inverse();
  const int outliers = static_cast<int>(std::lround(n * outlier_fraction));
  for (int i = 0; i < n; ++i) {
    const Vec2 px(u(rng), v(rng));
    const Vec3 cam = backproject_pixel(k, px.x(), px.y(), z(rng));
    PnpCorrespondence c{px, inv.apply(cam)};
    const bool outlier = i < outliers;
    if (outlier) {
      do {
        c.pixel = {u(rng), v(rng)};
      } while ((c.pixel - px).norm() <= min_outlier_px);
    }
    f.corrs.push_back(c);
    f.planted_inlier.push_back(outlier ? 0 : 1);
  }
  std::vector<std::size_t> order(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);
  PnpFixture shuffled{{}, {}, f.gt};
  for (std::size_t i : order) {
    shuffled.corrs.push_back(f.corrs[i]);
    shuffled.planted_inlier.push_back(f.planted_inlier[i]);
  }
  return shuffled;
}

inline double rotation_angle_deg(const Mat3& a, const Mat3& b) {
  // Chord form; acos of the trace loses everything below ~1e-8 rad.
  const double chord = std::min(1.0, (a - b).norm() / (2.0 * std::numbers::sqrt2));
  return 2.0 * std::asin(chord) * 180.0 / std::numbers::pi;
}

}  // namespace i2preg::fixtures
