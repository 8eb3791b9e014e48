#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "i2preg/error.hpp"
#include "i2preg/metrics.hpp"
#include "oracles.hpp"

using namespace i2preg;

namespace {

Mat3 rx(double a) { return Eigen::AngleAxisd(a, Vec3::UnitX()).toRotationMatrix(); }
Mat3 ry(double a) { return Eigen::AngleAxisd(a, Vec3::UnitY()).toRotationMatrix(); }
Mat3 rz(double a) { return Eigen::AngleAxisd(a, Vec3::UnitZ()).toRotationMatrix(); }

double deg(double d) { return d * std::numbers::pi / 180.0; }

}  // namespace

TEST(InlierRatio, MatchesOracle) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto f = oracles::make_metric_fixture(seed);
    for (double tau : {0.0, 0.05, 0.1, 0.3}) {
      EXPECT_NEAR(inlier_ratio(f.corrs, f.cloud, f.depth, f.k, f.gt, tau),
                  oracles::inlier_ratio(f.corrs, f.cloud, f.depth, f.k, f.gt, tau), 1e-12);
    }
  }
}

TEST(InlierRatio, ExamplesAndErrors) {
  const CameraIntrinsics k{100, 100, 5, 5, 10, 10};
  DepthMap depth(10, 10);
  PointCloud cloud;
  std::vector<Correspondence> corrs;
  for (int i = 0; i < 4; ++i) {
    depth.set(i, 3, 2.0);
    Vec3 p = backproject_pixel(k, i, 3, 2.0);
    if (i % 2 == 1) p.z() += 1.0;
    cloud.points.push_back(p);
    corrs.push_back({{double(i), 3.0}, i, 1.0});
  }
  const auto t = RigidTransform::identity();
  EXPECT_EQ(inlier_ratio(corrs, cloud, depth, k, t, 0.05), 0.5);
  EXPECT_EQ(inlier_ratio(corrs, cloud, depth, k, t, 0.0), 0.0);
  EXPECT_EQ(inlier_ratio(corrs, cloud, depth, k, t, 1.0), 0.5);  // distance exactly 1 m is not < 1 m
  EXPECT_EQ(inlier_ratio(corrs, cloud, depth, k, t, std::nextafter(1.0, 2.0)), 1.0);
  EXPECT_THROW(inlier_ratio({}, cloud, depth, k, t, 0.1), Error);
  std::vector<Correspondence> off{{{9.0, 9.0}, 0, 1.0}};
  try {
    inlier_ratio(off, cloud, depth, k, t, 0.1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonPositiveDepth);
  }
}

TEST(InlierRatio, MonotoneInTau) {
  const auto f = oracles::make_metric_fixture(7);
  double last = 0.0;
  for (double tau = 0.0; tau < 0.5; tau += 0.01) {
    const double ir = inlier_ratio(f.corrs, f.cloud, f.depth, f.k, f.gt, tau);
    EXPECT_GE(ir, last);
    last = ir;
  }
}

TEST(Recall, CountsAndBoundaries) {
  const std::vector<double> half{0.5, 0.5, 0.5};
  EXPECT_EQ(feature_matching_recall(half, 0.1), 1.0);
  const std::vector<double> mixed{0.05, 0.15};
  EXPECT_EQ(feature_matching_recall(mixed, 0.1), 0.5);
  const std::vector<double> edge{0.1};
  EXPECT_EQ(feature_matching_recall(edge, 0.1), 0.0);

  const std::vector<double> zeros{0.0, 0.0};
  const std::vector<double> ones{1.0, 1.0};
  EXPECT_EQ(registration_recall(zeros, 0.1), 1.0);
  EXPECT_EQ(registration_recall(ones, 0.1), 0.0);
  EXPECT_EQ(registration_recall(mixed, 0.1), 0.5);
  EXPECT_EQ(registration_recall(edge, 0.1), 0.0);
  EXPECT_THROW(registration_recall({}, 0.1), Error);
  EXPECT_THROW(feature_matching_recall({}, 0.1), Error);

  Rng rng = make_rng(71);
  std::uniform_real_distribution<double> u(0.0, 0.3);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> v(1 + trial % 17);
    for (auto& x : v) x = std::round(u(rng) * 100.0) / 1000.0;  // lands on thresholds often
    EXPECT_EQ(feature_matching_recall(v, 0.01), oracles::fraction_above(v, 0.01));
    EXPECT_EQ(registration_recall(v, 0.01), oracles::fraction_below(v, 0.01));
  }
}

TEST(PatchInlierRatio, Examples) {
  std::vector<PatchPair> all_one(3, PatchPair{0, 0, 1.0, 1.0});
  EXPECT_EQ(patch_inlier_ratio(all_one), 1.0);
  std::vector<PatchPair> zeros(2, PatchPair{});
  EXPECT_EQ(patch_inlier_ratio(zeros), 0.0);
  std::vector<PatchPair> mixed{{0, 0, 0.2, 0.9}, {1, 1, 0.8, 0.4}};
  EXPECT_EQ(patch_inlier_ratio(mixed), 0.5);
  std::vector<PatchPair> edge{{0, 0, 0.3, 0.3}};
  EXPECT_EQ(patch_inlier_ratio(edge), 0.0);
}

TEST(Rmse, OracleAndTranslation) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto f = oracles::make_metric_fixture(seed);
    EXPECT_NEAR(registration_rmse(f.cloud, f.est, f.gt), oracles::rmse(f.cloud, f.est, f.gt), 1e-12);
    EXPECT_EQ(registration_rmse(f.cloud, f.gt, f.gt), 0.0);
    RigidTransform shifted = f.gt;
    shifted.translation += Vec3(0.3, -0.4, 1.2);
    EXPECT_NEAR(registration_rmse(f.cloud, shifted, f.gt), 1.3, 1e-12);
  }
  EXPECT_THROW(registration_rmse(PointCloud{}, {}, {}), Error);
}

TEST(Rre, Examples) {
  EXPECT_EQ(relative_rotation_error(rx(0.3), rx(0.3)), 0.0);
  for (const Mat3& base : {Mat3(Mat3::Identity()), Mat3(rz(0.4) * ry(-0.2))}) {
    EXPECT_NEAR(relative_rotation_error(base, base * rx(deg(5))), 5.0, 1e-9);
    EXPECT_NEAR(relative_rotation_error(base, base * ry(deg(5))), 5.0, 1e-9);
    EXPECT_NEAR(relative_rotation_error(base, base * rz(deg(-5))), 5.0, 1e-9);
  }
  EXPECT_NEAR(relative_rotation_error(rx(deg(7)), Mat3::Identity()), relative_rotation_error(Mat3::Identity(), rx(deg(7))), 1e-12);
  const double gimbal = relative_rotation_error(Mat3::Identity(), rx(deg(10)) * ry(deg(90)) * rz(deg(20)));
  EXPECT_TRUE(std::isfinite(gimbal));
  EXPECT_NEAR(gimbal, 90.0 + 30.0, 1e-6);  // x and z merge into one 30 degree angle
  Mat3 bad = Mat3::Identity();
  bad(0, 0) = 2.0;
  try {
    relative_rotation_error(bad, Mat3::Identity());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidRotation);
  }
}

TEST(Euler, ReconstructsRotation) {
  Rng rng = make_rng(72);
  std::uniform_real_distribution<double> a(-3.0, 3.0);
  std::uniform_real_distribution<double> b(-1.5, 1.5);
  for (int trial = 0; trial < 100; ++trial) {
    const Vec3 e(a(rng), b(rng), a(rng));
    const Mat3 r = rx(e.x()) * ry(e.y()) * rz(e.z());
    const Vec3 got = euler_xyz(r);
    EXPECT_LT((rx(got.x()) * ry(got.y()) * rz(got.z()) - r).norm(), 1e-12);
    EXPECT_LE(std::abs(got.y()), std::numbers::pi / 2);
  }
}

TEST(Rte, Examples) {
  EXPECT_EQ(relative_translation_error({1, 2, 3}, {1, 2, 3}), 0.0);
  EXPECT_EQ(relative_translation_error({0, 0, 0}, {3, 4, 0}), 5.0);
  Rng rng = make_rng(73);
  for (int trial = 0; trial < 100; ++trial) {
    const Vec3 a = gaussian_vector(rng, 3);
    const Vec3 b = gaussian_vector(rng, 3);
    double s = 0.0;
    for (int i = 0; i < 3; ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    EXPECT_NEAR(relative_translation_error(a, b), std::sqrt(s), 1e-12);
  }
}

TEST(Aggregate, MeanMedian) {
  const std::vector<double> v{3, 1, 2, 10};
  const auto a = aggregate(v);
  EXPECT_EQ(a.mean, 4.0);
  EXPECT_EQ(a.median, 2.5);
  EXPECT_EQ(a.count, 4u);
  EXPECT_EQ(aggregate({}).count, 0u);
}
