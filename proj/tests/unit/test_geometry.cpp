#include <cmath>
#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include <gtest/gtest.h>

#include "i2preg/embedding.hpp"
#include "i2preg/error.hpp"
#include "i2preg/geometry.hpp"
#include "i2preg/io.hpp"
#include "i2preg/knn.hpp"
#include "i2preg/random.hpp"

using namespace i2preg;

namespace {

RigidTransform random_transform(Rng& rng) {
  std::uniform_real_distribution<double> angle(-std::numbers::pi, std::numbers::pi);
  return RigidTransform::from_axis_angle(random_unit_vector(rng, 3), angle(rng), gaussian_vector(rng, 3));
}

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("i2preg_geometry_" + name);
}

}  // namespace

TEST(Transform, IdentityAndAxisRotation) {
  EXPECT_TRUE(apply_transform(RigidTransform::identity(), {1, 2, 3}).isApprox(Vec3(1, 2, 3)));
  const auto rz = RigidTransform::from_axis_angle(Vec3::UnitZ(), std::numbers::pi / 2);
  EXPECT_LT((apply_transform(rz, {1, 0, 0}) - Vec3(0, 1, 0)).norm(), 1e-15);
}

TEST(Transform, MatchesHomogeneousMultiply) {
  Rng rng = make_rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    const RigidTransform t = random_transform(rng);
    const Vec3 p = gaussian_vector(rng, 3);
    Eigen::Matrix4d h = Eigen::Matrix4d::Identity();
    h.topLeftCorner<3, 3>() = t.rotation;
    h.topRightCorner<3, 1>() = t.translation;
    const Eigen::Vector4d q = h * Eigen::Vector4d(p.x(), p.y(), p.z(), 1.0);
    EXPECT_LT((apply_transform(t, p) - q.head<3>()).norm(), 1e-12);
    EXPECT_TRUE(t.is_valid());
  }
}

TEST(Transform, InverseAndCompose) {
  Rng rng = make_rng(12);
  const RigidTransform a = random_transform(rng);
  const RigidTransform b = random_transform(rng);
  const Vec3 p(0.3, -1.2, 2.0);
  EXPECT_LT((a.inverse().apply(a.apply(p)) - p).norm(), 1e-12);
  EXPECT_LT((a.compose(b).apply(p) - a.apply(b.apply(p))).norm(), 1e-12);
}

TEST(Transform, ProjectToRotation) {
  Rng rng = make_rng(13);
  const Mat3 r = random_transform(rng).rotation;
  const Mat3 noisy = r + 1e-3 * Mat3::Random();
  EXPECT_TRUE(is_rotation(project_to_rotation(noisy)));
  EXPECT_FALSE(is_rotation(noisy));
  EXPECT_LT((project_to_rotation(noisy) - r).norm(), 1e-2);
}

TEST(Camera, ProjectionExamples) {
  const CameraIntrinsics k{100, 100, 50, 50, 100, 100};
  EXPECT_TRUE(project_point(k, {0, 0, 1}).isApprox(Vec2(50, 50)));
  EXPECT_TRUE(project_point(k, {0.5, 0, 1}).isApprox(Vec2(100, 50)));
  EXPECT_TRUE(backproject_pixel(k, 50, 50, 2).isApprox(Vec3(0, 0, 2)));
  EXPECT_TRUE(backproject_pixel(k, 100, 50, 1).isApprox(Vec3(0.5, 0, 1)));
}

TEST(Camera, RoundTrip) {
  const CameraIntrinsics k{210.5, 190.25, 63.5, 47.5, 128, 96};
  Rng rng = make_rng(14);
  std::uniform_real_distribution<double> xy(-2.0, 2.0);
  std::uniform_real_distribution<double> z(0.1, 10.0);
  for (int i = 0; i < 200; ++i) {
    const Vec3 p(xy(rng), xy(rng), z(rng));
    const Vec2 uv = project_point(k, p);
    EXPECT_LT((backproject_pixel(k, uv.x(), uv.y(), p.z()) - p).norm(), 1e-9);
  }
}

TEST(Camera, NonPositiveDepthThrows) {
  const CameraIntrinsics k{100, 100, 50, 50, 100, 100};
  try {
    project_point(k, {0, 0, 0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonPositiveDepth);
  }
  EXPECT_THROW(backproject_pixel(k, 1, 1, -1.0), Error);
}

TEST(DepthMap, ValidityAndLookup) {
  DepthMap d(4, 3);
  EXPECT_EQ(d.valid_count(), 0u);
  d.set(1, 2, 2.5);
  d.set(2, 2, -1.0);
  d.set(3, 2, std::nan(""));
  EXPECT_TRUE(d.valid(1, 2));
  EXPECT_FALSE(d.valid(2, 2));
  EXPECT_FALSE(d.valid(3, 2));
  double z = 0.0;
  EXPECT_TRUE(d.lookup({1.4, 1.6}, z));
  EXPECT_EQ(z, 2.5);
  EXPECT_FALSE(d.lookup({0.0, 0.0}, z));
  EXPECT_EQ(d.valid_count(), 1u);
}

TEST(Embedding, Examples) {
  const auto e0 = fourier_embed(0.0, 1);
  ASSERT_EQ(e0.size(), 3u);
  EXPECT_EQ(e0[0], 0.0);
  EXPECT_EQ(e0[1], 0.0);
  EXPECT_EQ(e0[2], 1.0);
  const double h = std::numbers::pi / 2;
  const auto e1 = fourier_embed(h, 1);
  EXPECT_EQ(e1[0], h);
  EXPECT_NEAR(e1[1], 1.0, 1e-15);
  EXPECT_NEAR(e1[2], 0.0, 1e-15);
  const double q = std::numbers::pi / 4;
  const auto e2 = fourier_embed(q, 2);
  const std::vector<double> expect{q, std::sin(q), std::cos(q), std::sin(2 * q), std::cos(2 * q)};
  ASSERT_EQ(e2.size(), expect.size());
  for (std::size_t i = 0; i < expect.size(); ++i) EXPECT_NEAR(e2[i], expect[i], 1e-15);
  const std::vector<double> pos{0.1, -0.7, 3.0};
  const auto e3 = fourier_embed(pos, 4);
  ASSERT_EQ(e3.size(), 27u);
  EXPECT_EQ(e3[9], -0.7);
  EXPECT_EQ(fourier_embed(5.0, 0), std::vector<double>{5.0});
}

TEST(KdTree, MatchesBruteForce) {
  Rng rng = make_rng(15);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int n : {1, 7, 50, 2000}) {
    std::vector<Vec3> pts(static_cast<std::size_t>(n));
    for (auto& p : pts) p = {u(rng), u(rng), std::floor(u(rng) * 4.0) / 4.0};  // repeated z values create ties
    const KdTree3 tree(pts);
    for (int q = 0; q < std::min(n, 60); ++q) {
      const std::size_t k = std::min<std::size_t>(8, static_cast<std::size_t>(n - 1));
      const auto got = tree.knn_of(q, k);
      std::vector<Neighbor> all;
      for (int j = 0; j < n; ++j) {
        if (j != q) all.push_back({(pts[static_cast<std::size_t>(j)] - pts[static_cast<std::size_t>(q)]).squaredNorm(), j});
      }
      std::sort(all.begin(), all.end());
      all.resize(k);
      ASSERT_EQ(got, all) << "n=" << n << " q=" << q;
    }
  }
}

TEST(KdTree, TiesPreferLowerIndex) {
  std::vector<Vec2> pts{{0, 0}, {1, 0}, {-1, 0}, {0, 1}, {0, -1}};
  const KdTree2 tree(pts);
  const auto nn = tree.knn_of(0, 2);
  ASSERT_EQ(nn.size(), 2u);
  EXPECT_EQ(nn[0].index, 1);
  EXPECT_EQ(nn[1].index, 2);
}

TEST(Io, PlyAndXyzRoundTrip) {
  Rng rng = make_rng(16);
  PointCloud cloud;
  for (int i = 0; i < 50; ++i) cloud.points.push_back(gaussian_vector(rng, 3));
  const auto ply = temp_path("cloud.ply");
  const auto xyz = temp_path("cloud.xyz");
  io::write_ply(ply, cloud);
  io::write_xyz(xyz, cloud);
  const auto a = io::read_cloud(ply);
  const auto b = io::read_cloud(xyz);
  ASSERT_EQ(a.size(), cloud.size());
  ASSERT_EQ(b.size(), cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    EXPECT_EQ(a.points[i], cloud.points[i]);
    EXPECT_EQ(b.points[i], cloud.points[i]);
  }
}

TEST(Io, PlyWithExtraFloatProperties) {
  const auto path = temp_path("extra.ply");
  {
    std::ofstream out(path);
    out << "ply\nformat ascii 1.0\nelement vertex 2\nproperty float nx\nproperty float x\nproperty float y\n"
           "property float z\nproperty uchar red\nend_header\n9 1 2 3 255\n9 4 5 6 0\n";
  }
  const auto c = io::read_ply(path);
  ASSERT_EQ(c.size(), 2u);
  EXPECT_EQ(c.points[1], Vec3(4, 5, 6));
}

TEST(Io, DepthRoundTripKeepsMask) {
  DepthMap d(5, 4);
  for (int v = 0; v < 4; ++v)
    for (int u = 0; u < 5; ++u) d.set(u, v, 1.0 + 0.25 * u + 0.5 * v);
  d.invalidate(2, 1);
  std::stringstream buf;
  io::write_depth(buf, d);
  const DepthMap r = io::read_depth(buf);
  ASSERT_EQ(r.width(), 5);
  ASSERT_EQ(r.height(), 4);
  EXPECT_FALSE(r.valid(2, 1));
  EXPECT_EQ(r.at(3, 2), d.at(3, 2));
  EXPECT_EQ(r.valid_count(), d.valid_count());
}

TEST(Io, DepthHeaderErrors) {
  std::stringstream bad("DEPTH 2\n");
  EXPECT_THROW(io::read_depth(bad), Error);
  std::stringstream truncated("DEPTH 2 2\nabc");
  EXPECT_THROW(io::read_depth(truncated), Error);
  try {
    io::read_depth(std::filesystem::path("/nonexistent/depth.bin"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::IoError);
  }
}

TEST(Io, CorrespondenceCsvRoundTrip) {
  const std::vector<Correspondence> c{{{1.25, 3.5}, 7, 0.75}, {{0.1, 0.2}, 0, 1.0 / 3.0}};
  const auto path = temp_path("corrs.csv");
  io::write_correspondences(path, c);
  const auto r = io::read_correspondences(path);
  ASSERT_EQ(r.size(), 2u);
  EXPECT_EQ(r[1].pixel, c[1].pixel);
  EXPECT_EQ(r[1].score, c[1].score);
  EXPECT_EQ(r[0].point_index, 7);
}
