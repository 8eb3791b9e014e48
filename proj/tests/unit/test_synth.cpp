#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <set>

#include <gtest/gtest.h>

#include "i2preg/error.hpp"
#include "i2preg/matching.hpp"
#include "i2preg/metrics.hpp"
#include "i2preg/normals.hpp"
#include "i2preg/synth.hpp"

using namespace i2preg;

namespace {

SceneSpec small_room(int points = 8000) {
  SceneSpec s = SceneSpec::room();
  s.point_count = points;
  return s;
}

SceneSpec fronto_plane() {
  SceneSpec s;
  s.primitives = {Primitive{Primitive::Kind::Plane, {0, 0, 2}, {3, 0, 0}, {0, 3, 0}}};
  s.point_count = 300000;
  s.max_rotation_deg = 0.0;
  s.max_translation_m = 0.0;
  return s;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST(Scene, FrontoParallelPlane) {
  const auto scene = generate_scene(fronto_plane(), 3);
  EXPECT_LT((scene.gt_transform.rotation - Mat3::Identity()).norm(), 1e-12);
  EXPECT_LT(scene.gt_transform.translation.norm(), 1e-12);
  const auto& d = scene.depth;
  ASSERT_GT(d.valid_count(), d.pixel_count() * 9 / 10);
  const auto normals = depth_to_normals(d);
  std::size_t checked = 0;
  for (int v = 0; v < d.height(); ++v)
    for (int u = 0; u < d.width(); ++u) {
      if (d.valid(u, v)) EXPECT_EQ(d.at(u, v), 2.0);
      if (normals.valid[d.index(u, v)] == 0) continue;
      EXPECT_EQ(normals.normals[d.index(u, v)], Vec3(0, 0, 1));
      ++checked;
    }
  EXPECT_GT(checked, d.pixel_count() / 2);
}

TEST(Scene, IdentityPoseCorrespondencesAreProjections) {
  auto spec = fronto_plane();
  spec.point_count = 5000;
  const auto scene = generate_scene(spec, 4);
  ASSERT_FALSE(scene.gt_correspondences.empty());
  for (const auto& c : scene.gt_correspondences) {
    const Vec2 expect = project_point(scene.intrinsics, scene.cloud.points[static_cast<std::size_t>(c.point_index)]);
    EXPECT_LT((c.pixel - expect).norm(), 1e-12);
  }
}

TEST(Scene, GroundTruthPairsArePositive) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto scene = generate_scene(small_room(), seed);
    ASSERT_GT(scene.gt_correspondences.size(), 500u);
    EXPECT_TRUE(scene.gt_transform.is_valid());
    for (const auto& c : scene.gt_correspondences) {
      double z = 0.0;
      ASSERT_TRUE(scene.depth.lookup(c.pixel, z));
      const Vec3 cam = scene.gt_transform.apply(scene.cloud.points[static_cast<std::size_t>(c.point_index)]);
      EXPECT_LT((project_point(scene.intrinsics, cam) - c.pixel).norm(), 0.5);
      EXPECT_LT(std::abs(cam.z() - z), 1e-6);
      EXPECT_EQ(label_fine_pairs(c, z, scene.intrinsics, scene.cloud, scene.gt_transform), FineLabel::Positive);
    }
  }
}

TEST(Scene, PoseWithinRange) {
  const auto spec = small_room(2000);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto t = generate_scene(spec, seed).gt_transform;
    const double angle = Eigen::AngleAxisd(t.rotation).angle() * 180.0 / std::numbers::pi;
    EXPECT_LE(angle, spec.max_rotation_deg + 1e-9);
  }
}

TEST(Scene, Deterministic) {
  const auto a = generate_scene(small_room(), 11);
  const auto b = generate_scene(small_room(), 11);
  ASSERT_EQ(a.cloud.size(), b.cloud.size());
  for (std::size_t i = 0; i < a.cloud.size(); ++i) ASSERT_EQ(a.cloud.points[i], b.cloud.points[i]);
  EXPECT_TRUE(std::equal(a.depth.values().begin(), a.depth.values().end(), b.depth.values().begin(),
                         [](double x, double y) { return x == y || (std::isnan(x) && std::isnan(y)); }));
  EXPECT_EQ(a.gt_transform.rotation, b.gt_transform.rotation);
  CorruptionConfig cfg{0.01, 0.2, 0.3, 0.1, 5};
  const auto fa = synthesize_features(a, 32, cfg);
  const auto fb = synthesize_features(b, 32, cfg);
  EXPECT_EQ(fa.image.vectors, fb.image.vectors);
  EXPECT_EQ(fa.cloud.vectors, fb.cloud.vectors);
  const auto da = corrupt_depth(a.depth, cfg);
  const auto db = corrupt_depth(b.depth, cfg);
  EXPECT_TRUE(std::equal(da.mask().begin(), da.mask().end(), db.mask().begin()));
  const auto c = generate_scene(small_room(), 12);
  EXPECT_NE(a.gt_transform.translation, c.gt_transform.translation);
}

TEST(Scene, SpecValidation) {
  SceneSpec empty;
  EXPECT_THROW(generate_scene(empty, 1), Error);
  auto bad = small_room();
  bad.point_count = 0;
  EXPECT_THROW(bad.validate(), Error);
  auto away = fronto_plane();
  away.primitives[0].center = {0, 0, -5};
  try {
    generate_scene(away, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyVisibleSet);
  }
}

TEST(Features, ZeroNoiseIsExact) {
  const auto scene = generate_scene(small_room(3000), 21);
  const auto f = synthesize_features(scene, 256, {});
  ASSERT_EQ(f.image.rows(), static_cast<Eigen::Index>(scene.gt_correspondences.size()));
  ASSERT_EQ(f.cloud.rows(), static_cast<Eigen::Index>(scene.cloud.size()));
  double worst_off = 0.0;
  for (std::size_t r = 0; r < scene.gt_correspondences.size(); r += 7) {
    const Eigen::Index i = static_cast<Eigen::Index>(r);
    const int p = scene.gt_correspondences[r].point_index;
    EXPECT_NEAR(f.image.vectors.row(i).dot(f.cloud.vectors.row(p)), 1.0, 1e-12);
    worst_off = std::max(worst_off, std::abs(f.image.vectors.row(i).dot(f.cloud.vectors.row((p + 1) % f.cloud.rows()))));
  }
  EXPECT_LT(worst_off, 0.35);
}

TEST(Features, NoiseSweepLowersInlierRatio) {
  const auto scene = generate_scene(small_room(4000), 22);
  std::vector<int> ids(scene.cloud.size());
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<int>(i);
  double last = 2.0;
  for (double sigma : {0.0, 0.2, 0.5}) {
    CorruptionConfig cfg;
    cfg.feature_noise_sigma = sigma;
    cfg.seed = 3;
    const auto f = synthesize_features(scene, 32, cfg);
    const auto m = fine_match(f.image, f.cloud, f.image_pixels, ids);
    ASSERT_FALSE(m.empty());
    const double ir = inlier_ratio(m, scene.cloud, scene.depth, scene.intrinsics, scene.gt_transform, 0.05);
    EXPECT_LE(ir, last);
    last = ir;
  }
}

TEST(Features, AllOutliersLeaveNoCorrectMatches) {
  const auto scene = generate_scene(small_room(4000), 23);
  CorruptionConfig cfg;
  cfg.outlier_fraction = 1.0;
  const auto f = synthesize_features(scene, 64, cfg);
  std::vector<int> ids(scene.cloud.size());
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<int>(i);
  const auto m = fine_match(f.image, f.cloud, f.image_pixels, ids);
  std::size_t correct = 0;
  for (const auto& c : m) {
    for (const auto& g : scene.gt_correspondences)
      if (g.pixel == c.pixel && g.point_index == c.point_index) ++correct;
  }
  EXPECT_LE(correct, scene.gt_correspondences.size() / 100);
}

TEST(Corruption, IdentityMaskAndNoise) {
  DepthMap d(640, 480);
  for (int v = 0; v < 480; ++v)
    for (int u = 0; u < 640; ++u) d.set(u, v, 2.0 + 0.001 * u);
  const auto same = corrupt_depth(d, {});
  EXPECT_TRUE(std::equal(d.values().begin(), d.values().end(), same.values().begin()));

  CorruptionConfig mask;
  mask.mask_ratio = 0.4;
  const auto masked = corrupt_depth(d, mask);
  const double invalid = 1.0 - static_cast<double>(masked.valid_count()) / static_cast<double>(d.pixel_count());
  EXPECT_NEAR(invalid, 0.4, 0.02);

  CorruptionConfig noise;
  noise.gaussian_sigma_m = 0.015;
  noise.seed = 8;
  const auto noisy = corrupt_depth(d, noise);
  double sum = 0.0;
  double sq = 0.0;
  for (std::size_t i = 0; i < d.pixel_count(); ++i) {
    const double r = noisy.values()[i] - d.values()[i];
    sum += r;
    sq += r * r;
  }
  const double n = static_cast<double>(d.pixel_count());
  const double sd = std::sqrt(sq / n - (sum / n) * (sum / n));
  EXPECT_NEAR(sd, 0.015, 0.0015);

  CorruptionConfig bad;
  bad.mask_ratio = 1.5;
  EXPECT_THROW(bad.validate(), Error);
}

TEST(Patches, TilesAndVoxelsPartition) {
  const auto scene = generate_scene(small_room(3000), 24);
  const auto f = synthesize_features(scene, 8, {});
  const auto tiles = image_tiles(f.image_pixels, scene.intrinsics, 6, 8);
  ASSERT_EQ(tiles.size(), 48u);
  std::set<int> seen;
  for (const auto& t : tiles)
    for (int r : t) EXPECT_TRUE(seen.insert(r).second);
  EXPECT_EQ(seen.size(), f.image_pixels.size());

  const auto cells = voxel_cells(scene.cloud, 0.25);
  std::size_t total = 0;
  for (const auto& c : cells) {
    ASSERT_FALSE(c.empty());
    const Vec3 lo = (scene.cloud.points[static_cast<std::size_t>(c[0])] / 0.25).array().floor();
    for (int i : c) EXPECT_EQ(Vec3((scene.cloud.points[static_cast<std::size_t>(i)] / 0.25).array().floor()), lo);
    total += c.size();
  }
  EXPECT_EQ(total, scene.cloud.size());
}

TEST(Bundle, RoundTripAndByteIdentical) {
  const auto scene = generate_scene(small_room(2000), 25);
  const auto dir = std::filesystem::temp_directory_path() / "i2preg_bundle_a";
  const auto dir2 = std::filesystem::temp_directory_path() / "i2preg_bundle_b";
  save_scene_bundle(dir, scene);
  save_scene_bundle(dir2, generate_scene(small_room(2000), 25));
  for (const char* name : {"cloud.ply", "depth.bin", "intrinsics.json", "gt_pose.json", "gt_corrs.csv"}) {
    ASSERT_TRUE(std::filesystem::exists(dir / name)) << name;
    EXPECT_EQ(slurp(dir / name), slurp(dir2 / name)) << name;
  }
  const auto back = load_scene_bundle(dir);
  EXPECT_EQ(back.seed, scene.seed);
  ASSERT_EQ(back.cloud.size(), scene.cloud.size());
  for (std::size_t i = 0; i < scene.cloud.size(); ++i) ASSERT_EQ(back.cloud.points[i], scene.cloud.points[i]);
  EXPECT_EQ(back.gt_transform.rotation, scene.gt_transform.rotation);
  EXPECT_EQ(back.gt_transform.translation, scene.gt_transform.translation);
  ASSERT_EQ(back.gt_correspondences.size(), scene.gt_correspondences.size());
  EXPECT_EQ(back.gt_correspondences.back().pixel, scene.gt_correspondences.back().pixel);
  EXPECT_EQ(back.depth.valid_count(), scene.depth.valid_count());
  EXPECT_THROW(load_scene_bundle("/nonexistent/bundle"), Error);
}
