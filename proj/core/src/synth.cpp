#include "i2preg/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <numeric>
#include <tuple>

#include <nlohmann/json.hpp>

#include "i2preg/error.hpp"
#include "i2preg/io.hpp"
#include "i2preg/random.hpp"

namespace i2preg {

namespace {

// Stream ids for derive_seed; pair ids occupy the low range.
constexpr std::uint64_t kCloudOnlyStream = 1ULL << 40;
constexpr std::uint64_t kSceneStream = 0x5ce;
constexpr std::uint64_t kPoseStream = 0x905e;

std::array<std::pair<Vec3, Vec3>, 6> box_faces(const Vec3& h, std::array<Vec3, 6>& centers) {
  const Vec3 x = Vec3::UnitX() * h.x();
  const Vec3 y = Vec3::UnitY() * h.y();
  const Vec3 z = Vec3::UnitZ() * h.z();
  centers = {x, -x, y, -y, z, -z};
  return {{{y, z}, {y, z}, {x, z}, {x, z}, {x, y}, {x, y}}};
}

Vec3 sample_on(const Primitive& p, Rng& rng) {
  std::uniform_real_distribution<double> sym(-1.0, 1.0);
  switch (p.kind) {
    case Primitive::Kind::Plane: {
      const double a = sym(rng);
      const double b = sym(rng);
      return p.center + a * p.axis_u + b * p.axis_v;
    }
    case Primitive::Kind::Box: {
      std::array<Vec3, 6> centers;
      const auto faces = box_faces(p.half_extents, centers);
      std::array<double, 6> areas{};
      for (std::size_t f = 0; f < 6; ++f) areas[f] = faces[f].first.cross(faces[f].second).norm();
      std::discrete_distribution<std::size_t> pick(areas.begin(), areas.end());
      const std::size_t f = pick(rng);
      const double a = sym(rng);
      const double b = sym(rng);
      return p.center + centers[f] + a * faces[f].first + b * faces[f].second;
    }
    case Primitive::Kind::Sphere:
      return p.center + p.radius * Vec3(random_unit_vector(rng, 3));
  }
  return p.center;
}

}  // namespace

double Primitive::area() const {
  switch (kind) {
    case Kind::Plane:
      return 4.0 * axis_u.cross(axis_v).norm();
    case Kind::Box:
      return 8.0 * (half_extents.x() * half_extents.y() + half_extents.y() * half_extents.z() +
                    half_extents.x() * half_extents.z());
    case Kind::Sphere:
      return 4.0 * std::numbers::pi * radius * radius;
  }
  return 0.0;
}

SceneSpec SceneSpec::room() {
  SceneSpec s;
  Primitive wall;
  wall.center = {0.0, 0.0, 3.5};
  wall.axis_u = {2.4, 0.0, 0.0};
  wall.axis_v = {0.0, 1.8, 0.0};
  Primitive floor;
  floor.center = {0.0, 1.1, 2.5};
  floor.axis_u = {1.8, 0.0, 0.0};
  floor.axis_v = {0.0, 0.0, 1.0};
  Primitive box;
  box.kind = Primitive::Kind::Box;
  box.center = {-0.7, 0.5, 2.3};
  box.half_extents = {0.3, 0.45, 0.3};
  Primitive ball;
  ball.kind = Primitive::Kind::Sphere;
  ball.center = {0.6, 0.2, 2.2};
  ball.radius = 0.4;
  s.primitives = {wall, floor, box, ball};
  return s;
}

void SceneSpec::validate() const {
  if (point_count < 100) throw Error(ErrorCode::InvalidArgument, "point_count must be >= 100");
  if (primitives.empty()) throw Error(ErrorCode::InvalidArgument, "a scene needs at least one primitive");
  if (!intrinsics.is_valid()) throw Error(ErrorCode::InvalidArgument, "invalid camera intrinsics");
  if (max_rotation_deg < 0.0 || max_translation_m < 0.0) {
    throw Error(ErrorCode::InvalidArgument, "pose ranges must be non-negative");
  }
  for (const auto& p : primitives) {
    if (!(p.area() > 0.0)) throw Error(ErrorCode::InvalidArgument, "primitive with zero area");
  }
}

SyntheticScene generate_scene(const SceneSpec& spec, std::uint64_t seed) {
  spec.validate();
  SyntheticScene scene;
  scene.seed = seed;
  scene.intrinsics = spec.intrinsics;

  Rng rng = make_rng(seed, kSceneStream);
  std::vector<double> areas;
  for (const auto& p : spec.primitives) areas.push_back(p.area());
  std::discrete_distribution<std::size_t> pick(areas.begin(), areas.end());
  scene.cloud.points.reserve(static_cast<std::size_t>(spec.point_count));
  for (int i = 0; i < spec.point_count; ++i) scene.cloud.points.push_back(sample_on(spec.primitives[pick(rng)], rng));

  Vec3 centroid = Vec3::Zero();
  for (const auto& p : scene.cloud.points) centroid += p;
  centroid /= static_cast<double>(scene.cloud.size());

  Rng pose_rng = make_rng(seed, kPoseStream);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const Vec3 axis = random_unit_vector(pose_rng, 3);
  const double angle = unit(pose_rng) * spec.max_rotation_deg * std::numbers::pi / 180.0;
  const Vec3 shift_dir = random_unit_vector(pose_rng, 3);
  const Vec3 shift = shift_dir * (unit(pose_rng) * spec.max_translation_m);
  scene.gt_transform.rotation = rotation_from_axis_angle(axis * angle);
  scene.gt_transform.translation = centroid + shift - scene.gt_transform.rotation * centroid;

  const auto& k = spec.intrinsics;
  scene.depth = DepthMap(k.width, k.height);
  std::vector<int> winner(static_cast<std::size_t>(k.width) * static_cast<std::size_t>(k.height), -1);
  std::vector<double> best_z(winner.size(), 0.0);
  std::vector<Vec2> projected(scene.cloud.size());
  for (std::size_t i = 0; i < scene.cloud.size(); ++i) {
    const Vec3 c = scene.gt_transform.apply(scene.cloud.points[i]);
    if (!(c.z() > 0.0)) continue;
    projected[i] = project_point(k, c);
    const int u = pixel_round(projected[i].x());
    const int v = pixel_round(projected[i].y());
    if (!scene.depth.in_bounds(u, v)) continue;
    const std::size_t idx = scene.depth.index(u, v);
    // Strictly nearer wins, so equal depths keep the lower point index.
    if (winner[idx] < 0 || c.z() < best_z[idx]) {
      winner[idx] = static_cast<int>(i);
      best_z[idx] = c.z();
    }
  }
  for (int v = 0; v < k.height; ++v) {
    for (int u = 0; u < k.width; ++u) {
      const std::size_t idx = scene.depth.index(u, v);
      if (winner[idx] < 0) continue;
      scene.depth.set(u, v, static_cast<double>(static_cast<float>(best_z[idx])));
      scene.gt_correspondences.push_back({projected[static_cast<std::size_t>(winner[idx])], winner[idx], 1.0});
    }
  }
  if (scene.gt_correspondences.empty()) throw Error(ErrorCode::EmptyVisibleSet, "no point projects into the image");
  return scene;
}

void CorruptionConfig::validate() const {
  if (!(gaussian_sigma_m >= 0.0)) throw Error(ErrorCode::InvalidArgument, "gaussian_sigma_m must be >= 0");
  if (!(mask_ratio >= 0.0 && mask_ratio <= 1.0)) throw Error(ErrorCode::InvalidArgument, "mask_ratio must be in [0,1]");
  if (!(feature_noise_sigma >= 0.0)) throw Error(ErrorCode::InvalidArgument, "feature_noise_sigma must be >= 0");
  if (!(outlier_fraction >= 0.0 && outlier_fraction <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "outlier_fraction must be in [0,1]");
  }
}

SyntheticFeatures synthesize_features(const SyntheticScene& scene, Eigen::Index channels,
                                      const CorruptionConfig& noise, std::span<const double> extra_image_noise) {
  noise.validate();
  if (channels < 4) throw Error(ErrorCode::InvalidArgument, "channels must be >= 4");
  const auto m = static_cast<Eigen::Index>(scene.gt_correspondences.size());
  const auto n = static_cast<Eigen::Index>(scene.cloud.size());
  if (!extra_image_noise.empty() && static_cast<Eigen::Index>(extra_image_noise.size()) != m) {
    throw Error(ErrorCode::LengthMismatch, "extra image noise must have one entry per gt correspondence");
  }

  SyntheticFeatures out;
  out.image.carrier = Carrier::Image;
  out.cloud.carrier = Carrier::Cloud;
  out.image.vectors.resize(m, channels);
  out.cloud.vectors.resize(n, channels);
  out.image_pixels.reserve(static_cast<std::size_t>(m));

  std::vector<std::uint8_t> paired(static_cast<std::size_t>(n), 0);
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto& c = scene.gt_correspondences[static_cast<std::size_t>(i)];
    Rng rng = make_rng(scene.seed, static_cast<std::uint64_t>(i));
    const Eigen::VectorXd base = random_unit_vector(rng, channels);
    out.image.vectors.row(i) = base.transpose();
    out.cloud.vectors.row(c.point_index) = base.transpose();
    paired[static_cast<std::size_t>(c.point_index)] = 1;
    out.image_pixels.push_back(c.pixel);
  }
  for (Eigen::Index j = 0; j < n; ++j) {
    if (paired[static_cast<std::size_t>(j)] != 0) continue;
    Rng rng = make_rng(scene.seed, kCloudOnlyStream + static_cast<std::uint64_t>(j));
    out.cloud.vectors.row(j) = random_unit_vector(rng, channels).transpose();
  }

  const double inv_sqrt_c = 1.0 / std::sqrt(static_cast<double>(channels));
  Rng img_rng = make_rng(noise.seed, 1);
  for (Eigen::Index i = 0; i < m; ++i) {
    const double extra = extra_image_noise.empty() ? 0.0 : extra_image_noise[static_cast<std::size_t>(i)];
    const double sigma = std::sqrt(noise.feature_noise_sigma * noise.feature_noise_sigma + extra * extra);
    if (sigma > 0.0) out.image.vectors.row(i) += (sigma * inv_sqrt_c) * gaussian_vector(img_rng, channels).transpose();
  }
  if (noise.feature_noise_sigma > 0.0) {
    Rng cloud_rng = make_rng(noise.seed, 2);
    for (Eigen::Index j = 0; j < n; ++j) {
      out.cloud.vectors.row(j) +=
          (noise.feature_noise_sigma * inv_sqrt_c) * gaussian_vector(cloud_rng, channels).transpose();
    }
  }
  out.image.vectors = normalize_rows(out.image.vectors);
  out.cloud.vectors = normalize_rows(out.cloud.vectors);

  const auto outliers = static_cast<std::size_t>(std::llround(noise.outlier_fraction * static_cast<double>(m)));
  if (outliers > 0) {
    Rng rng = make_rng(noise.seed, 3);
    std::vector<Eigen::Index> rows(static_cast<std::size_t>(m));
    std::iota(rows.begin(), rows.end(), 0);
    std::shuffle(rows.begin(), rows.end(), rng);
    for (std::size_t r = 0; r < outliers; ++r) out.image.vectors.row(rows[r]) = random_unit_vector(rng, channels).transpose();
  }
  return out;
}

DepthMap corrupt_depth(const DepthMap& depth, const CorruptionConfig& cfg) {
  cfg.validate();
  DepthMap out = depth;
  if (cfg.gaussian_sigma_m > 0.0) {
    Rng rng = make_rng(cfg.seed, 4);
    std::normal_distribution<double> normal(0.0, cfg.gaussian_sigma_m);
    for (int v = 0; v < depth.height(); ++v) {
      for (int u = 0; u < depth.width(); ++u) {
        if (depth.valid(u, v)) out.set(u, v, depth.at(u, v) + normal(rng));
      }
    }
  }
  const auto count = static_cast<std::size_t>(std::llround(cfg.mask_ratio * static_cast<double>(depth.pixel_count())));
  if (count > 0) {
    Rng rng = make_rng(cfg.seed, 5);
    std::vector<std::size_t> idx(depth.pixel_count());
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    const auto w = static_cast<std::size_t>(depth.width());
    for (std::size_t i = 0; i < count; ++i) out.invalidate(static_cast<int>(idx[i] % w), static_cast<int>(idx[i] / w));
  }
  return out;
}

std::vector<std::vector<int>> image_tiles(std::span<const Vec2> pixels, const CameraIntrinsics& k, int rows,
                                          int cols) {
  if (rows < 1 || cols < 1) throw Error(ErrorCode::InvalidArgument, "tile grid must be at least 1x1");
  std::vector<std::vector<int>> tiles(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols));
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    const int u = std::clamp(pixel_round(pixels[i].x()), 0, k.width - 1);
    const int v = std::clamp(pixel_round(pixels[i].y()), 0, k.height - 1);
    const int c = std::min(cols - 1, u * cols / k.width);
    const int r = std::min(rows - 1, v * rows / k.height);
    tiles[static_cast<std::size_t>(r * cols + c)].push_back(static_cast<int>(i));
  }
  return tiles;
}

std::vector<std::vector<int>> voxel_cells(const PointCloud& cloud, double voxel_size) {
  if (!(voxel_size > 0.0)) throw Error(ErrorCode::InvalidArgument, "voxel_size must be > 0");
  std::map<std::tuple<long, long, long>, std::vector<int>> cells;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3& p = cloud.points[i];
    const auto key = std::make_tuple(static_cast<long>(std::floor(p.x() / voxel_size)),
                                     static_cast<long>(std::floor(p.y() / voxel_size)),
                                     static_cast<long>(std::floor(p.z() / voxel_size)));
    cells[key].push_back(static_cast<int>(i));
  }
  std::vector<std::vector<int>> out;
  out.reserve(cells.size());
  for (auto& [key, members] : cells) out.push_back(std::move(members));
  return out;
}

namespace {

nlohmann::json transform_json(const RigidTransform& t) {
  nlohmann::json j;
  std::vector<double> r;
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) r.push_back(t.rotation(a, b));
  j["rotation"] = r;
  j["translation"] = {t.translation.x(), t.translation.y(), t.translation.z()};
  return j;
}

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
  }
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
  out << j.dump(2) << '\n';
  if (!out) throw Error(ErrorCode::IoError, "failed writing " + path.string());
}

}  // namespace

void write_intrinsics_json(const std::filesystem::path& path, const CameraIntrinsics& k) {
  write_json(path, {{"fx", k.fx}, {"fy", k.fy}, {"cx", k.cx}, {"cy", k.cy}, {"width", k.width}, {"height", k.height}});
}

CameraIntrinsics read_intrinsics_json(const std::filesystem::path& path) {
  const auto j = read_json(path);
  CameraIntrinsics k;
  try {
    k.fx = j.at("fx").get<double>();
    k.fy = j.at("fy").get<double>();
    k.cx = j.at("cx").get<double>();
    k.cy = j.at("cy").get<double>();
    k.width = j.at("width").get<int>();
    k.height = j.at("height").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
  }
  if (!k.is_valid()) throw Error(ErrorCode::ParseError, path.string() + ": invalid intrinsics");
  return k;
}

void save_scene_bundle(const std::filesystem::path& dir, const SyntheticScene& scene) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) throw Error(ErrorCode::IoError, "cannot create " + dir.string());
  io::write_ply(dir / "cloud.ply", scene.cloud);
  io::write_depth(dir / "depth.bin", scene.depth);
  write_intrinsics_json(dir / "intrinsics.json", scene.intrinsics);
  auto pose = transform_json(scene.gt_transform);
  pose["scene_seed"] = scene.seed;
  write_json(dir / "gt_pose.json", pose);
  io::write_correspondences(dir / "gt_corrs.csv", scene.gt_correspondences);
}

SyntheticScene load_scene_bundle(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw Error(ErrorCode::IoError, dir.string() + " is not a directory");
  SyntheticScene scene;
  scene.cloud = io::read_ply(dir / "cloud.ply");
  scene.depth = io::read_depth(dir / "depth.bin");
  scene.intrinsics = read_intrinsics_json(dir / "intrinsics.json");
  const auto pose = read_json(dir / "gt_pose.json");
  try {
    const auto r = pose.at("rotation").get<std::vector<double>>();
    const auto t = pose.at("translation").get<std::vector<double>>();
    if (r.size() != 9 || t.size() != 3) throw Error(ErrorCode::ParseError, "gt_pose.json: bad array lengths");
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) scene.gt_transform.rotation(a, b) = r[static_cast<std::size_t>(a * 3 + b)];
    scene.gt_transform.translation = {t[0], t[1], t[2]};
    scene.seed = pose.value("scene_seed", std::uint64_t{0});
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("gt_pose.json: ") + e.what());
  }
  scene.gt_correspondences = io::read_correspondences(dir / "gt_corrs.csv");
  if (scene.depth.width() != scene.intrinsics.width || scene.depth.height() != scene.intrinsics.height) {
    throw Error(ErrorCode::DimensionMismatch, "depth map size differs from the intrinsics");
  }
  for (const auto& c : scene.gt_correspondences) {
    if (c.point_index < 0 || static_cast<std::size_t>(c.point_index) >= scene.cloud.size()) {
      throw Error(ErrorCode::ParseError, "gt_corrs.csv references a point outside the cloud");
    }
  }
  return scene;
}

}  // namespace i2preg
