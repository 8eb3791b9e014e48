#include "i2preg/cli/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <utility>

#include "i2preg/error.hpp"
#include "i2preg/graph.hpp"
#include "i2preg/losses.hpp"
#include "i2preg/metrics.hpp"
#include "i2preg/normals.hpp"

namespace i2preg::cli {

namespace {

FeatureField patch_features(const FeatureField& rows, const std::vector<std::vector<int>>& patches) {
  FeatureField out;
  out.carrier = rows.carrier;
  out.vectors = FeatureMatrix::Zero(static_cast<Eigen::Index>(patches.size()), rows.channels());
  for (std::size_t p = 0; p < patches.size(); ++p) {
    for (int r : patches[p]) out.vectors.row(static_cast<Eigen::Index>(p)) += rows.vectors.row(r);
  }
  out.vectors = normalize_rows(out.vectors);
  return out;
}

FeatureField gather(const FeatureField& rows, const std::vector<int>& idx) {
  FeatureField out;
  out.carrier = rows.carrier;
  out.vectors.resize(static_cast<Eigen::Index>(idx.size()), rows.channels());
  for (std::size_t i = 0; i < idx.size(); ++i) out.vectors.row(static_cast<Eigen::Index>(i)) = rows.vectors.row(idx[i]);
  return out;
}

struct Candidate {
  int row;
  int point;
  double score;
};

FeatureField refine(const KnnGraph& graph, const FeatureField& f, const GraphAttentionParams& params, double w) {
  const FeatureField fused = gated_fusion(f, light_gat_forward(graph, f, params), params);
  FeatureField out;
  out.carrier = f.carrier;
  out.vectors = normalize_rows((1.0 - w) * f.vectors + w * fused.vectors);
  return out;
}

double mean_circle_loss(const FeatureField& img, const FeatureField& cloud) {
  const Eigen::Index n = std::min<Eigen::Index>(img.rows(), 128);
  if (n < 2) return 0.0;
  double sum = 0.0;
  std::vector<double> neg;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double pos = (img.vectors.row(i) - cloud.vectors.row(i)).norm();
    neg.clear();
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j != i) neg.push_back((img.vectors.row(i) - cloud.vectors.row(j)).norm());
    }
    sum += circle_loss(std::span<const double>(&pos, 1), neg);
  }
  return sum / static_cast<double>(n);
}

}  // namespace

Patches make_patches(const SyntheticScene& scene, const PipelineConfig& cfg) {
  std::vector<Vec2> pixels;
  pixels.reserve(scene.gt_correspondences.size());
  for (const auto& c : scene.gt_correspondences) pixels.push_back(c.pixel);
  return {image_tiles(pixels, scene.intrinsics, cfg.tile_rows, cfg.tile_cols),
          voxel_cells(scene.cloud, cfg.voxel_size)};
}

std::vector<double> normal_cue_noise(const SyntheticScene& scene, const DepthMap& corrupted, const NormalCue& cue) {
  const NormalField clean = depth_to_normals(scene.depth);
  const NormalField noisy = depth_to_normals(corrupted);
  std::vector<double> out;
  out.reserve(scene.gt_correspondences.size());
  for (const auto& c : scene.gt_correspondences) {
    const int u = pixel_round(c.pixel.x());
    const int v = pixel_round(c.pixel.y());
    const std::size_t idx = scene.depth.index(u, v);
    double level = 0.0;
    if (clean.valid[idx] != 0) {
      if (noisy.valid[idx] == 0) {
        level = 1.0;
      } else {
        const double cosang = std::clamp(clean.normals[idx].dot(noisy.normals[idx]), -1.0, 1.0);
        const double deg = std::acos(cosang) * 180.0 / std::numbers::pi;
        level = std::min(1.0, deg / cue.saturation_deg);
      }
    }
    out.push_back(cue.noise_weight * level);
  }
  return out;
}

RegistrationResult register_scene(const SyntheticScene& scene, const PipelineConfig& cfg, bool with_losses) {
  cfg.validate();
  RegistrationResult result;

  const DepthMap corrupted = corrupt_depth(scene.depth, cfg.corruption);
  const auto extra = normal_cue_noise(scene, corrupted, cfg.normal_cue);
  const SyntheticFeatures feats = synthesize_features(scene, cfg.feature_channels, cfg.corruption, extra);

  const Patches patches = make_patches(scene, cfg);
  const FeatureField img_patches = patch_features(feats.image, patches.image);
  const FeatureField cloud_patches = patch_features(feats.cloud, patches.cloud);
  result.coarse = coarse_match(cosine_score_map(img_patches, cloud_patches), cfg.top_k_coarse);

  std::map<std::pair<int, int>, int> row_of_pixel;
  for (std::size_t r = 0; r < feats.image_pixels.size(); ++r) {
    const Vec2& p = feats.image_pixels[r];
    row_of_pixel[{pixel_round(p.x()), pixel_round(p.y())}] = static_cast<int>(r);
  }

  std::vector<Candidate> candidates;
  std::vector<Vec2> px;
  for (const auto& pm : result.coarse) {
    const auto& rows = patches.image[static_cast<std::size_t>(pm.img_patch)];
    const auto& points = patches.cloud[static_cast<std::size_t>(pm.cloud_patch)];
    if (rows.empty() || points.empty()) continue;
    px.clear();
    for (int r : rows) px.push_back(feats.image_pixels[static_cast<std::size_t>(r)]);
    for (const auto& c : fine_match(gather(feats.image, rows), gather(feats.cloud, points), px, points,
                                    cfg.min_fine_score)) {
      const int row = row_of_pixel.at({pixel_round(c.pixel.x()), pixel_round(c.pixel.y())});
      candidates.push_back({row, c.point_index, c.score});
    }
  }
  // A pixel or point can surface in several patch pairs; keep its best match.
  std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.row != b.row) return a.row < b.row;
    return a.point < b.point;
  });
  std::vector<std::uint8_t> row_used(feats.image_pixels.size(), 0);
  std::vector<std::uint8_t> point_used(scene.cloud.size(), 0);
  std::vector<Candidate> kept;
  for (const auto& c : candidates) {
    if (row_used[static_cast<std::size_t>(c.row)] != 0 || point_used[static_cast<std::size_t>(c.point)] != 0) continue;
    row_used[static_cast<std::size_t>(c.row)] = 1;
    point_used[static_cast<std::size_t>(c.point)] = 1;
    kept.push_back(c);
  }
  std::sort(kept.begin(), kept.end(), [](const Candidate& a, const Candidate& b) { return a.row < b.row; });
  for (const auto& c : kept) result.fine.push_back({feats.image_pixels[static_cast<std::size_t>(c.row)], c.point, c.score});

  // Graph consistency: refine matched features over 2D and 3D k-NN graphs
  // and drop pairs whose refined descriptors disagree.
  const double w = warmup_weight(cfg.epoch, cfg.warmup);
  if (kept.size() >= 2) {
    std::vector<int> rows;
    std::vector<int> points;
    std::vector<Vec2> pix;
    PointCloud sub;
    for (const auto& c : kept) {
      rows.push_back(c.row);
      points.push_back(c.point);
      pix.push_back(feats.image_pixels[static_cast<std::size_t>(c.row)]);
      sub.points.push_back(scene.cloud.points[static_cast<std::size_t>(c.point)]);
    }
    const KnnGraph g2 = build_knn_graph(std::span<const Vec2>(pix), cfg.k_neighbors);
    KnnGraph g3;
    if (cfg.adaptive_k && sub.size() > 12) {
      const auto sizes = adaptive_neighborhood_sizes(sub, cfg.k_neighbors, std::max<std::size_t>(12, cfg.k_neighbors));
      g3 = build_knn_graph(std::span<const Vec3>(sub.points), *std::max_element(sizes.begin(), sizes.end()));
      for (std::size_t i = 0; i < g3.node_count; ++i) {
        if (g3.neighbors[i].size() > sizes[i]) g3.neighbors[i].resize(sizes[i]);
      }
    } else {
      g3 = build_knn_graph(std::span<const Vec3>(sub.points), cfg.k_neighbors);
    }
    const auto params = GraphAttentionParams::random(cfg.feature_channels, cfg.gat_seed);
    const FeatureField fi = refine(g2, gather(feats.image, rows), params, w);
    const FeatureField fc = refine(g3, gather(feats.cloud, points), params, w);
    for (std::size_t i = 0; i < kept.size(); ++i) {
      const auto r = static_cast<Eigen::Index>(i);
      if (fi.vectors.row(r).dot(fc.vectors.row(r)) >= cfg.min_fine_score) result.correspondences.push_back(result.fine[i]);
    }
    if (with_losses) {
      const double gdc = gdc_loss(fi, fc).value;
      const double circle = mean_circle_loss(fi, fc);
      double normal = 0.0;
      try {
        normal = normal_consistency_loss(depth_to_normals(corrupted), depth_to_normals(scene.depth)).value;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::EmptyOverlap) throw;
      }
      const auto& lw = cfg.loss_weights;
      result.losses = {
          {"circle", circle, cfg.epoch, lw.lambda1},
          {"normal", normal, cfg.epoch, lw.lambda2},
          {"gdc", gdc, cfg.epoch, lw.lambda3 * w},
          {"total", total_loss(circle, normal, w * gdc, lw), cfg.epoch, 1.0},
      };
    }
  } else {
    result.correspondences = result.fine;
  }

  std::vector<PnpCorrespondence> pnp;
  pnp.reserve(result.correspondences.size());
  for (const auto& c : result.correspondences) {
    pnp.push_back({c.pixel, scene.cloud.points[static_cast<std::size_t>(c.point_index)]});
  }
  if (pnp.size() >= static_cast<std::size_t>(cfg.ransac.min_sample)) {
    try {
      result.pose = pnp_ransac(pnp, scene.intrinsics, cfg.ransac);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NoConsensus) throw;
    }
  }
  return result;
}

SceneScore score_registration(const SyntheticScene& scene, const RegistrationResult& result,
                              const MetricThresholds& thr) {
  SceneScore s;
  if (!result.correspondences.empty()) {
    s.inlier_ratio = inlier_ratio(result.correspondences, scene.cloud, scene.depth, scene.intrinsics,
                                  scene.gt_transform, thr.tau1_m);
  }
  if (result.pose) s.rmse_m = registration_rmse(scene.cloud, result.pose->transform, scene.gt_transform);
  return s;
}

}  // namespace i2preg::cli
