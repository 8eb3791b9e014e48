#include "i2preg/matching.hpp"

#include <algorithm>
#include <numeric>

#include "i2preg/error.hpp"

namespace i2preg {

ScoreMap cosine_score_map(const FeatureField& img, const FeatureField& cloud) {
  if (img.channels() != cloud.channels()) throw Error(ErrorCode::ChannelMismatch, "feature channel counts differ");
  const FeatureMatrix a = normalize_rows(img.vectors);
  const FeatureMatrix b = normalize_rows(cloud.vectors);
  return ScoreMap{a * b.transpose()};
}

namespace {

// Indices of the top_k entries of v, ranked by (value desc, index asc).
std::vector<int> top_indices(const Eigen::VectorXd& v, std::size_t top_k) {
  std::vector<int> idx(static_cast<std::size_t>(v.size()));
  std::iota(idx.begin(), idx.end(), 0);
  const std::size_t k = std::min(top_k, idx.size());
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(),
                    [&](int a, int b) { return v[a] > v[b] || (v[a] == v[b] && a < b); });
  idx.resize(k);
  return idx;
}

}  // namespace

std::vector<PatchMatch> coarse_match(const ScoreMap& scores, std::size_t top_k) {
  if (top_k < 1) throw Error(ErrorCode::InvalidArgument, "top_k must be >= 1");
  const auto& s = scores.scores;
  std::vector<std::vector<int>> col_top(static_cast<std::size_t>(s.cols()));
  for (Eigen::Index j = 0; j < s.cols(); ++j) col_top[static_cast<std::size_t>(j)] = top_indices(s.col(j), top_k);

  std::vector<PatchMatch> out;
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    for (int j : top_indices(s.row(i).transpose(), top_k)) {
      const auto& ct = col_top[static_cast<std::size_t>(j)];
      if (std::find(ct.begin(), ct.end(), static_cast<int>(i)) != ct.end()) {
        out.push_back({static_cast<int>(i), j, s(i, j)});
      }
    }
  }
  std::sort(out.begin(), out.end(), [](const PatchMatch& a, const PatchMatch& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.img_patch != b.img_patch) return a.img_patch < b.img_patch;
    return a.cloud_patch < b.cloud_patch;
  });
  return out;
}

std::vector<Correspondence> fine_match(const FeatureField& img, const FeatureField& cloud,
                                       std::span<const Vec2> pixel_coords, std::span<const int> point_indices,
                                       double min_score) {
  if (pixel_coords.size() != static_cast<std::size_t>(img.rows()) ||
      point_indices.size() != static_cast<std::size_t>(cloud.rows())) {
    throw Error(ErrorCode::LengthMismatch, "coordinate arrays must align with feature rows");
  }
  std::vector<Correspondence> out;
  if (img.rows() == 0 || cloud.rows() == 0) return out;
  const Eigen::MatrixXd s = cosine_score_map(img, cloud).scores;

  // First maximum wins, so ties resolve to the lower index on both sides.
  std::vector<Eigen::Index> best_row(static_cast<std::size_t>(s.cols()));
  for (Eigen::Index j = 0; j < s.cols(); ++j) s.col(j).maxCoeff(&best_row[static_cast<std::size_t>(j)]);
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    Eigen::Index j = 0;
    const double score = s.row(i).maxCoeff(&j);
    if (best_row[static_cast<std::size_t>(j)] != i || score < min_score) continue;
    out.push_back({pixel_coords[static_cast<std::size_t>(i)], point_indices[static_cast<std::size_t>(j)], score});
  }
  return out;
}

FineLabel label_fine_pairs(const Correspondence& corr, double depth_at_pixel, const CameraIntrinsics& k,
                           const PointCloud& cloud, const RigidTransform& t_gt, const FineThresholds& thr) {
  if (corr.point_index < 0 || static_cast<std::size_t>(corr.point_index) >= cloud.size()) {
    throw Error(ErrorCode::InvalidArgument, "correspondence point index out of range");
  }
  const Vec3 observed = backproject_pixel(k, corr.pixel.x(), corr.pixel.y(), depth_at_pixel);
  const Vec3 moved = t_gt.apply(cloud.points[static_cast<std::size_t>(corr.point_index)]);
  const double d3 = (moved - observed).norm();
  const double d2 = (project_point(k, moved) - corr.pixel).norm();
  if (d3 < thr.positive_3d_m && d2 < thr.positive_2d_px) return FineLabel::Positive;
  if (d3 > thr.negative_3d_m || d2 > thr.negative_2d_px) return FineLabel::Negative;
  return FineLabel::Ignored;
}

PatchPair patch_overlap(std::span<const Vec2> img_patch_pixels, std::span<const int> cloud_patch_points,
                        const PointCloud& cloud, const DepthMap& depth, const CameraIntrinsics& k,
                        const RigidTransform& t_gt, const OverlapThresholds& thr) {
  if (img_patch_pixels.empty() || cloud_patch_points.empty()) throw Error(ErrorCode::EmptyPatch, "empty patch");

  struct Projected {
    Vec3 camera;
    Vec2 pixel;
    bool visible;
  };
  std::vector<Projected> pts;
  pts.reserve(cloud_patch_points.size());
  for (int idx : cloud_patch_points) {
    if (idx < 0 || static_cast<std::size_t>(idx) >= cloud.size()) {
      throw Error(ErrorCode::InvalidArgument, "patch point index out of range");
    }
    const Vec3 c = t_gt.apply(cloud.points[static_cast<std::size_t>(idx)]);
    if (c.z() > 0.0) {
      pts.push_back({c, project_point(k, c), true});
    } else {
      pts.push_back({c, Vec2::Zero(), false});
    }
  }

  std::vector<std::uint8_t> point_hit(pts.size(), 0);
  std::size_t pixel_hits = 0;
  for (const Vec2& px : img_patch_pixels) {
    double z = 0.0;
    if (!depth.lookup(px, z)) continue;
    const Vec3 observed = backproject_pixel(k, px.x(), px.y(), z);
    bool hit = false;
    for (std::size_t j = 0; j < pts.size(); ++j) {
      if (!pts[j].visible) continue;
      if ((pts[j].pixel - px).norm() < thr.distance_2d_px && (pts[j].camera - observed).norm() < thr.distance_3d_m) {
        hit = true;
        point_hit[j] = 1;
      }
    }
    if (hit) ++pixel_hits;
  }
  PatchPair out;
  out.overlap_2d = static_cast<double>(pixel_hits) / static_cast<double>(img_patch_pixels.size());
  out.overlap_3d = static_cast<double>(std::count(point_hit.begin(), point_hit.end(), 1)) /
                   static_cast<double>(pts.size());
  return out;
}

}  // namespace i2preg
