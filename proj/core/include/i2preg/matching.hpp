#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "i2preg/features.hpp"
#include "i2preg/geometry.hpp"

namespace i2preg {

/// Cosine similarities, M_img x M_cloud.
struct ScoreMap {
  Eigen::MatrixXd scores;
};

struct Correspondence {
  Vec2 pixel = Vec2::Zero();
  int point_index = -1;
  double score = 0.0;
};

struct PatchMatch {
  int img_patch = -1;
  int cloud_patch = -1;
  double score = 0.0;
};

struct PatchPair {
  int img_patch_id = -1;
  int cloud_patch_id = -1;
  double overlap_2d = 0.0;
  double overlap_3d = 0.0;

  [[nodiscard]] double ratio() const { return overlap_2d < overlap_3d ? overlap_2d : overlap_3d; }
};

/// Rows are normalized internally; zero-norm rows score 0 against everything.
ScoreMap cosine_score_map(const FeatureField& img, const FeatureField& cloud);

/// Mutual top-k: (i, j) survives iff j is in row i's top_k and i is in
/// column j's top_k. Sorted by descending score, ties by (i, j).
/// Ranking ties inside a row or column go to the lower index.
std::vector<PatchMatch> coarse_match(const ScoreMap& scores, std::size_t top_k);

/// Mutual-argmax matching between the rows of two feature sets. Row r of
/// `img` sits at pixel_coords[r], row c of `cloud` is point point_indices[c].
std::vector<Correspondence> fine_match(const FeatureField& img, const FeatureField& cloud,
                                       std::span<const Vec2> pixel_coords, std::span<const int> point_indices,
                                       double min_score = 0.0);

enum class FineLabel { Positive, Negative, Ignored };

struct FineThresholds {
  double positive_3d_m = 0.0375;
  double positive_2d_px = 8.0;
  double negative_3d_m = 0.10;
  double negative_2d_px = 12.0;
};

FineLabel label_fine_pairs(const Correspondence& corr, double depth_at_pixel, const CameraIntrinsics& k,
                           const PointCloud& cloud, const RigidTransform& t_gt, const FineThresholds& thr = {});

struct OverlapThresholds {
  double distance_3d_m = 0.0375;
  double distance_2d_px = 8.0;
};

/// Bilateral overlap of an image patch (pixel coordinates) and a cloud patch
/// (point indices). A pixel without valid depth cannot overlap.
PatchPair patch_overlap(std::span<const Vec2> img_patch_pixels, std::span<const int> cloud_patch_points,
                        const PointCloud& cloud, const DepthMap& depth, const CameraIntrinsics& k,
                        const RigidTransform& t_gt, const OverlapThresholds& thr = {});

}  // namespace i2preg
