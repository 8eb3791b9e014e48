#pragma once

#include <optional>
#include <string>
#include <vector>

#include "i2preg/cli/config.hpp"
#include "i2preg/matching.hpp"
#include "i2preg/pose.hpp"
#include "i2preg/synth.hpp"

namespace i2preg::cli {

struct LossRecord {
  std::string name;
  double value = 0.0;
  int epoch = 0;
  double weight = 0.0;
};

struct RegistrationResult {
  std::vector<PatchMatch> coarse;
  /// Fine matches before the graph consistency filter.
  std::vector<Correspondence> fine;
  /// Matches handed to RANSAC.
  std::vector<Correspondence> correspondences;
  std::optional<PoseEstimate> pose;  // empty on NoConsensus
  std::vector<LossRecord> losses;
};

/// Image patches over the scene's gt pixels and cloud voxel cells, the
/// same partition for registration and evaluation.
struct Patches {
  std::vector<std::vector<int>> image;  // indices into gt_correspondences
  std::vector<std::vector<int>> cloud;  // point indices
};

Patches make_patches(const SyntheticScene& scene, const PipelineConfig& cfg);

/// Per gt pixel, the extra feature noise driven by how far the corrupted
/// depth normals drift from the clean ones.
std::vector<double> normal_cue_noise(const SyntheticScene& scene, const DepthMap& corrupted, const NormalCue& cue);

/// corrupt depth -> normals -> features -> coarse/fine matching -> graph
/// refinement -> PnP-RANSAC. Losses are evaluated only when asked for.
RegistrationResult register_scene(const SyntheticScene& scene, const PipelineConfig& cfg, bool with_losses = false);

struct SceneScore {
  double inlier_ratio = 0.0;
  std::optional<double> rmse_m;
};

/// IR over the result's correspondences (0 when there are none) and RMSE
/// of the estimated pose, if any.
SceneScore score_registration(const SyntheticScene& scene, const RegistrationResult& result,
                              const MetricThresholds& thr);

}  // namespace i2preg::cli
