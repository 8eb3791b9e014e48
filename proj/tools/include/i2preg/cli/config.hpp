#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "i2preg/losses.hpp"
#include "i2preg/metrics.hpp"
#include "i2preg/pose.hpp"
#include "i2preg/synth.hpp"

namespace i2preg::cli {

struct NormalCue {
  // Extra image feature noise at full normal disagreement.
  double noise_weight = 2.0;
  // Normal angle (degrees) at which the extra noise saturates.
  double saturation_deg = 2.0;
};

struct PipelineConfig {
  std::uint64_t seed = 1;
  std::size_t k_neighbors = 8;
  bool adaptive_k = false;
  std::size_t top_k_coarse = 3;
  double min_fine_score = 0.5;
  Eigen::Index feature_channels = 128;
  int tile_rows = 6;
  int tile_cols = 8;
  double voxel_size = 0.25;
  std::uint64_t gat_seed = 7;
  int epoch = 30;
  int batch_size = 8;
  LossWeights loss_weights;
  WarmupSchedule warmup;
  RansacConfig ransac;
  MetricThresholds thresholds;
  NormalCue normal_cue;
  CorruptionConfig corruption;
  SceneSpec scene = SceneSpec::room();

  void validate() const;
};

nlohmann::json to_json(const PipelineConfig& cfg);

/// Builds a config from a JSON document laid over the defaults. Unknown
/// keys and wrongly typed values are rejected with InvalidArgument.
PipelineConfig config_from_json(const nlohmann::json& doc);

/// Applies "a.b.c=value" overrides; value is parsed as JSON when possible,
/// otherwise taken as a string.
void apply_override(nlohmann::json& doc, const std::string& assignment);

/// Reads an optional config file (empty path = defaults) and applies overrides.
PipelineConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides);

}  // namespace i2preg::cli
