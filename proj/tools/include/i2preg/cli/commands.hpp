#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "i2preg/cli/config.hpp"

namespace i2preg::cli {

// Exit codes shared by every command.
inline constexpr int kExitOk = 0;
inline constexpr int kExitBadInput = 1;
inline constexpr int kExitNoConsensus = 2;

struct ConfigArgs {
  std::filesystem::path file;
  std::vector<std::string> overrides;
};

struct SynthArgs {
  ConfigArgs config;
  std::filesystem::path out_dir;
};

struct RegisterArgs {
  ConfigArgs config;
  std::filesystem::path scene_dir;
  std::filesystem::path out_dir;
  bool write_losses = false;
};

struct EvalArgs {
  ConfigArgs config;
  std::vector<std::filesystem::path> scene_dirs;
  std::vector<std::filesystem::path> result_dirs;
  std::filesystem::path out;
};

struct AblateArgs {
  ConfigArgs config;
  std::string sweep;  // gaussian_sigma | mask_ratio | k | warmup
  std::vector<std::string> values;  // empty: the sweep's default grid
  std::filesystem::path out;
  int jobs = 1;
};

struct NormalsArgs {
  std::filesystem::path cloud;
  std::filesystem::path depth;
  std::size_t k = 8;
  bool adaptive = false;
  std::filesystem::path out;
};

struct LossesArgs {
  std::uint64_t seed = 1;
  int trials = 20;
  int max_size = 32;
  std::filesystem::path out;
};

int cmd_synth(const SynthArgs& args);
int cmd_register(const RegisterArgs& args);
int cmd_eval(const EvalArgs& args);
int cmd_ablate(const AblateArgs& args);
int cmd_normals(const NormalsArgs& args);
int cmd_losses(const LossesArgs& args);

/// Default setting grid for a sweep name; throws InvalidArgument for unknown names.
std::vector<std::string> default_sweep_values(const std::string& sweep);

/// Copy of `cfg` with one sweep setting applied.
PipelineConfig apply_sweep(const PipelineConfig& cfg, const std::string& sweep, const std::string& value);

}  // namespace i2preg::cli
