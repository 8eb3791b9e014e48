#include <iostream>

#include <CLI11.hpp>

#include "i2preg/cli/commands.hpp"
#include "i2preg/error.hpp"

using namespace i2preg::cli;

namespace {

void add_config_options(CLI::App* cmd, ConfigArgs& cfg) {
  cmd->add_option("-c,--config", cfg.file, "JSON config file");
  cmd->add_option("--set", cfg.overrides, "Override a config key, e.g. --set corruption.mask_ratio=0.2");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"i2preg: synthetic image-to-point-cloud registration toolkit"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* c_synth = app.add_subcommand("synth", "Generate a synthetic scene bundle");
  add_config_options(c_synth, synth.config);
  c_synth->add_option("-o,--out", synth.out_dir, "Output directory")->required();

  RegisterArgs reg;
  auto* c_reg = app.add_subcommand("register", "Register a scene bundle; exit 2 on NoConsensus");
  add_config_options(c_reg, reg.config);
  c_reg->add_option("-s,--scene", reg.scene_dir, "Scene bundle directory")->required();
  c_reg->add_option("-o,--out", reg.out_dir, "Output directory")->required();
  c_reg->add_flag("--losses", reg.write_losses, "Also write losses.json");

  EvalArgs ev;
  auto* c_eval = app.add_subcommand("eval", "Evaluate registration results against scene bundles");
  add_config_options(c_eval, ev.config);
  c_eval->add_option("--scenes", ev.scene_dirs, "Scene bundle directories")->required();
  c_eval->add_option("--results", ev.result_dirs, "Result directories, aligned with --scenes")->required();
  c_eval->add_option("-o,--out", ev.out, "Metrics JSON (stdout if omitted)");

  AblateArgs ab;
  auto* c_ab = app.add_subcommand("ablate", "Sweep one setting over a seeded scene batch");
  add_config_options(c_ab, ab.config);
  c_ab->add_option("--sweep", ab.sweep, "gaussian_sigma | mask_ratio | k | warmup")->required();
  c_ab->add_option("--values", ab.values, "Sweep values (comma separated)")->delimiter(',');
  c_ab->add_option("-o,--out", ab.out, "CSV output (stdout if omitted)");
  c_ab->add_option("-j,--jobs", ab.jobs, "Scenes evaluated in parallel");

  NormalsArgs nm;
  auto* c_nm = app.add_subcommand("normals", "Estimate normals of a point cloud or a depth map");
  c_nm->add_option("--cloud", nm.cloud, "Point cloud (.ply or x y z text)");
  c_nm->add_option("--depth", nm.depth, "Depth map (DEPTH binary)");
  c_nm->add_option("-k,--k", nm.k, "Neighborhood size");
  c_nm->add_flag("--adaptive", nm.adaptive, "Density-adaptive neighborhood size");
  c_nm->add_option("-o,--out", nm.out, "Output normal field")->required();

  LossesArgs ls;
  auto* c_ls = app.add_subcommand("losses", "Gradient and consistency checks of the loss functions");
  c_ls->add_option("--seed", ls.seed, "Random seed");
  c_ls->add_option("--trials", ls.trials, "Random instances per loss");
  c_ls->add_option("--size", ls.max_size, "Largest instance dimension");
  c_ls->add_option("-o,--out", ls.out, "Report JSON (stdout if omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitBadInput;
  }

  try {
    if (c_synth->parsed()) return cmd_synth(synth);
    if (c_reg->parsed()) return cmd_register(reg);
    if (c_eval->parsed()) return cmd_eval(ev);
    if (c_ab->parsed()) return cmd_ablate(ab);
    if (c_nm->parsed()) return cmd_normals(nm);
    if (c_ls->parsed()) return cmd_losses(ls);
  } catch (const i2preg::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.code() == i2preg::ErrorCode::NoConsensus ? kExitNoConsensus : kExitBadInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitBadInput;
  }
  return kExitBadInput;
}
