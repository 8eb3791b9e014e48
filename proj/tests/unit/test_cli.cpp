#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "i2preg/cli/commands.hpp"
#include "i2preg/cli/config.hpp"
#include "i2preg/error.hpp"
#include "i2preg/metrics.hpp"
#include "i2preg/synth.hpp"

using namespace i2preg;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const fs::path kWork = fs::temp_directory_path() / "i2preg_cli_test";

int run(const std::string& args) {
  const std::string cmd = std::string(I2PREG_BINARY) + " " + args + " >" + (kWork / "last.log").string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

json read_json(const fs::path& p) { return json::parse(slurp(p)); }

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    fs::remove_all(kWork);
    fs::create_directories(kWork);
    ASSERT_EQ(run("synth -o " + (kWork / "scene").string()), 0);
  }
};

}  // namespace

TEST(Config, DefaultsRoundTrip) {
  const auto cfg = cli::PipelineConfig{};
  const auto back = cli::config_from_json(cli::to_json(cfg));
  EXPECT_EQ(cli::to_json(back), cli::to_json(cfg));
  EXPECT_EQ(back.scene.primitives.size(), cfg.scene.primitives.size());
}

TEST(Config, RejectsUnknownKeysAndBadTypes) {
  EXPECT_THROW(cli::config_from_json(json{{"no_such_key", 1}}), Error);
  EXPECT_THROW(cli::config_from_json(json{{"ransac", {{"iters", 5}}}}), Error);
  EXPECT_THROW(cli::config_from_json(json{{"seed", "one"}}), Error);
  EXPECT_THROW(cli::config_from_json(json{{"corruption", {{"mask_ratio", 2.0}}}}), Error);
  EXPECT_THROW(cli::config_from_json(json::array()), Error);
}

TEST(Config, OverridesMerge) {
  json doc = cli::to_json(cli::PipelineConfig{});
  cli::apply_override(doc, "corruption.mask_ratio=0.2");
  cli::apply_override(doc, "ransac.max_iterations=50");
  const auto cfg = cli::config_from_json(doc);
  EXPECT_EQ(cfg.corruption.mask_ratio, 0.2);
  EXPECT_EQ(cfg.ransac.max_iterations, 50);
  EXPECT_THROW(cli::apply_override(doc, "missing_equals"), Error);
}

TEST(Config, SweepGrids) {
  EXPECT_EQ(cli::default_sweep_values("k").size(), 4u);
  EXPECT_EQ(cli::default_sweep_values("mask_ratio").size(), 5u);
  EXPECT_THROW(cli::default_sweep_values("bogus"), Error);
  const auto cfg = cli::apply_sweep(cli::PipelineConfig{}, "warmup", "5:15");
  EXPECT_EQ(cfg.warmup.start_epoch, 5);
  EXPECT_EQ(cfg.warmup.end_epoch, 15);
  EXPECT_EQ(cli::apply_sweep(cli::PipelineConfig{}, "gaussian_sigma", "0.01").corruption.gaussian_sigma_m, 0.01);
  EXPECT_THROW(cli::apply_sweep(cli::PipelineConfig{}, "k", "abc"), Error);
}

TEST_F(Cli, SynthIsByteIdentical) {
  ASSERT_EQ(run("synth -o " + (kWork / "scene_again").string()), 0);
  for (const char* name : {"cloud.ply", "depth.bin", "intrinsics.json", "gt_pose.json", "gt_corrs.csv"}) {
    EXPECT_EQ(slurp(kWork / "scene" / name), slurp(kWork / "scene_again" / name)) << name;
  }
  const auto scene = load_scene_bundle(kWork / "scene");
  for (const auto& c : scene.gt_correspondences) {
    double z = 0.0;
    ASSERT_TRUE(scene.depth.lookup(c.pixel, z));
    ASSERT_EQ(label_fine_pairs(c, z, scene.intrinsics, scene.cloud, scene.gt_transform), FineLabel::Positive);
  }
  std::ofstream(kWork / "blocker") << "x";
  EXPECT_EQ(run("synth -o " + (kWork / "blocker" / "sub").string()), 1);
}

TEST_F(Cli, RegisterNoiselessAndDeterministic) {
  const auto out = kWork / "reg";
  ASSERT_EQ(run("register -s " + (kWork / "scene").string() + " -o " + out.string() + " --losses"), 0);
  const json pose = read_json(out / "pose.json");
  Mat3 r;
  Vec3 t;
  for (int i = 0; i < 9; ++i) r(i / 3, i % 3) = pose["rotation"][static_cast<std::size_t>(i)].get<double>();
  for (int i = 0; i < 3; ++i) t[i] = pose["translation"][static_cast<std::size_t>(i)].get<double>();
  const auto scene = load_scene_bundle(kWork / "scene");
  EXPECT_LT(relative_rotation_error(scene.gt_transform.rotation, project_to_rotation(r)), 0.1);
  EXPECT_LT(relative_translation_error(scene.gt_transform.translation, t), 1e-3);
  EXPECT_GT(pose["inliers"].get<int>(), 50);
  EXPECT_TRUE(fs::exists(out / "losses.json"));

  const auto again = kWork / "reg_again";
  ASSERT_EQ(run("register -s " + (kWork / "scene").string() + " -o " + again.string() + " --losses"), 0);
  for (const char* name : {"pose.json", "correspondences.csv", "patch_pairs.csv", "losses.json"}) {
    EXPECT_EQ(slurp(out / name), slurp(again / name)) << name;
  }
}

TEST_F(Cli, RegisterFailures) {
  const auto out = kWork / "reg_bad";
  EXPECT_EQ(run("register -s " + (kWork / "scene").string() + " -o " + out.string() +
                " --set corruption.outlier_fraction=1"),
            2);
  EXPECT_FALSE(fs::exists(out / "pose.json"));
  EXPECT_EQ(run("register -s " + (kWork / "missing").string() + " -o " + out.string()), 1);
  EXPECT_EQ(run("register -s " + (kWork / "scene").string() + " -o " + out.string() + " --set bogus.key=1"), 1);
}

TEST_F(Cli, EvalPerfectWorstAndMixed) {
  const auto good = kWork / "eval_good";
  const auto bad = kWork / "eval_bad";
  ASSERT_EQ(run("register -s " + (kWork / "scene").string() + " -o " + good.string()), 0);
  ASSERT_EQ(run("register -s " + (kWork / "scene").string() + " -o " + bad.string() +
                " --set corruption.outlier_fraction=1"),
            2);
  const auto scene = (kWork / "scene").string();

  ASSERT_EQ(run("eval --scenes " + scene + " --results " + good.string() + " -o " + (kWork / "m1.json").string()), 0);
  const json perfect = read_json(kWork / "m1.json")["aggregate"];
  EXPECT_EQ(perfect["IR"]["mean"].get<double>(), 1.0);
  EXPECT_EQ(perfect["FMR"].get<double>(), 1.0);
  EXPECT_EQ(perfect["RR"].get<double>(), 1.0);

  ASSERT_EQ(run("eval --scenes " + scene + " --results " + bad.string() + " -o " + (kWork / "m2.json").string()), 0);
  const json worst = read_json(kWork / "m2.json");
  EXPECT_EQ(worst["aggregate"]["FMR"].get<double>(), 0.0);
  EXPECT_EQ(worst["aggregate"]["RR"].get<double>(), 0.0);

  ASSERT_EQ(run("eval --scenes " + scene + " " + scene + " --results " + good.string() + " " + bad.string() + " -o " +
                (kWork / "m3.json").string()),
            0);
  const json mixed = read_json(kWork / "m3.json");
  const double ir_bad = worst["scenes"][0]["inlier_ratio"].get<double>();
  EXPECT_NEAR(mixed["aggregate"]["IR"]["mean"].get<double>(), 0.5 * (1.0 + ir_bad), 1e-15);
  EXPECT_EQ(mixed["aggregate"]["RR"].get<double>(), 0.5);
  EXPECT_EQ(mixed["aggregate"]["FMR"].get<double>(), 0.5);
  EXPECT_EQ(mixed["scenes"].size(), 2u);

  EXPECT_EQ(run("eval --scenes " + scene + " " + scene + " --results " + good.string()), 1);
}

TEST_F(Cli, AblateShapeAndUsage) {
  const auto csv = kWork / "k.csv";
  ASSERT_EQ(run("ablate --sweep k --set batch_size=2 --set scene.point_count=12000 -o " + csv.string()), 0);
  std::istringstream lines(slurp(csv));
  std::string line;
  std::vector<std::string> rows;
  while (std::getline(lines, line)) rows.push_back(line);
  ASSERT_EQ(rows.size(), 5u);
  EXPECT_EQ(rows[0], "setting,IR,FMR,RR");
  EXPECT_EQ(rows[1].rfind("2,", 0), 0u);
  EXPECT_EQ(run("ablate --sweep k --values \"\""), 1);
  EXPECT_EQ(run("ablate --sweep nonsense"), 1);
  EXPECT_EQ(run("ablate"), 1);
}

TEST_F(Cli, NormalsAndLosses) {
  const auto out = kWork / "n.bin";
  EXPECT_EQ(run("normals --cloud " + (kWork / "scene" / "cloud.ply").string() + " -o " + out.string()), 0);
  EXPECT_TRUE(fs::exists(out));
  EXPECT_EQ(run("normals --depth " + (kWork / "scene" / "depth.bin").string() + " -o " + out.string()), 0);
  EXPECT_EQ(run("normals -o " + out.string()), 1);
  EXPECT_EQ(run("normals --cloud a.ply --depth b.bin -o " + out.string()), 1);

  const auto report = kWork / "losses.json";
  ASSERT_EQ(run("losses --trials 5 -o " + report.string()), 0);
  EXPECT_FALSE(slurp(report).empty());
}
