#include <benchmark/benchmark.h>

#include "i2preg/cli/pipeline.hpp"
#include "i2preg/synth.hpp"

using namespace i2preg;

static void BM_GenerateScene(benchmark::State& state) {
  const auto spec = SceneSpec::room();
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(generate_scene(spec, seed++));
}
BENCHMARK(BM_GenerateScene)->Unit(benchmark::kMillisecond);

static void BM_SynthesizeFeatures(benchmark::State& state) {
  const auto scene = generate_scene(SceneSpec::room(), 1);
  for (auto _ : state) benchmark::DoNotOptimize(synthesize_features(scene, 128, {}));
}
BENCHMARK(BM_SynthesizeFeatures)->Unit(benchmark::kMillisecond);

static void BM_RegisterScene(benchmark::State& state) {
  const cli::PipelineConfig cfg;
  const auto scene = generate_scene(cfg.scene, 1);
  for (auto _ : state) benchmark::DoNotOptimize(cli::register_scene(scene, cfg));
}
BENCHMARK(BM_RegisterScene)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
