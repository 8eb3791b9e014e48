#include <benchmark/benchmark.h>

#include "i2preg/graph.hpp"
#include "i2preg/knn.hpp"
#include "i2preg/losses.hpp"
#include "i2preg/normals.hpp"
#include "i2preg/pose.hpp"
#include "i2preg/random.hpp"

using namespace i2preg;

namespace {

PointCloud random_cloud(std::size_t n) {
  Rng rng = make_rng(1);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  PointCloud c;
  c.points.reserve(n);
  for (std::size_t i = 0; i < n; ++i) c.points.emplace_back(u(rng), u(rng), u(rng));
  return c;
}

FeatureField unit_rows(Eigen::Index m, Eigen::Index c) {
  Rng rng = make_rng(2);
  FeatureField f;
  f.vectors.resize(m, c);
  for (Eigen::Index i = 0; i < m; ++i) f.vectors.row(i) = random_unit_vector(rng, c).transpose();
  return f;
}

}  // namespace

static void BM_KdTreeBuild(benchmark::State& state) {
  const auto cloud = random_cloud(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(KdTree3(cloud.points));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_KdTreeBuild)->Arg(1000)->Arg(40000);

static void BM_KdTreeKnn(benchmark::State& state) {
  const auto cloud = random_cloud(40000);
  const KdTree3 tree(cloud.points);
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(tree.knn_of(static_cast<int>(i), static_cast<std::size_t>(state.range(0))));
    i = (i + 7919) % cloud.size();
  }
}
BENCHMARK(BM_KdTreeKnn)->Arg(8)->Arg(16);

static void BM_PointNormals(benchmark::State& state) {
  const auto cloud = random_cloud(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(estimate_point_normals(cloud, 8));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_PointNormals)->Arg(2000)->Arg(40000)->Unit(benchmark::kMillisecond);

static void BM_DepthNormals(benchmark::State& state) {
  DepthMap d(640, 480);
  for (int v = 0; v < 480; ++v)
    for (int u = 0; u < 640; ++u) d.set(u, v, 2.0 + 0.001 * u + 0.002 * v);
  for (auto _ : state) benchmark::DoNotOptimize(depth_to_normals(d));
}
BENCHMARK(BM_DepthNormals)->Unit(benchmark::kMillisecond);

static void BM_GatForward(benchmark::State& state) {
  const auto m = state.range(0);
  const auto cloud = random_cloud(static_cast<std::size_t>(m));
  const auto graph = build_knn_graph(cloud.points, 8);
  const auto f = unit_rows(m, 128);
  const auto params = GraphAttentionParams::random(128, 7);
  for (auto _ : state) benchmark::DoNotOptimize(gated_fusion(f, light_gat_forward(graph, f, params), params));
}
BENCHMARK(BM_GatForward)->Arg(256)->Arg(1024)->Unit(benchmark::kMillisecond);

static void BM_GdcLoss(benchmark::State& state) {
  const auto a = unit_rows(state.range(0), 128);
  const auto b = unit_rows(state.range(0), 128);
  for (auto _ : state) benchmark::DoNotOptimize(gdc_loss(a, b));
}
BENCHMARK(BM_GdcLoss)->Arg(128)->Arg(512)->Unit(benchmark::kMillisecond);

static void BM_PnpRansac(benchmark::State& state) {
  const CameraIntrinsics k{500, 500, 319.5, 239.5, 640, 480};
  Rng rng = make_rng(3);
  std::uniform_real_distribution<double> u(0.0, 639.0);
  std::uniform_real_distribution<double> v(0.0, 479.0);
  std::uniform_real_distribution<double> z(2.0, 6.0);
  const auto pose = RigidTransform::from_axis_angle(Vec3(1, 2, 3).normalized(), 0.4, Vec3(0.1, -0.2, 0.3));
  const auto inv = pose.inverse();
  std::vector<PnpCorrespondence> corrs;
  const auto n = static_cast<int>(state.range(0));
  for (int i = 0; i < n; ++i) {
    const Vec2 px(u(rng), v(rng));
    PnpCorrespondence c{px, inv.apply(backproject_pixel(k, px.x(), px.y(), z(rng)))};
    if (i % 10 < 3) c.pixel = {u(rng), v(rng)};
    corrs.push_back(c);
  }
  for (auto _ : state) benchmark::DoNotOptimize(pnp_ransac(corrs, k, {}));
}
BENCHMARK(BM_PnpRansac)->Arg(100)->Arg(1000)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
