// Serial reference versus OpenMP variants of the hot kernels.

#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "owqf/feature_world.hpp"
#include "owqf/kernels.hpp"

namespace {

std::vector<double> random_values(std::size_t n, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return v;
}

template <auto Kernel>
void bm_matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_values(n * n, 1), b = random_values(n * n, 2);
  std::vector<double> c(n * n);
  for (auto _ : state) {
    Kernel(a, b, c, n, n, n, false);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n * n * n));
}

template <auto Kernel>
void bm_bilinear(benchmark::State& state) {
  const std::size_t g = 32, channels = 64;
  const auto points = static_cast<std::size_t>(state.range(0));
  const auto grid = random_values(g * g * channels, 3);
  auto xy = random_values(2 * points, 4);
  for (double& v : xy) v = 0.5 * (v + 1.0);
  std::vector<double> out(points * channels);
  const owqf::kernels::GridView view{grid, g, g, channels};
  for (auto _ : state) {
    Kernel(view, xy, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * points));
}

template <auto Kernel>
void bm_render(benchmark::State& state) {
  const auto table = owqf::CategoryTable::make({2, 4, 6}, 16, 5);
  const owqf::FeatureWorld world({64, 2, 32, 0.1, 3}, table);
  const auto scene = owqf::generate_scene(9, 6, {}, table);
  std::vector<owqf::render_kernels::Object> objects;
  for (std::size_t i = 0; i < scene.gt_boxes.size(); ++i) {
    const auto& b = scene.gt_boxes[i];
    objects.push_back({b.cx, b.cy, 0.3 * b.w, 0.3 * b.h, b.w, b.h, scene.gt_labels[i]});
  }
  const auto g = static_cast<std::size_t>(state.range(0));
  std::vector<double> grid(g * g * 64);
  for (auto _ : state) {
    std::fill(grid.begin(), grid.end(), 0.0);
    Kernel(world, objects, g, g, grid);
    benchmark::DoNotOptimize(grid.data());
  }
}

namespace k = owqf::kernels;
namespace r = owqf::render_kernels;

BENCHMARK(bm_matmul<k::serial::matmul_nn>)->Name("matmul_nn/serial")->Arg(32)->Arg(128)->Arg(256);
BENCHMARK(bm_matmul<k::omp::matmul_nn>)->Name("matmul_nn/omp")->Arg(32)->Arg(128)->Arg(256);
BENCHMARK(bm_matmul<k::serial::matmul_nt>)->Name("matmul_nt/serial")->Arg(128);
BENCHMARK(bm_matmul<k::omp::matmul_nt>)->Name("matmul_nt/omp")->Arg(128);
BENCHMARK(bm_bilinear<k::serial::bilinear_sample>)->Name("bilinear/serial")->Arg(64)->Arg(4096);
BENCHMARK(bm_bilinear<k::omp::bilinear_sample>)->Name("bilinear/omp")->Arg(64)->Arg(4096);
BENCHMARK(bm_render<r::add_signal_serial>)->Name("render/serial")->Arg(16)->Arg(64);
BENCHMARK(bm_render<r::add_signal_omp>)->Name("render/omp")->Arg(16)->Arg(64);

}  // namespace

BENCHMARK_MAIN();
