#include <benchmark/benchmark.h>

#include <vector>

#include "ibiumad/kernels.hpp"
#include "ibiumad/rng.hpp"

namespace k = ibiumad::kernels;

namespace {

std::vector<double> random_values(std::size_t n, std::uint64_t seed) {
  ibiumad::Rng rng(seed);
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

// Arg 0 selects the implementation: 0 = serial reference, 1 = OpenMP.
void BM_Matmul(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(1));
  const auto a = random_values(n * n, 1), b = random_values(n * n, 2);
  std::vector<double> c(n * n);
  for (auto _ : state) {
    if (state.range(0) == 0) k::reference::matmul(a, b, c, n, n, n);
    else k::matmul(a, b, c, n, n, n);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n * n * n));
}

void BM_Conv2d(benchmark::State& state) {
  const std::size_t hw = static_cast<std::size_t>(state.range(1));
  const k::ConvGeometry g{32, 32, hw, hw, 3, 3, 1};
  const auto x = random_values(32 * hw * hw, 3), w = random_values(32 * 32 * 9, 4), bias = random_values(32, 5);
  std::vector<double> out(32 * hw * hw);
  for (auto _ : state) {
    if (state.range(0) == 0) k::reference::conv2d_forward(x, w, bias, out, g);
    else k::conv2d_forward(x, w, bias, out, g);
    benchmark::DoNotOptimize(out.data());
  }
}

void BM_Es2d(benchmark::State& state) {
  const std::size_t hw = static_cast<std::size_t>(state.range(1)), C = 64;
  const auto x = random_values(C * hw * hw, 6);
  std::vector<double> a(C, 0.7), b(C, 0.3), c(C, 1.0), d(C, 0.5);
  const k::ScanParams p{a, b, c, d};
  std::vector<double> y(x.size());
  for (auto _ : state) {
    if (state.range(0) == 0) k::reference::es2d_forward(x, p, y, C, hw, hw);
    else k::es2d_forward(x, p, y, C, hw, hw);
    benchmark::DoNotOptimize(y.data());
  }
}

}  // namespace

BENCHMARK(BM_Matmul)->ArgsProduct({{0, 1}, {64, 256}})->ArgNames({"omp", "n"});
BENCHMARK(BM_Conv2d)->ArgsProduct({{0, 1}, {16, 64}})->ArgNames({"omp", "hw"});
BENCHMARK(BM_Es2d)->ArgsProduct({{0, 1}, {16, 64}})->ArgNames({"omp", "hw"});

BENCHMARK_MAIN();
