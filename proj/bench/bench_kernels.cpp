// Serial reference kernels against their OpenMP counterparts.
// Range arguments: rows, then thread count (0 = serial reference).

#include "mew/geometry.hpp"
#include "mew/kernels.hpp"
#include "mew/precompute.hpp"

#include <benchmark/benchmark.h>

#include <random>

namespace {

mew::Matrix random_matrix(std::size_t rows, std::size_t cols, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  mew::Matrix m(rows, cols);
  for (double& v : m.values()) v = nd(rng);
  return m;
}

mew::SparseMatrix voronoi_operator(std::size_t n, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1000.0);
  std::vector<mew::Point> pts(n);
  for (auto& p : pts) p = {u(rng), u(rng)};
  return mew::normalize_adjacency(mew::delaunay_adjacency(pts), n);
}

void configure(benchmark::State& state) {
  if (state.range(1) > 0) mew::kernels::set_thread_count(static_cast<int>(state.range(1)));
}

void BM_Matmul(benchmark::State& state) {
  configure(state);
  const auto n = static_cast<std::size_t>(state.range(0));
  const mew::Matrix a = random_matrix(n, 64, 1), b = random_matrix(64, 32, 2);
  mew::Matrix c(n, 32);
  for (auto _ : state) {
    if (state.range(1) == 0)
      mew::kernels::serial::matmul(a, b, c.view());
    else
      mew::kernels::matmul(a, b, c.view());
    benchmark::DoNotOptimize(c.row(0));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(n * 64 * 32));
}

void BM_MatmulTnAcc(benchmark::State& state) {
  configure(state);
  const auto n = static_cast<std::size_t>(state.range(0));
  const mew::Matrix a = random_matrix(n, 64, 3), b = random_matrix(n, 32, 4);
  mew::Matrix c(64, 32);
  for (auto _ : state) {
    if (state.range(1) == 0)
      mew::kernels::serial::matmul_tn_acc(a, b, c.view());
    else
      mew::kernels::matmul_tn_acc(a, b, c.view());
    benchmark::DoNotOptimize(c.row(0));
  }
}

void BM_Spmm(benchmark::State& state) {
  configure(state);
  const auto n = static_cast<std::size_t>(state.range(0));
  const mew::SparseMatrix s = voronoi_operator(n, 5);
  const mew::Matrix x = random_matrix(n, 40, 6);
  mew::Matrix y(n, 40);
  for (auto _ : state) {
    if (state.range(1) == 0)
      mew::kernels::serial::spmm(s, x, y.view());
    else
      mew::kernels::spmm(s, x, y.view());
    benchmark::DoNotOptimize(y.row(0));
  }
}

void sizes(benchmark::internal::Benchmark* b) {
  for (int n : {1000, 10000, 50000})
    for (int threads : {0, 1, 2, 4}) b->Args({n, threads});
  b->ArgNames({"rows", "threads"})->Unit(benchmark::kMicrosecond)->UseRealTime();
}

}  // namespace

BENCHMARK(BM_Matmul)->Apply(sizes);
BENCHMARK(BM_MatmulTnAcc)->Apply(sizes);
BENCHMARK(BM_Spmm)->Apply(sizes);

BENCHMARK_MAIN();
