#include <benchmark/benchmark.h>

#include <random>

#include "vtpmd/decomp.hpp"
#include "vtpmd/lstsq.hpp"
#include "vtpmd/matrix.hpp"

namespace {

vtpmd::Matrix random_matrix(std::size_t rows, std::size_t cols,
                            std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  vtpmd::Matrix m(rows, cols);
  for (double& v : m.data()) v = dist(rng);
  return m;
}

void BM_Matmul(benchmark::State& state) {
  const std::size_t n = state.range(0);
  const vtpmd::Matrix a = random_matrix(n, n, 1);
  const vtpmd::Matrix b = random_matrix(n, n, 2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(vtpmd::matmul(a, b));
  }
  state.SetComplexityN(n);
}
BENCHMARK(BM_Matmul)->RangeMultiplier(2)->Range(16, 128)->Complexity();

void BM_SVD(benchmark::State& state) {
  const std::size_t n = state.range(0);
  const vtpmd::Matrix a = random_matrix(n, (n * 3) / 2, 3);
  for (auto _ : state) {
    benchmark::DoNotOptimize(vtpmd::svd(a));
  }
  state.SetComplexityN(n);
}
BENCHMARK(BM_SVD)->RangeMultiplier(2)->Range(8, 64)->Complexity();

void BM_QRPivoted(benchmark::State& state) {
  const std::size_t n = state.range(0);
  const vtpmd::Matrix a = random_matrix(n, (n * 3) / 2, 4);
  for (auto _ : state) {
    benchmark::DoNotOptimize(vtpmd::qr_pivoted(a));
  }
  state.SetComplexityN(n);
}
BENCHMARK(BM_QRPivoted)->RangeMultiplier(2)->Range(8, 64)->Complexity();

void BM_LU(benchmark::State& state) {
  const std::size_t n = state.range(0);
  const vtpmd::Matrix a = random_matrix(n, n, 5);
  for (auto _ : state) {
    benchmark::DoNotOptimize(vtpmd::lu(a));
  }
  state.SetComplexityN(n);
}
BENCHMARK(BM_LU)->RangeMultiplier(2)->Range(8, 128)->Complexity();

// The three least-squares routes of the accuracy/speed comparison.
void BM_LstsqSolve(benchmark::State& state) {
  const auto method = static_cast<vtpmd::LstsqMethod>(state.range(0));
  const vtpmd::Matrix a = random_matrix(60, 12, 6);
  const vtpmd::Vector b = [] {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    vtpmd::Vector v(60);
    for (std::size_t i = 0; i < 60; ++i) v[i] = dist(rng);
    return v;
  }();
  for (auto _ : state) {
    benchmark::DoNotOptimize(vtpmd::lstsq_solve(a, b, method));
  }
}
BENCHMARK(BM_LstsqSolve)->Arg(0)->Arg(1)->Arg(2);

}  // namespace

BENCHMARK_MAIN();
