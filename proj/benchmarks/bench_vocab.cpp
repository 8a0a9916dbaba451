#include "bench_util.hpp"

#include "texbank/vocab.hpp"

#include <benchmark/benchmark.h>

namespace {

using namespace texbank;

void BM_Kmeans(benchmark::State& state) {
  std::mt19937_64 rng(21);
  const Matrix x = bench::random_matrix(rng, 5000, 32);
  KmeansOptions opt;
  opt.clusters = state.range(0);
  opt.max_iterations = 10;
  for (auto _ : state) benchmark::DoNotOptimize(kmeans(x, opt));
}
BENCHMARK(BM_Kmeans)->Arg(16)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_GmmEm(benchmark::State& state) {
  std::mt19937_64 rng(22);
  const Matrix x = bench::random_matrix(rng, 5000, 32);
  GmmOptions opt;
  opt.components = state.range(0);
  opt.max_iterations = 10;
  opt.tolerance = 0.0;
  for (auto _ : state) benchmark::DoNotOptimize(fit_gmm(x, opt));
}
BENCHMARK(BM_GmmEm)->Arg(16)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_PcaWhitener(benchmark::State& state) {
  std::mt19937_64 rng(23);
  const Matrix x = bench::random_matrix(rng, 10000, state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(fit_pca_whitener(x, state.range(0) / 2));
}
BENCHMARK(BM_PcaWhitener)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
