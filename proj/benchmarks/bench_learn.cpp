#include "bench_util.hpp"

#include "texbank/learn.hpp"
#include "texbank/metrics.hpp"

#include <benchmark/benchmark.h>

namespace {

using namespace texbank;

struct Problem {
  Matrix x;
  std::vector<int> labels;
};

Problem make_problem(Index n, Index d, int classes) {
  std::mt19937_64 rng(31);
  Problem p;
  p.x = bench::random_matrix(rng, n, d);
  for (Index i = 0; i < n; ++i) {
    const int c = static_cast<int>(i % classes);
    p.labels.push_back(c);
    p.x(i, c % d) += 3.0;
  }
  return p;
}

void BM_LinearSvmOva(benchmark::State& state) {
  const auto p = make_problem(state.range(0), 256, 5);
  for (auto _ : state) benchmark::DoNotOptimize(train_linear_svm_ova(p.x, p.labels));
}
BENCHMARK(BM_LinearSvmOva)->Arg(250)->Arg(500)->Unit(benchmark::kMillisecond);

void BM_ExpChi2Kernel(benchmark::State& state) {
  std::mt19937_64 rng(32);
  Matrix x = bench::random_matrix(rng, state.range(0), 128).cwiseAbs();
  for (Index i = 0; i < x.rows(); ++i) x.row(i) /= x.row(i).sum();
  KernelSpec spec{KernelKind::ExpChi2, 1.0, true};
  for (auto _ : state) benchmark::DoNotOptimize(compute_kernel(x, x, spec));
}
BENCHMARK(BM_ExpChi2Kernel)->Arg(200)->Arg(500)->Unit(benchmark::kMillisecond);

void BM_AveragePrecision(benchmark::State& state) {
  std::mt19937_64 rng(33);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> scores(static_cast<std::size_t>(state.range(0)));
  std::vector<std::uint8_t> positives(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    positives[i] = i % 7 == 0;
    scores[i] = n(rng) + positives[i];
  }
  for (auto _ : state) benchmark::DoNotOptimize(average_precision(scores, positives, ApVariant::Pascal08));
}
BENCHMARK(BM_AveragePrecision)->Arg(10000)->Arg(100000);

}  // namespace

BENCHMARK_MAIN();
