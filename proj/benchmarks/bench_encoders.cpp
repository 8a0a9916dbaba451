#include "bench_util.hpp"

#include "texbank/encoders.hpp"
#include "texbank/vocab.hpp"

#include <benchmark/benchmark.h>

namespace {

using namespace texbank;

constexpr Index kDescriptors = 2000;
constexpr Index kDim = 64;

Codebook make_codebook(Index k) {
  std::mt19937_64 rng(11);
  return Codebook{bench::random_matrix(rng, k, kDim)};
}

GmmModel make_gmm(Index k) {
  std::mt19937_64 rng(12);
  GmmModel g;
  g.means = bench::random_matrix(rng, k, kDim);
  g.variances = Matrix::Ones(k, kDim);
  g.priors = Vector::Constant(k, 1.0 / static_cast<double>(k));
  return g;
}

template <class Make>
void run(benchmark::State& state, Make make) {
  std::mt19937_64 rng(13);
  const auto sample = bench::random_sample(rng, kDescriptors, kDim);
  const Encoder enc = make(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(encode(sample, enc));
  state.SetItemsProcessed(state.iterations() * kDescriptors);
}

void BM_Bovw(benchmark::State& s) { run(s, [](Index k) { return Encoder{BovwEncoder{make_codebook(k)}}; }); }
void BM_Kcb(benchmark::State& s) { run(s, [](Index k) { return Encoder{KcbEncoder{make_codebook(k), 1.0}}; }); }
void BM_Llc(benchmark::State& s) { run(s, [](Index k) { return Encoder{LlcEncoder{make_codebook(k), 5}}; }); }
void BM_Vlad(benchmark::State& s) { run(s, [](Index k) { return Encoder{VladEncoder{make_codebook(k)}}; }); }
void BM_Fv(benchmark::State& s) { run(s, [](Index k) { return Encoder{FvEncoder{make_gmm(k)}}; }); }

BENCHMARK(BM_Bovw)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Kcb)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Llc)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Vlad)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Fv)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_Spp2x2Fv(benchmark::State& state) {
  std::mt19937_64 rng(14);
  const auto sample = bench::random_sample(rng, kDescriptors, kDim);
  const Encoder enc{FvEncoder{make_gmm(64)}};
  for (auto _ : state) benchmark::DoNotOptimize(spp_encode(sample, 2, 2, enc));
}
BENCHMARK(BM_Spp2x2Fv)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
