#include "bench_util.hpp"

#include "texbank/descriptors.hpp"
#include "texbank/filterbank.hpp"

#include <benchmark/benchmark.h>

namespace {

using namespace texbank;

void BM_MrBankMr8(benchmark::State& state) {
  const auto img = bench::stripes(static_cast<int>(state.range(0)), 1);
  const auto bank = make_mr_bank();
  for (auto _ : state) benchmark::DoNotOptimize(mr8_collapse(apply_bank(img, bank)));
  state.SetItemsProcessed(state.iterations() * img.size());
}
BENCHMARK(BM_MrBankMr8)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_LmBank(benchmark::State& state) {
  const auto img = bench::stripes(static_cast<int>(state.range(0)), 2);
  const auto bank = make_lm();
  for (auto _ : state) benchmark::DoNotOptimize(apply_bank(img, bank));
  state.SetItemsProcessed(state.iterations() * img.size());
}
BENCHMARK(BM_LmBank)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_Lbp(benchmark::State& state) {
  const auto img = bench::stripes(static_cast<int>(state.range(0)), 3);
  for (auto _ : state) benchmark::DoNotOptimize(extract_lbp(img));
  state.SetItemsProcessed(state.iterations() * img.size());
}
BENCHMARK(BM_Lbp)->Arg(128)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_DenseSift(benchmark::State& state) {
  const auto img = bench::stripes(static_cast<int>(state.range(0)), 4);
  for (auto _ : state) benchmark::DoNotOptimize(extract_dsift(img));
  state.SetItemsProcessed(state.iterations() * img.size());
}
BENCHMARK(BM_DenseSift)->Arg(128)->Arg(256)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
