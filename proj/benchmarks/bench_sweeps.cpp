#include <benchmark/benchmark.h>

#include "gmcsim/analysis.hpp"
#include "gmcsim/bias.hpp"
#include "gmcsim/diffpair.hpp"
#include "gmcsim/dynamp.hpp"

using namespace gmcsim;

namespace {

const devmodel::DeviceParams kParams;
const devmodel::Environment kNominal{300.15, 5.0};

dynamp::AmpConfig amp_for(int64_t which) {
  return which == 0 ? dynamp::default_traditional() : dynamp::default_proposed();
}

void BM_CurrentSplit(benchmark::State& state) {
  const diffpair::DiffPairSpec spec{10.0, 5.4, 1.0, 100e-6};
  double x = -0.1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(diffpair::solve_current_split(spec, x, kParams, kNominal));
    x = x > 0.1 ? -0.1 : x + 1e-4;
  }
}
BENCHMARK(BM_CurrentSplit);

void BM_BiasLoop(benchmark::State& state) {
  const bias::BiasSpec spec;
  for (auto _ : state) benchmark::DoNotOptimize(bias::solve_bias_loop(spec, kParams, kNominal));
}
BENCHMARK(BM_BiasLoop);

void BM_TransferSweep(benchmark::State& state) {
  const auto amp = amp_for(state.range(0));
  for (auto _ : state)
    benchmark::DoNotOptimize(analysis::transfer_sweep(amp, -0.1, 0.1, 201, kParams, kNominal));
}
BENCHMARK(BM_TransferSweep)->Arg(0)->Arg(1);

void BM_ThdRun(benchmark::State& state) {
  const auto amp = amp_for(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(analysis::thd_run(amp, {}, kParams, kNominal));
}
BENCHMARK(BM_ThdRun)->Arg(0)->Arg(1);

void BM_CornerSweep(benchmark::State& state) {
  const auto amp = amp_for(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(analysis::corner_sweep(amp, {}, kParams));
}
BENCHMARK(BM_CornerSweep)->Arg(0)->Arg(1);

void BM_OptimizeFlatness(benchmark::State& state) {
  const diffpair::DiffPairSpec base{10.0, 1.0, 1.0, 116.75e-6};
  for (auto _ : state)
    benchmark::DoNotOptimize(diffpair::optimize_flatness(base, 0.04, {}, kParams, kNominal));
}
BENCHMARK(BM_OptimizeFlatness);

}  // namespace

BENCHMARK_MAIN();
