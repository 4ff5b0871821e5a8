#include <benchmark/benchmark.h>

#include "ctsls/estimator.hpp"
#include "ctsls/km.hpp"
#include "ctsls/rng.hpp"
#include "ctsls/simgen.hpp"
#include "ctsls/synthetic.hpp"

using namespace ctsls;

namespace {

GeneratedData make(std::size_t n, double rate) {
  SimConfig c;
  c.n = n;
  c.censor_rate = rate;
  Rng rng(derive_seed(1, n));
  return generate_dataset(c, rng);
}

void BM_FitWeighted(benchmark::State& state) {
  const auto data = make(static_cast<std::size_t>(state.range(0)), 0.5);
  for (auto _ : state) benchmark::DoNotOptimize(fit_ctsls(data.sample));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_FitWeighted)->RangeMultiplier(4)->Range(256, 16384)->Unit(benchmark::kMillisecond)->Complexity();

void BM_FitUnweighted(benchmark::State& state) {
  const auto data = make(static_cast<std::size_t>(state.range(0)), 0.5);
  FitOptions opts;
  opts.weighted = false;
  for (auto _ : state) benchmark::DoNotOptimize(fit_ctsls(data.sample, opts));
}
BENCHMARK(BM_FitUnweighted)->RangeMultiplier(4)->Range(256, 16384)->Unit(benchmark::kMillisecond);

void BM_LeurgansTransform(benchmark::State& state) {
  const auto data = make(static_cast<std::size_t>(state.range(0)), 0.5);
  const auto& s = data.sample;
  const auto G = km_censoring(s);
  for (auto _ : state) benchmark::DoNotOptimize(leurgans_transform(s, G));
}
BENCHMARK(BM_LeurgansTransform)->RangeMultiplier(4)->Range(256, 16384);

}  // namespace

BENCHMARK_MAIN();
