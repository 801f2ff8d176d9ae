// Copyright 2026 The qmetro Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


// Serial dense reference against the sector kernel swept under OpenMP.

#include <benchmark/benchmark.h>

#include "qmetro/metrology.hpp"

namespace {

using namespace qmetro;

InterferometerConfig config(int cutoff) {
  InterferometerConfig cfg;
  cfg.squeezing = SqueezingParams::from_mean_photons(3.631e-3);
  cfg.loss = LossModel::detection(0.805, 0.815);
  cfg.cutoff = FockCutoff(cutoff);
  return cfg;
}

void BM_SweepReference(benchmark::State& state) {
  const int cutoff = static_cast<int>(state.range(0));
  const auto grid = midpoint_phase_grid(static_cast<std::size_t>(state.range(1)));
  const auto pnr = DetectorPair::ideal_pnr(cutoff, cutoff);
  for (auto _ : state) benchmark::DoNotOptimize(sweep_fisher_reference(config(cutoff), grid, pnr, false));
  state.SetItemsProcessed(state.iterations() * state.range(1));
}

void BM_SweepParallel(benchmark::State& state) {
  const int cutoff = static_cast<int>(state.range(0));
  const auto grid = midpoint_phase_grid(static_cast<std::size_t>(state.range(1)));
  const auto pnr = DetectorPair::ideal_pnr(cutoff, cutoff);
  const SweepOptions options{false, static_cast<int>(state.range(2))};
  for (auto _ : state) benchmark::DoNotOptimize(sweep_fisher(config(cutoff), grid, pnr, options));
  state.SetItemsProcessed(state.iterations() * state.range(1));
}

BENCHMARK(BM_SweepReference)->Args({6, 64})->Args({10, 64})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SweepParallel)
    ->Args({6, 64, 1})
    ->Args({10, 64, 1})
    ->Args({10, 64, 0})
    ->Args({10, 2048, 0})
    ->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
