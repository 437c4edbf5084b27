#include <benchmark/benchmark.h>

#include "dmtlr/rng.hpp"
#include "dmtlr/simulation.hpp"

namespace {

void BM_SimulationRun(benchmark::State& state) {
  using namespace dmtlr;
  sim::SimParams params;
  params.mean_composition = 0.1;
  params.mobility = 1.25;
  params.gradient_coeff = 1.5;
  params.well_height = 1.0;
  params.noise_amplitude = 0.02;
  params.total_time = static_cast<double>(state.range(0));
  params.dt = 0.08;
  for (auto _ : state) {
    Rng rng(7);
    sim::PhaseField field = sim::run_simulation(params, 64, rng);
    benchmark::DoNotOptimize(field.values.data());
  }
  state.SetItemsProcessed(state.iterations() *
                          static_cast<std::int64_t>(params.total_time / params.dt));
}
BENCHMARK(BM_SimulationRun)->Arg(10)->Arg(40)->Unit(benchmark::kMillisecond);

}  // namespace
