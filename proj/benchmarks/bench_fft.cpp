#include <benchmark/benchmark.h>

#include <complex>
#include <vector>

#include "dmtlr/fft.hpp"
#include "dmtlr/rng.hpp"

namespace {

void BM_Transform2d(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  dmtlr::Rng rng(1);
  std::vector<std::complex<double>> data(static_cast<std::size_t>(n) * n);
  for (auto& z : data) z = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
  for (auto _ : state) {
    dmtlr::fft::transform_2d(data.data(), n, n, false);
    dmtlr::fft::transform_2d(data.data(), n, n, true);
    benchmark::DoNotOptimize(data.data());
  }
  state.SetItemsProcessed(state.iterations() * 2 * n * n);
}
BENCHMARK(BM_Transform2d)->Arg(64)->Arg(128);

void BM_RealRoundTrip(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  dmtlr::Rng rng(2);
  std::vector<double> field(static_cast<std::size_t>(n) * n);
  for (double& v : field) v = rng.uniform(-1.0, 1.0);
  for (auto _ : state) {
    auto spectrum = dmtlr::fft::forward_2d_real(field, n);
    auto back = dmtlr::fft::inverse_2d_real(spectrum, n);
    benchmark::DoNotOptimize(back.data());
  }
}
BENCHMARK(BM_RealRoundTrip)->Arg(64);

}  // namespace

BENCHMARK_MAIN();
