#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>
#include <vector>

#include "dmtlr/fft.hpp"
#include "dmtlr/rng.hpp"

using dmtlr::Rng;
using cdouble = std::complex<double>;

namespace {

// Quadratic-time reference transform.
std::vector<cdouble> naive_dft(const std::vector<cdouble>& in, bool inverse) {
  const std::size_t n = in.size();
  const double sign = inverse ? 1.0 : -1.0;
  std::vector<cdouble> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    cdouble acc{0.0, 0.0};
    for (std::size_t j = 0; j < n; ++j) {
      const double angle = sign * 2.0 * M_PI * static_cast<double>(k * j) / n;
      acc += in[j] * cdouble{std::cos(angle), std::sin(angle)};
    }
    out[k] = inverse ? acc / static_cast<double>(n) : acc;
  }
  return out;
}

std::vector<cdouble> random_signal(std::size_t n, Rng& rng) {
  std::vector<cdouble> v(n);
  for (auto& z : v) z = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
  return v;
}

}  // namespace

TEST_CASE("1d transform matches the naive DFT") {
  Rng rng(7);
  for (const int n : {2, 8, 64}) {
    std::vector<cdouble> signal = random_signal(static_cast<std::size_t>(n), rng);
    const auto expected = naive_dft(signal, false);
    dmtlr::fft::transform(signal.data(), n, false);
    for (int i = 0; i < n; ++i)
      CHECK(std::abs(signal[static_cast<std::size_t>(i)] - expected[static_cast<std::size_t>(i)]) < 1e-10);
  }
}

TEST_CASE("inverse transform matches the naive inverse and round-trips") {
  Rng rng(8);
  std::vector<cdouble> signal = random_signal(32, rng);
  const std::vector<cdouble> original = signal;
  dmtlr::fft::transform(signal.data(), 32, false);
  const auto expected = naive_dft(original, false);
  dmtlr::fft::transform(signal.data(), 32, true);
  for (std::size_t i = 0; i < signal.size(); ++i)
    CHECK(std::abs(signal[i] - original[i]) < 1e-12);
  (void)expected;
}

TEST_CASE("rejects non-power-of-two lengths") {
  std::vector<cdouble> signal(6);
  CHECK_THROWS_AS(dmtlr::fft::transform(signal.data(), 6, false),
                  std::invalid_argument);
  CHECK_THROWS_AS(dmtlr::fft::transform_2d(signal.data(), 2, 3, false),
                  std::invalid_argument);
  CHECK(dmtlr::fft::is_power_of_two(16));
  CHECK_FALSE(dmtlr::fft::is_power_of_two(12));
  CHECK_FALSE(dmtlr::fft::is_power_of_two(0));
}

TEST_CASE("2d transform of a constant is exactly a DC spike") {
  constexpr int n = 16;
  std::vector<double> field(n * n, 0.3125);
  const auto spectrum = dmtlr::fft::forward_2d_real(field, n);
  CHECK(spectrum[0].real() == 0.3125 * n * n);
  CHECK(spectrum[0].imag() == 0.0);
  for (std::size_t i = 1; i < spectrum.size(); ++i) {
    CHECK(spectrum[i].real() == 0.0);
    CHECK(spectrum[i].imag() == 0.0);
  }
  const auto back = dmtlr::fft::inverse_2d_real(spectrum, n);
  for (double v : back) CHECK(v == 0.3125);
}

TEST_CASE("2d delta transforms to a flat spectrum") {
  constexpr int n = 8;
  std::vector<double> field(n * n, 0.0);
  field[0] = 1.0;
  const auto spectrum = dmtlr::fft::forward_2d_real(field, n);
  for (const auto& z : spectrum) {
    CHECK(z.real() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(z.imag()) < 1e-12);
  }
}

TEST_CASE("2d round trip reproduces a random field") {
  constexpr int n = 32;
  Rng rng(9);
  std::vector<double> field(n * n);
  for (double& v : field) v = rng.uniform(-1.0, 1.0);
  const auto spectrum = dmtlr::fft::forward_2d_real(field, n);
  const auto back = dmtlr::fft::inverse_2d_real(spectrum, n);
  for (std::size_t i = 0; i < field.size(); ++i)
    CHECK(std::abs(back[i] - field[i]) < 1e-12);
}

TEST_CASE("single horizontal mode lands on the expected bins") {
  constexpr int n = 16;
  std::vector<double> field(n * n);
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x)
      field[static_cast<std::size_t>(y) * n + x] = std::sin(2.0 * M_PI * x / n);
  const auto spectrum = dmtlr::fft::forward_2d_real(field, n);
  // energy only at (kx, ky) = (±1, 0)
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) {
      const double mag = std::abs(spectrum[static_cast<std::size_t>(y) * n + x]);
      if (y == 0 && (x == 1 || x == n - 1))
        CHECK(mag == doctest::Approx(n * n / 2.0).epsilon(1e-10));
      else
        CHECK(mag < 1e-9);
    }
}
