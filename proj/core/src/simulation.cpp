#include "dmtlr/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>

#include "dmtlr/fft.hpp"

namespace dmtlr::sim {

namespace {

constexpr double kTwoPi = 6.283185307179586476925287;

// Signed wavenumber 2*pi*m/N for row-major FFT index m.
double wavenumber(int index, int n) {
  const int m = index <= n / 2 ? index : index - n;
  return kTwoPi * m / n;
}

struct SpectralTables {
  std::vector<double> ksq;        // kx² + ky²
  std::vector<double> stiffness;  // k² (ax kappa kx² + ay kappa ky²)
  std::vector<double> lap_coeff;  // ax kappa kx² + ay kappa ky²
};

SpectralTables make_tables(int n, double kappa_x, double kappa_y) {
  SpectralTables t;
  const std::size_t total = static_cast<std::size_t>(n) * n;
  t.ksq.resize(total);
  t.stiffness.resize(total);
  t.lap_coeff.resize(total);
  for (int y = 0; y < n; ++y) {
    const double ky = wavenumber(y, n);
    for (int x = 0; x < n; ++x) {
      const double kx = wavenumber(x, n);
      const std::size_t i = static_cast<std::size_t>(y) * n + x;
      const double ksq = kx * kx + ky * ky;
      const double lap = kappa_x * kx * kx + kappa_y * ky * ky;
      t.ksq[i] = ksq;
      t.lap_coeff[i] = lap;
      t.stiffness[i] = ksq * lap;
    }
  }
  return t;
}

}  // namespace

std::array<double, 18> SimParams::to_array() const {
  return {mean_composition, mobility,       gradient_coeff,  well_height,
          noise_amplitude,  total_time,     dt,              quench_ramp_lin,
          quench_ramp_quad, anisotropy_x,   anisotropy_y,    texture_phase,
          nuisance[0],      nuisance[1],    nuisance[2],     nuisance[3],
          nuisance[4],      nuisance[5]};
}

SimParams SimParams::from_array(const std::array<double, 18>& v) {
  SimParams p;
  p.mean_composition = v[0];
  p.mobility = v[1];
  p.gradient_coeff = v[2];
  p.well_height = v[3];
  p.noise_amplitude = v[4];
  p.total_time = v[5];
  p.dt = v[6];
  p.quench_ramp_lin = v[7];
  p.quench_ramp_quad = v[8];
  p.anisotropy_x = v[9];
  p.anisotropy_y = v[10];
  p.texture_phase = v[11];
  for (int i = 0; i < 6; ++i) p.nuisance[static_cast<std::size_t>(i)] = v[static_cast<std::size_t>(12 + i)];
  return p;
}

const std::array<ParamRange, 18>& param_ranges() {
  static const std::array<ParamRange, 18> ranges = {{
      {"p01", "mean composition c0", -0.4, 0.4},
      {"p02", "mobility M", 0.5, 2.0},
      {"p03", "gradient coefficient kappa", 0.5, 3.0},
      {"p04", "double-well height A", 0.5, 2.0},
      {"p05", "initial noise amplitude", 0.005, 0.05},
      {"p06", "total simulated time T", 20.0, 80.0},
      {"p07", "time step dt", 0.05, 0.1},
      {"p08", "quench ramp, linear mobility coefficient", -0.3, 0.3},
      {"p09", "quench ramp, quadratic mobility coefficient", -0.3, 0.3},
      {"p10", "kappa anisotropy along x", 0.8, 1.25},
      {"p11", "kappa anisotropy along y", 0.8, 1.25},
      {"p12", "initial texture phase", 0.0, kTwoPi},
      {"p13", "nuisance parameter (inert)", 0.0, 1.0},
      {"p14", "nuisance parameter (inert)", 0.0, 1.0},
      {"p15", "nuisance parameter (inert)", -1.0, 1.0},
      {"p16", "nuisance parameter (inert)", -1.0, 1.0},
      {"p17", "nuisance parameter (inert)", 0.0, 10.0},
      {"p18", "nuisance parameter (inert)", 0.1, 1.0},
  }};
  return ranges;
}

std::pair<double, double> regime_mobility_range(Regime regime) {
  const ParamRange& full = param_ranges()[1];
  const double cut = full.lo + 2.0 * (full.hi - full.lo) / 3.0;
  return regime == Regime::kSource ? std::pair{cut, full.hi} : std::pair{full.lo, cut};
}

std::pair<double, double> regime_kappa_range(Regime regime) {
  const ParamRange& full = param_ranges()[2];
  const double cut = full.lo + 2.0 * (full.hi - full.lo) / 3.0;
  return regime == Regime::kSource ? std::pair{cut, full.hi} : std::pair{full.lo, cut};
}

SimParams sample_params(Rng& rng, Regime regime) {
  const auto& ranges = param_ranges();
  std::array<double, 18> v{};
  for (std::size_t i = 0; i < v.size(); ++i)
    v[i] = rng.uniform(ranges[i].lo, ranges[i].hi);
  const auto [m_lo, m_hi] = regime_mobility_range(regime);
  const auto [k_lo, k_hi] = regime_kappa_range(regime);
  // Re-map the already-drawn values into the regime sub-ranges so both
  // regimes consume the rng identically.
  const auto& full = ranges;
  v[1] = m_lo + (v[1] - full[1].lo) / (full[1].hi - full[1].lo) * (m_hi - m_lo);
  v[2] = k_lo + (v[2] - full[2].lo) / (full[2].hi - full[2].lo) * (k_hi - k_lo);
  return SimParams::from_array(v);
}

double PhaseField::mean() const {
  double sum = 0.0;
  for (double v : values) sum += v;
  return values.empty() ? 0.0 : sum / static_cast<double>(values.size());
}

bool PhaseField::all_finite() const {
  for (double v : values)
    if (!std::isfinite(v)) return false;
  return true;
}

namespace {

// Energy of the state (c, c_hat): real-space double well plus the spectral
// quadratic form of the stiffness, via Parseval.
double state_energy(const std::vector<double>& c,
                    const std::vector<std::complex<double>>& spectrum,
                    const SpectralTables& tables, double well_height) {
  double energy = 0.0;
  for (double v : c) {
    const double well = v * v - 1.0;
    energy += 0.25 * well_height * well * well;
  }
  double grad = 0.0;
  for (std::size_t i = 0; i < spectrum.size(); ++i)
    grad += tables.lap_coeff[i] * std::norm(spectrum[i]);
  return energy + 0.5 * grad / static_cast<double>(c.size());
}

}  // namespace

PhaseField run_simulation(const SimParams& params, int n, Rng& rng,
                          int checkpoint_interval,
                          std::vector<double>* checkpoint_energies) {
  if (!fft::is_power_of_two(n))
    throw std::invalid_argument("run_simulation: grid size " + std::to_string(n) +
                                " is not a power of two");
  const std::size_t total = static_cast<std::size_t>(n) * n;
  const int steps = static_cast<int>(std::ceil(params.total_time / params.dt));

  // Zero-mean perturbation on top of c0 keeps the conserved mean at c0.
  std::vector<double> field(total, 0.0);
  if (params.noise_amplitude != 0.0) {
    for (double& v : field)
      v = params.noise_amplitude * rng.uniform(-1.0, 1.0);
    const double texture = 0.3 * params.noise_amplitude;
    for (int y = 0; y < n; ++y)
      for (int x = 0; x < n; ++x)
        field[static_cast<std::size_t>(y) * n + x] +=
            texture * std::sin(kTwoPi * (x + y) / n + params.texture_phase);
    double mean = 0.0;
    for (double v : field) mean += v;
    mean /= static_cast<double>(total);
    for (double& v : field) v += params.mean_composition - mean;
  } else {
    std::fill(field.begin(), field.end(), params.mean_composition);
  }

  const double kappa_x = params.gradient_coeff * params.anisotropy_x;
  const double kappa_y = params.gradient_coeff * params.anisotropy_y;
  const SpectralTables tables = make_tables(n, kappa_x, kappa_y);

  auto spectrum = fft::forward_2d_real(field, n);
  std::vector<std::complex<double>> g_hat(total);
  std::vector<std::complex<double>> scratch(total);
  std::vector<double> c(total);
  const double a = params.well_height;
  std::vector<double> g(total);

  for (int step = 0; step < steps; ++step) {
    fft::inverse_2d_real_into(spectrum.data(), c.data(), n, scratch.data());
    for (std::size_t i = 0; i < total; ++i) {
      if (!std::isfinite(c[i]))
        throw std::runtime_error("run_simulation: field lost finiteness at step " +
                                 std::to_string(step));
      const double v = c[i];
      g[i] = a * (v * v * v - v);
    }
    if (checkpoint_interval > 0 && checkpoint_energies &&
        step % checkpoint_interval == 0)
      checkpoint_energies->push_back(
          state_energy(c, spectrum, tables, params.well_height));
    fft::forward_2d_real_into(g.data(), g_hat.data(), n);
    const double dt_m =
        params.dt * params.mobility_at((step + 0.5) / static_cast<double>(steps));
    for (std::size_t i = 0; i < total; ++i)
      spectrum[i] = (spectrum[i] - dt_m * tables.ksq[i] * g_hat[i]) /
                    (1.0 + dt_m * tables.stiffness[i]);
  }

  PhaseField result;
  result.n = n;
  result.values.resize(total);
  fft::inverse_2d_real_into(spectrum.data(), result.values.data(), n, scratch.data());
  if (!result.all_finite())
    throw std::runtime_error("run_simulation: field lost finiteness at step " +
                             std::to_string(steps));
  if (checkpoint_interval > 0 && checkpoint_energies)
    checkpoint_energies->push_back(
        state_energy(result.values, spectrum, tables, params.well_height));
  return result;
}

namespace {

// Spectral first derivatives; the Nyquist mode is dropped as usual for odd
// derivatives of real fields.
void spectral_gradients(const std::vector<std::complex<double>>& spectrum, int n,
                        std::vector<double>& ddx, std::vector<double>& ddy) {
  const std::size_t total = static_cast<std::size_t>(n) * n;
  std::vector<std::complex<double>> gx(total), gy(total);
  for (int y = 0; y < n; ++y) {
    const double ky = y == n / 2 ? 0.0 : wavenumber(y, n);
    for (int x = 0; x < n; ++x) {
      const double kx = x == n / 2 ? 0.0 : wavenumber(x, n);
      const std::size_t i = static_cast<std::size_t>(y) * n + x;
      gx[i] = std::complex<double>(0.0, kx) * spectrum[i];
      gy[i] = std::complex<double>(0.0, ky) * spectrum[i];
    }
  }
  fft::transform_2d(gx.data(), n, n, true);
  fft::transform_2d(gy.data(), n, n, true);
  ddx.resize(total);
  ddy.resize(total);
  for (std::size_t i = 0; i < total; ++i) {
    ddx[i] = gx[i].real();
    ddy[i] = gy[i].real();
  }
}

}  // namespace

double free_energy(const PhaseField& field, const SimParams& params) {
  const int n = field.n;
  const double kappa_x = params.gradient_coeff * params.anisotropy_x;
  const double kappa_y = params.gradient_coeff * params.anisotropy_y;
  double energy = 0.0;
  for (double c : field.values) {
    const double well = c * c - 1.0;
    energy += 0.25 * params.well_height * well * well;
  }
  // Gradient term via Parseval with the same quadratic form the dynamics
  // dissipates: (1/2N²) sum_k (kx_coef kx² + ky_coef ky²) |c_hat|².
  const auto spectrum = fft::forward_2d_real(field.values, n);
  const std::size_t total = field.values.size();
  double grad = 0.0;
  for (int y = 0; y < n; ++y) {
    const double ky = wavenumber(y, n);
    for (int x = 0; x < n; ++x) {
      const double kx = wavenumber(x, n);
      const std::size_t i = static_cast<std::size_t>(y) * n + x;
      grad += (kappa_x * kx * kx + kappa_y * ky * ky) * std::norm(spectrum[i]);
    }
  }
  energy += 0.5 * grad / static_cast<double>(total);
  return energy;
}

std::array<double, 6> TargetVector::to_array() const {
  return {min_composition,         max_composition, mean_abs_chemical_potential,
          gradient_energy_density, phase_fraction,  characteristic_length};
}

const std::array<const char*, 6> kTargetColumns = {"t1", "t2", "t3",
                                                   "t4", "t5", "t6"};
const std::array<const char*, 6> kTargetDocs = {
    "minimum composition",
    "maximum composition",
    "mean absolute chemical potential",
    "interfacial gradient energy density",
    "area fraction of the c > 0 phase",
    "characteristic length 2*pi / structure-factor mean wavenumber",
};

TargetVector extract_targets(const PhaseField& field, const SimParams& params) {
  if (!field.all_finite())
    throw std::invalid_argument("extract_targets: non-finite field");
  const int n = field.n;
  const std::size_t total = field.values.size();
  TargetVector t;

  t.min_composition = *std::min_element(field.values.begin(), field.values.end());
  t.max_composition = *std::max_element(field.values.begin(), field.values.end());

  const double kappa_x = params.gradient_coeff * params.anisotropy_x;
  const double kappa_y = params.gradient_coeff * params.anisotropy_y;
  const auto spectrum = fft::forward_2d_real(field.values, n);

  // mu = A(c^3 - c) - (kx d²/dx² + ky d²/dy²) c, Laplacian taken spectrally.
  std::vector<std::complex<double>> lap(total);
  for (int y = 0; y < n; ++y) {
    const double ky = wavenumber(y, n);
    for (int x = 0; x < n; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * n + x;
      const double kx = wavenumber(x, n);
      lap[i] = (kappa_x * kx * kx + kappa_y * ky * ky) * spectrum[i];
    }
  }
  fft::transform_2d(lap.data(), n, n, true);
  double abs_mu = 0.0;
  std::size_t positive = 0;
  for (std::size_t i = 0; i < total; ++i) {
    const double c = field.values[i];
    abs_mu += std::abs(params.well_height * (c * c * c - c) + lap[i].real());
    if (c > 0.0) ++positive;
  }
  t.mean_abs_chemical_potential = abs_mu / static_cast<double>(total);
  t.phase_fraction = static_cast<double>(positive) / static_cast<double>(total);

  std::vector<double> ddx, ddy;
  spectral_gradients(spectrum, n, ddx, ddy);
  double grad_energy = 0.0;
  for (std::size_t i = 0; i < total; ++i)
    grad_energy += 0.5 * (kappa_x * ddx[i] * ddx[i] + kappa_y * ddy[i] * ddy[i]);
  t.gradient_energy_density = grad_energy / static_cast<double>(total);

  // Structure-factor weighted mean wavenumber, zero mode excluded.
  double s_sum = 0.0, sk_sum = 0.0;
  for (int y = 0; y < n; ++y) {
    const double ky = wavenumber(y, n);
    for (int x = 0; x < n; ++x) {
      if (x == 0 && y == 0) continue;
      const double kx = wavenumber(x, n);
      const std::size_t i = static_cast<std::size_t>(y) * n + x;
      const double s = std::norm(spectrum[i]);
      s_sum += s;
      sk_sum += s * std::sqrt(kx * kx + ky * ky);
    }
  }
  if (s_sum > 0.0) {
    t.characteristic_length = kTwoPi / (sk_sum / s_sum);
  } else {
    t.characteristic_length = static_cast<double>(n);
    t.length_defaulted = true;
  }
  return t;
}

}  // namespace dmtlr::sim
