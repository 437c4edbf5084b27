#ifndef DMTLR_SIMULATION_HPP
#define DMTLR_SIMULATION_HPP

#include <array>
#include <string>
#include <vector>

#include "dmtlr/rng.hpp"

namespace dmtlr::sim {

// The 18 continuous processing parameters of one simulation run, in manifest
// column order. The first seven drive the conserved dynamics directly; the
// ramp/anisotropy/texture entries modulate them; the six nuisance entries are
// recorded but never consumed by the solver.
struct SimParams {
  double mean_composition = 0.0;  // c0, conserved spatial mean
  double mobility = 1.0;
  double gradient_coeff = 1.0;  // kappa
  double well_height = 1.0;     // A in the double-well A(c^2-1)^2/4
  double noise_amplitude = 0.02;
  double total_time = 40.0;
  double dt = 0.08;
  double quench_ramp_lin = 0.0;   // mobility multiplier, linear in t/T
  double quench_ramp_quad = 0.0;  // mobility multiplier, quadratic in t/T
  double anisotropy_x = 1.0;      // scales kappa along x
  double anisotropy_y = 1.0;      // scales kappa along y
  double texture_phase = 0.0;     // phase of the initial long-wave texture
  std::array<double, 6> nuisance{};

  std::array<double, 18> to_array() const;
  static SimParams from_array(const std::array<double, 18>& values);

  // Time-dependent mobility M(t) = M * (1 + a*(t/T) + b*(t/T)^2); the
  // coefficient ranges keep the multiplier positive.
  double mobility_at(double time_fraction) const {
    return mobility * (1.0 + quench_ramp_lin * time_fraction +
                       quench_ramp_quad * time_fraction * time_fraction);
  }
};

struct ParamRange {
  const char* column;  // manifest column name, p01..p18
  const char* doc;
  double lo, hi;
};

// Declared ranges, fixed order; documented verbatim in manifest headers.
const std::array<ParamRange, 18>& param_ranges();

// Disjoint sampling regimes: the source regime draws mobility and kappa from
// the upper thirds of their declared ranges, the target regime from the
// remaining lower parts, so backbone pretraining sees a shifted domain.
enum class Regime { kTarget, kSource };

std::pair<double, double> regime_mobility_range(Regime regime);
std::pair<double, double> regime_kappa_range(Regime regime);

SimParams sample_params(Rng& rng, Regime regime);

// Periodic N x N composition field, row-major.
struct PhaseField {
  int n = 0;
  std::vector<double> values;

  double mean() const;
  bool all_finite() const;
};

// Semi-implicit Fourier spectral integration of conserved phase separation:
//   dc/dt = M(t) lap(mu),  mu = A(c^3 - c) - (kx d²/dx² + ky d²/dy²) c
// advanced in spectral space as
//   c_hat <- (c_hat - dt M k² g_hat) / (1 + dt M k² (kx_coef kx² + ky_coef ky²))
// with g = A(c^3 - c). The initial condition is c0 plus zero-mean uniform
// noise of the configured amplitude plus a weak sinusoidal texture set by
// texture_phase. Throws if N is not a power of two or the field loses
// finiteness (the message names the offending step).
//
// With checkpoint_interval > 0 the discrete free energy of the evolving state
// is recorded at step 0, every interval steps, and after the final step.
PhaseField run_simulation(const SimParams& params, int n, Rng& rng,
                          int checkpoint_interval = 0,
                          std::vector<double>* checkpoint_energies = nullptr);

// Discrete free energy sum_cells [A(c²-1)²/4 + (kx(dc/dx)² + ky(dc/dy)²)/2]
// with spectral derivatives; non-increasing along the conserved dynamics.
double free_energy(const PhaseField& field, const SimParams& params);

// The six regression targets extracted from a finished field.
struct TargetVector {
  double min_composition = 0.0;
  double max_composition = 0.0;
  double mean_abs_chemical_potential = 0.0;
  double gradient_energy_density = 0.0;
  double phase_fraction = 0.0;      // area fraction of the c > 0 phase
  double characteristic_length = 0.0;
  // True when the structure factor had no nonzero mode (constant field) and
  // the length fell back to the longest wavelength N.
  bool length_defaulted = false;

  std::array<double, 6> to_array() const;
};

extern const std::array<const char*, 6> kTargetColumns;
extern const std::array<const char*, 6> kTargetDocs;

TargetVector extract_targets(const PhaseField& field, const SimParams& params);

}  // namespace dmtlr::sim

#endif  // DMTLR_SIMULATION_HPP
