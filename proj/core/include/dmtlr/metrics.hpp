#ifndef DMTLR_METRICS_HPP
#define DMTLR_METRICS_HPP

#include <span>

namespace dmtlr::eval {

// Least-squares fit of predicted against true values. r2 is the squared
// Pearson correlation, identical to the coefficient of determination of that
// fit. `valid` is false when either vector is constant (undefined
// correlation); such results become flagged failure rows, never 0.
struct FitResult {
  double r2 = 0.0;
  double slope = 0.0;
  bool valid = false;
};

FitResult r_squared(std::span<const double> truth, std::span<const double> predicted);

// mean +- t_{0.975,k-1} * s / sqrt(k) over k >= 2 trials, with s the sample
// standard deviation.
struct Interval {
  double mean = 0.0;
  double halfwidth = 0.0;
};

Interval confidence_interval(std::span<const double> per_trial_values);

// Two-sided Student-t quantile, accurate to ~1e-13 relative; used by the
// confidence interval and exposed for its oracle tests.
double student_t_quantile(double p, int dof);

}  // namespace dmtlr::eval

#endif  // DMTLR_METRICS_HPP
