#include "dmtlr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dmtlr::eval {

namespace {

// Continued fraction for the regularized incomplete beta (modified Lentz).
double beta_cf(double a, double b, double x) {
  constexpr int kMaxIter = 300;
  constexpr double kEps = 1e-16;
  constexpr double kTiny = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) break;
  }
  return h;
}

double beta_inc(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double ln_bt = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                       a * std::log(x) + b * std::log1p(-x);
  const double bt = std::exp(ln_bt);
  if (x < (a + 1.0) / (a + b + 2.0)) return bt * beta_cf(a, b, x) / a;
  return 1.0 - bt * beta_cf(b, a, 1.0 - x) / b;
}

double student_t_cdf(double t, double dof) {
  const double x = dof / (dof + t * t);
  const double tail = 0.5 * beta_inc(0.5 * dof, 0.5, x);
  return t >= 0.0 ? 1.0 - tail : tail;
}

}  // namespace

double student_t_quantile(double p, int dof) {
  if (dof < 1) throw std::invalid_argument("student_t_quantile: dof must be >= 1");
  if (!(p > 0.0 && p < 1.0))
    throw std::invalid_argument("student_t_quantile: p must be in (0,1)");
  if (p == 0.5) return 0.0;
  const bool upper = p > 0.5;
  const double target = upper ? p : 1.0 - p;
  double lo = 0.0, hi = 1.0;
  while (student_t_cdf(hi, dof) < target) {
    hi *= 2.0;
    if (hi > 1e308) break;
  }
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    if (student_t_cdf(mid, dof) < target)
      lo = mid;
    else
      hi = mid;
  }
  const double q = 0.5 * (lo + hi);
  return upper ? q : -q;
}

FitResult r_squared(std::span<const double> truth, std::span<const double> predicted) {
  if (truth.size() != predicted.size())
    throw std::invalid_argument("r_squared: length mismatch");
  if (truth.size() < 2)
    throw std::invalid_argument("r_squared: need at least 2 points");
  FitResult result;
  const auto [t_min, t_max] = std::minmax_element(truth.begin(), truth.end());
  const auto [p_min, p_max] = std::minmax_element(predicted.begin(), predicted.end());
  if (*t_min == *t_max || *p_min == *p_max) return result;  // flagged, not 0

  const double n = static_cast<double>(truth.size());
  double t_mean = 0.0, p_mean = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    t_mean += truth[i];
    p_mean += predicted[i];
  }
  t_mean /= n;
  p_mean /= n;
  double s_tt = 0.0, s_pp = 0.0, s_tp = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double dt = truth[i] - t_mean;
    const double dp = predicted[i] - p_mean;
    s_tt += dt * dt;
    s_pp += dp * dp;
    s_tp += dt * dp;
  }
  result.slope = s_tp / s_tt;
  result.r2 = (s_tp * s_tp) / (s_tt * s_pp);
  result.valid = true;
  return result;
}

Interval confidence_interval(std::span<const double> per_trial_values) {
  const std::size_t k = per_trial_values.size();
  if (k < 2)
    throw std::invalid_argument("confidence_interval: need at least 2 trials");
  Interval interval;
  for (double v : per_trial_values) interval.mean += v;
  interval.mean /= static_cast<double>(k);
  const auto [lo, hi] =
      std::minmax_element(per_trial_values.begin(), per_trial_values.end());
  if (*lo == *hi) {  // zero variance, exactly
    interval.mean = *lo;
    return interval;
  }
  double ss = 0.0;
  for (double v : per_trial_values) {
    const double d = v - interval.mean;
    ss += d * d;
  }
  const double s = std::sqrt(ss / static_cast<double>(k - 1));
  interval.halfwidth = student_t_quantile(0.975, static_cast<int>(k) - 1) * s /
                       std::sqrt(static_cast<double>(k));
  return interval;
}

}  // namespace dmtlr::eval
