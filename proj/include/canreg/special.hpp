#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "canreg/errors.hpp"

namespace canreg {

namespace detail {

// Lower regularized incomplete gamma by series expansion, valid for x < a + 1.
inline double gamma_p_series(double a, double x) {
  double ap = a;
  double sum = 1.0 / a;
  double term = sum;
  for (int i = 0; i < 1000; ++i) {
    ap += 1.0;
    term *= x / ap;
    sum += term;
    if (std::abs(term) < std::abs(sum) * 1e-16) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Upper regularized incomplete gamma by Lentz continued fraction, x >= a + 1.
inline double gamma_q_cf(double a, double x) {
  const double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= 1000; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < 1e-16) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace detail

inline double lower_regularized_gamma(double a, double x) {
  if (x < 0.0 || a <= 0.0) throw ValidationError("lower_regularized_gamma: bad arguments");
  if (x == 0.0) return 0.0;
  if (x < a + 1.0) return detail::gamma_p_series(a, x);
  return 1.0 - detail::gamma_q_cf(a, x);
}

inline double chi2_cdf(double x, int dof) {
  if (dof < 1) throw ValidationError("chi2_cdf: dof must be >= 1");
  if (x <= 0.0) return 0.0;
  return lower_regularized_gamma(0.5 * dof, 0.5 * x);
}

//! Quantile c with P(chi2_dof <= c) = 1 - alpha, absolute error below 1e-9.
inline double chi2_quantile(int dof, double alpha) {
  if (dof < 1) throw ValidationError("chi2_quantile: dof must be >= 1");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("chi2_quantile: alpha must be in (0, 1)");
  const double target = 1.0 - alpha;
  double hi = dof + 10.0;
  while (chi2_cdf(hi, dof) < target && hi < 1e8) hi *= 2.0;
  double lo = 0.0;
  for (int i = 0; i < 200 && hi - lo > 1e-12; ++i) {
    const double mid = 0.5 * (lo + hi);
    (chi2_cdf(mid, dof) < target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

// Kolmogorov-Smirnov machinery for calibration checks. `cdf` is the
// hypothesized distribution; the sample need not be sorted.
template <class Cdf>
double ks_statistic(std::vector<double> sample, const Cdf& cdf) {
  if (sample.empty()) throw ValidationError("ks_statistic: empty sample");
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double f = cdf(sample[i]);
    d = std::max(d, std::abs(f - static_cast<double>(i) / n));
    d = std::max(d, std::abs(static_cast<double>(i + 1) / n - f));
  }
  return d;
}

// Asymptotic critical value: reject at level alpha when D > ks_critical.
inline double ks_critical(double alpha, std::size_t n) {
  return std::sqrt(-0.5 * std::log(0.5 * alpha)) / std::sqrt(static_cast<double>(n));
}

}  // namespace canreg
