#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <vector>

#include "canreg/errors.hpp"

namespace canreg {

//! Fourth-order compact kernel (15/32)(3 - 7t^2)(1 - t^2) on [-1, 1].
//!
//! Moments 1..3 vanish, the fourth does not, which buys O(h^4) smoothing
//! bias at the price of possibly negative weights. Downstream code must not
//! assume positivity of the smoothed denominators.
inline double kernel_weight(double t) {
  if (!(std::abs(t) <= 1.0)) return 0.0;
  const double t2 = t * t;
  return (15.0 / 32.0) * (3.0 - 7.0 * t2) * (1.0 - t2);
}

struct NwEstimate {
  double ghat = 0.0;  // (1/(nh)) sum K((u - U_i)/h) v_i
  double phat = 0.0;  // (1/(nh)) sum K((u - U_i)/h)
};

namespace detail {

// Canonical evaluation order: sort by (key, tiebreak). Summation then does
// not depend on how the caller happened to order the sample.
inline std::vector<int> canonical_order(const Eigen::VectorXd& key, const Eigen::VectorXd& tiebreak) {
  std::vector<int> idx(static_cast<std::size_t>(key.size()));
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](int a, int b) {
    if (key[a] != key[b]) return key[a] < key[b];
    return tiebreak[a] < tiebreak[b];
  });
  return idx;
}

}  // namespace detail

//! Smoothed numerator/denominator of the confounder regression at point u.
//! Both components may be negative; no clamping happens here.
inline NwEstimate nw_components(double u, const Eigen::VectorXd& us, const Eigen::VectorXd& vs,
                                double h) {
  const auto n = us.size();
  if (n == 0) throw ValidationError("nw_components: empty sample");
  if (vs.size() != n) throw ValidationError("nw_components: length mismatch");
  if (!(h > 0.0)) throw ValidationError("nw_components: bandwidth must be positive");
  const auto order = detail::canonical_order(us, vs);
  NwEstimate est;
  for (int j : order) {
    const double w = kernel_weight((u - us[j]) / h);
    est.ghat += w * vs[j];
    est.phat += w;
  }
  const double scale = 1.0 / (static_cast<double>(n) * h);
  est.ghat *= scale;
  est.phat *= scale;
  return est;
}

struct BandwidthRange {
  double lo = 0.0;
  double hi = 0.0;
};

// Admissible bandwidths [log(n)/sqrt(n), n^{-1/8}], both scaled by the sample
// standard deviation of the confounder so the rule is unit invariant.
inline BandwidthRange bandwidth_range(std::size_t n, double s_u) {
  if (n < 2) throw ValidationError("bandwidth_range: need n >= 2");
  if (!(s_u > 0.0)) throw ValidationError("bandwidth_range: confounder is degenerate");
  const double nn = static_cast<double>(n);
  BandwidthRange r;
  r.lo = s_u * std::log(nn) / std::sqrt(nn);
  r.hi = s_u * std::pow(nn, -1.0 / 8.0);
  if (r.lo >= r.hi) r.lo = 0.5 * r.hi;
  return r;
}

inline std::vector<double> log_spaced_grid(double lo, double hi, int points) {
  if (!(lo > 0.0) || !(hi >= lo) || points < 1) throw ValidationError("log_spaced_grid: bad arguments");
  std::vector<double> g(static_cast<std::size_t>(points));
  if (points == 1) {
    g[0] = hi;
    return g;
  }
  const double llo = std::log(lo), lhi = std::log(hi);
  for (int i = 0; i < points; ++i)
    g[static_cast<std::size_t>(i)] = std::exp(llo + (lhi - llo) * i / (points - 1));
  g.front() = lo;
  g.back() = hi;
  return g;
}

struct BandwidthChoice {
  double h = 0.0;
  double criterion_value = 0.0;          // leave-one-out CV sum of squares at h
  BandwidthRange admissible_range;
  std::size_t n_skipped = 0;             // CV terms dropped at h (guarded denominator)
};

struct CvCurve {
  std::vector<double> h;
  std::vector<double> criterion;
  std::vector<std::size_t> skipped;
};

namespace detail {

inline double sum_of_squares(const Eigen::VectorXd& v) { return v.squaredNorm(); }

// Picks the minimizer; exact ties (up to rounding noise in the criterion)
// break toward the largest bandwidth, i.e. the smoothest fit at equal loss.
inline std::size_t pick_bandwidth(const CvCurve& curve, double tie_scale, std::size_t n_total) {
  double best = std::numeric_limits<double>::infinity();
  bool any = false;
  for (std::size_t j = 0; j < curve.h.size(); ++j) {
    if (curve.skipped[j] >= n_total) continue;  // fully degenerate grid point
    best = std::min(best, curve.criterion[j]);
    any = true;
  }
  if (!any) throw NumericalError("loocv_bandwidth: every grid point degenerate (all CV terms skipped)");
  const double tol = 1e-12 * std::max(1.0, tie_scale);
  std::size_t pick = 0;
  bool found = false;
  for (std::size_t j = 0; j < curve.h.size(); ++j) {
    if (curve.skipped[j] >= n_total) continue;
    if (curve.criterion[j] <= best + tol) {
      pick = j;  // grid is ascending, so the last hit is the largest h
      found = true;
    }
  }
  if (!found) throw NumericalError("loocv_bandwidth: no admissible grid point");
  return pick;
}

}  // namespace detail

//! Leave-one-out CV curves for several series observed at the same u values.
//!
//! The smoothing denominator depends on u and h only, so it is shared across
//! series; a grid point is one O(n^2) pass. An observation is skipped (and
//! counted) when its leave-one-out denominator is smaller in magnitude than
//! `guard`, which can happen near the boundary with a compact kernel.
inline std::vector<CvCurve> loocv_curves(const Eigen::VectorXd& us,
                                         const std::vector<const Eigen::VectorXd*>& series,
                                         const std::vector<double>& grid, double guard) {
  const auto n = us.size();
  const std::size_t m = series.size();
  if (n < 3) throw ValidationError("loocv_curves: need n >= 3");
  for (const auto* s : series)
    if (s->size() != n) throw ValidationError("loocv_curves: series length mismatch");

  // Canonical order keyed by u with the first series as tiebreak keeps the
  // result independent of input permutation; the compact support turns the
  // inner sum into a sorted window.
  const auto order = detail::canonical_order(us, m > 0 ? *series[0] : us);
  std::vector<double> su(static_cast<std::size_t>(n));
  std::vector<std::vector<double>> sv(m, std::vector<double>(static_cast<std::size_t>(n)));
  for (std::size_t k = 0; k < order.size(); ++k) {
    su[k] = us[order[k]];
    for (std::size_t s = 0; s < m; ++s) sv[s][k] = (*series[s])[order[k]];
  }

  std::vector<CvCurve> curves(m);
  for (auto& c : curves) {
    c.h = grid;
    c.criterion.assign(grid.size(), 0.0);
    c.skipped.assign(grid.size(), 0);
  }

  std::vector<double> num(m);
  for (std::size_t gi = 0; gi < grid.size(); ++gi) {
    const double h = grid[gi];
    if (!(h > 0.0)) throw ValidationError("loocv_curves: bandwidths must be positive");
    const double den_scale = 1.0 / (static_cast<double>(n - 1) * h);
    std::size_t lo = 0, hi = 0;
    for (std::size_t k = 0; k < su.size(); ++k) {
      while (lo < su.size() && su[lo] < su[k] - h) ++lo;
      while (hi < su.size() && su[hi] <= su[k] + h) ++hi;
      std::fill(num.begin(), num.end(), 0.0);
      double den = 0.0;
      for (std::size_t j = lo; j < hi; ++j) {
        if (j == k) continue;
        const double w = kernel_weight((su[k] - su[j]) / h);
        den += w;
        for (std::size_t s = 0; s < m; ++s) num[s] += w * sv[s][j];
      }
      if (std::abs(den * den_scale) < guard) {
        for (std::size_t s = 0; s < m; ++s) ++curves[s].skipped[gi];
        continue;
      }
      for (std::size_t s = 0; s < m; ++s) {
        const double resid = sv[s][k] - num[s] / den;
        curves[s].criterion[gi] += resid * resid;
      }
    }
  }
  return curves;
}

//! Per-series LOO-CV bandwidths over a shared grid. With `shared` a single
//! bandwidth minimizing the summed criteria is imposed on every series.
inline std::vector<BandwidthChoice> loocv_bandwidths(const Eigen::VectorXd& us,
                                                     const std::vector<const Eigen::VectorXd*>& series,
                                                     std::optional<std::vector<double>> grid = {},
                                                     std::optional<double> guard = {},
                                                     bool shared = false, int grid_points = 30) {
  const auto n = us.size();
  if (n < 10) throw ValidationError("loocv_bandwidths: need n >= 10");
  const double mean = us.mean();
  const double s_u = std::sqrt((us.array() - mean).square().sum() / static_cast<double>(n - 1));
  const BandwidthRange range = bandwidth_range(static_cast<std::size_t>(n), s_u);
  const std::vector<double> g = grid ? *grid : log_spaced_grid(range.lo, range.hi, grid_points);
  const double guard_value = guard.value_or(1.0 / static_cast<double>(n));

  const auto curves = loocv_curves(us, series, g, guard_value);

  std::vector<BandwidthChoice> choices(series.size());
  if (shared && !series.empty()) {
    CvCurve total = curves[0];
    double tie_scale = 0.0;
    for (std::size_t s = 0; s < series.size(); ++s) {
      tie_scale += detail::sum_of_squares(*series[s]);
      if (s == 0) continue;
      for (std::size_t j = 0; j < total.h.size(); ++j) total.criterion[j] += curves[s].criterion[j];
    }
    const std::size_t pick = detail::pick_bandwidth(total, tie_scale, static_cast<std::size_t>(n));
    for (std::size_t s = 0; s < series.size(); ++s)
      choices[s] = {g[pick], curves[s].criterion[pick], range, curves[s].skipped[pick]};
    return choices;
  }
  for (std::size_t s = 0; s < series.size(); ++s) {
    const std::size_t pick =
        detail::pick_bandwidth(curves[s], detail::sum_of_squares(*series[s]), static_cast<std::size_t>(n));
    choices[s] = {g[pick], curves[s].criterion[pick], range, curves[s].skipped[pick]};
  }
  return choices;
}

inline BandwidthChoice loocv_bandwidth(const Eigen::VectorXd& us, const Eigen::VectorXd& vs,
                                       std::optional<std::vector<double>> grid = {},
                                       std::optional<double> guard = {}) {
  return loocv_bandwidths(us, {&vs}, std::move(grid), guard).front();
}

}  // namespace canreg
