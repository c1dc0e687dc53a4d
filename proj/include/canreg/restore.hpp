#pragma once

#include <Eigen/Core>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "canreg/errors.hpp"
#include "canreg/kernel.hpp"

namespace canreg {

//! The data a user actually has: confounder u, distorted predictors x (n x q)
//! and distorted response y.
struct ObservedSample {
  Eigen::VectorXd u;
  Eigen::MatrixXd x;
  Eigen::VectorXd y;

  int n() const { return static_cast<int>(u.size()); }
  int q() const { return static_cast<int>(x.cols()); }
};

namespace detail {

inline void require_mean_away_from_zero(const Eigen::VectorXd& v, const std::string& name) {
  const double m = v.mean();
  const double sd = std::sqrt((v.array() - m).square().sum() / std::max<double>(1.0, v.size() - 1.0));
  if (m == 0.0 || std::abs(m) < 1e-8 * sd)
    throw ValidationError("sample mean of " + name + " is numerically zero; distortions are not identifiable from it");
}

}  // namespace detail

inline void validate_sample(const ObservedSample& sample) {
  const int n = sample.n();
  if (n < 10) throw ValidationError("observed sample: need n >= 10");
  if (sample.x.rows() != n || sample.y.size() != n)
    throw ValidationError("observed sample: u, x, y lengths disagree");
  if (!sample.u.allFinite() || !sample.x.allFinite() || !sample.y.allFinite())
    throw ValidationError("observed sample: non-finite values");
  detail::require_mean_away_from_zero(sample.y, "y");
  for (int r = 0; r < sample.q(); ++r)
    detail::require_mean_away_from_zero(sample.x.col(r), "x" + std::to_string(r + 1));
}

//! Estimated distortion values at the sample points, plus everything needed
//! to reproduce them.
struct DistortionFit {
  Eigen::VectorXd psi_hat;                 // n values for the response distortion
  Eigen::MatrixXd phi_hat;                 // q x n values for the predictor distortions
  std::vector<BandwidthChoice> bandwidths; // [response, predictor 1, ..., predictor q]
  double ybar_tilde = 0.0;
  Eigen::VectorXd xbar_tilde;
  double guard = 0.0;
  int n_clamped = 0;
};

struct RestoreOptions {
  std::optional<double> bandwidth_y;
  std::vector<double> bandwidth_x;        // empty = select by CV
  std::optional<double> guard;            // default 1/n
  bool shared_bandwidth = false;
  std::optional<std::vector<double>> grid;
  int grid_points = 30;
};

namespace detail {

// Ratio estimate at every sample point for one series, leave-self-in, with
// sign-preserving clamping of near-zero denominators. `clamped` counts every
// clamping event (denominator or final value). Summation runs over a sorted
// window (compact support), so it does not depend on the input ordering.
inline Eigen::VectorXd ratio_at_points(const Eigen::VectorXd& us, const Eigen::VectorXd& vs,
                                       double h, double series_mean, double guard, int& clamped) {
  const auto n = us.size();
  const auto order = canonical_order(us, vs);
  std::vector<double> su(static_cast<std::size_t>(n)), sv(static_cast<std::size_t>(n));
  for (std::size_t k = 0; k < order.size(); ++k) {
    su[k] = us[order[k]];
    sv[k] = vs[order[k]];
  }
  Eigen::VectorXd out(n);
  const double scale = 1.0 / (static_cast<double>(n) * h);
  for (int i = 0; i < n; ++i) {
    const auto lo = std::lower_bound(su.begin(), su.end(), us[i] - h) - su.begin();
    const auto hi = std::upper_bound(su.begin(), su.end(), us[i] + h) - su.begin();
    double num = 0.0, den = 0.0;
    for (auto j = lo; j < hi; ++j) {
      const double w = kernel_weight((us[i] - su[static_cast<std::size_t>(j)]) / h);
      num += w * sv[static_cast<std::size_t>(j)];
      den += w;
    }
    num *= scale;
    den *= scale;
    if (std::abs(den) < guard) {
      den = (den < 0.0 ? -guard : guard);
      ++clamped;
    }
    double value = (num / den) / series_mean;
    if (std::abs(value) < guard) {
      value = (value < 0.0 ? -guard : guard);
      ++clamped;
    }
    out[i] = value;
  }
  return out;
}

}  // namespace detail

//! Estimates the response and predictor distortion values at the sample
//! points by kernel smoothing against the confounder.
//!
//! Sums are leave-self-in; bandwidth selection (when not given) is the only
//! leave-one-out step. Denominators and final values with magnitude below
//! `guard` (default 1/n) are clamped sign-preservingly and counted.
inline DistortionFit estimate_distortions(const ObservedSample& sample,
                                          const RestoreOptions& options = {}) {
  validate_sample(sample);
  const int n = sample.n();
  const int q = sample.q();
  const double guard = options.guard.value_or(1.0 / n);
  if (options.guard && !(*options.guard > 0.0))
    throw ValidationError("estimate_distortions: guard must be positive");

  DistortionFit fit;
  fit.guard = guard;
  fit.ybar_tilde = sample.y.mean();
  fit.xbar_tilde = sample.x.colwise().mean();

  const bool explicit_y = options.bandwidth_y.has_value();
  const bool explicit_x = !options.bandwidth_x.empty();
  if (explicit_x && static_cast<int>(options.bandwidth_x.size()) != q)
    throw ValidationError("estimate_distortions: need one explicit bandwidth per predictor");

  std::vector<BandwidthChoice> chosen(static_cast<std::size_t>(q) + 1);
  if (explicit_y && explicit_x) {
    if (!(*options.bandwidth_y > 0.0)) throw ValidationError("estimate_distortions: bandwidths must be positive");
    chosen[0] = {*options.bandwidth_y, 0.0, {}, 0};
    for (int r = 0; r < q; ++r) {
      if (!(options.bandwidth_x[static_cast<std::size_t>(r)] > 0.0))
        throw ValidationError("estimate_distortions: bandwidths must be positive");
      chosen[static_cast<std::size_t>(r) + 1] = {options.bandwidth_x[static_cast<std::size_t>(r)], 0.0, {}, 0};
    }
  } else {
    std::vector<Eigen::VectorXd> cols(static_cast<std::size_t>(q));
    std::vector<const Eigen::VectorXd*> series;
    series.push_back(&sample.y);
    for (int r = 0; r < q; ++r) {
      cols[static_cast<std::size_t>(r)] = sample.x.col(r);
      series.push_back(&cols[static_cast<std::size_t>(r)]);
    }
    chosen = loocv_bandwidths(sample.u, series, options.grid, guard, options.shared_bandwidth,
                              options.grid_points);
    if (explicit_y) chosen[0] = {*options.bandwidth_y, 0.0, chosen[0].admissible_range, 0};
    if (explicit_x)
      for (int r = 0; r < q; ++r)
        chosen[static_cast<std::size_t>(r) + 1] = {options.bandwidth_x[static_cast<std::size_t>(r)], 0.0,
                                                   chosen[static_cast<std::size_t>(r) + 1].admissible_range, 0};
  }
  fit.bandwidths = chosen;

  fit.psi_hat = detail::ratio_at_points(sample.u, sample.y, chosen[0].h, fit.ybar_tilde, guard,
                                        fit.n_clamped);
  fit.phi_hat.resize(q, n);
  for (int r = 0; r < q; ++r) {
    const Eigen::VectorXd col = sample.x.col(r);
    fit.phi_hat.row(r) = detail::ratio_at_points(sample.u, col, chosen[static_cast<std::size_t>(r) + 1].h,
                                                 fit.xbar_tilde[r], guard, fit.n_clamped)
                             .transpose();
  }
  return fit;
}

//! Observations after dividing out the estimated distortions.
struct RestoredSample {
  Eigen::VectorXd u;
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
  DistortionFit fit;

  int n() const { return static_cast<int>(u.size()); }
  int q() const { return static_cast<int>(x.cols()); }
};

inline RestoredSample restore_sample(const ObservedSample& sample, const DistortionFit& fit) {
  const int n = sample.n();
  const int q = sample.q();
  if (fit.psi_hat.size() != n || fit.phi_hat.cols() != n || fit.phi_hat.rows() != q)
    throw ValidationError("restore_sample: fit does not match the sample");
  RestoredSample restored;
  restored.u = sample.u;
  restored.y = sample.y.array() / fit.psi_hat.array();
  restored.x.resize(n, q);
  for (int r = 0; r < q; ++r)
    restored.x.col(r) = sample.x.col(r).array() / fit.phi_hat.row(r).transpose().array();
  restored.fit = fit;
  return restored;
}

//! Distortion estimates on an even grid over the observed confounder range,
//! for plotting.
struct DistortionCurve {
  Eigen::VectorXd u;
  Eigen::VectorXd psi;
  Eigen::MatrixXd phi;  // q x points
};

inline DistortionCurve distortion_curve(const ObservedSample& sample, const DistortionFit& fit,
                                        int points = 101) {
  if (points < 2) throw ValidationError("distortion_curve: need at least 2 grid points");
  const int q = sample.q();
  DistortionCurve curve;
  curve.u.resize(points);
  curve.psi.resize(points);
  curve.phi.resize(q, points);
  const double lo = sample.u.minCoeff();
  const double hi = sample.u.maxCoeff();
  for (int i = 0; i < points; ++i)
    curve.u[i] = lo + (hi - lo) * static_cast<double>(i) / (points - 1);
  auto eval = [&](const Eigen::VectorXd& vs, double h, double mean, double u) {
    const NwEstimate est = nw_components(u, sample.u, vs, h);
    double den = est.phat;
    if (std::abs(den) < fit.guard) den = (den < 0.0 ? -fit.guard : fit.guard);
    double value = (est.ghat / den) / mean;
    if (std::abs(value) < fit.guard) value = (value < 0.0 ? -fit.guard : fit.guard);
    return value;
  };
  for (int i = 0; i < points; ++i) {
    curve.psi[i] = eval(sample.y, fit.bandwidths[0].h, fit.ybar_tilde, curve.u[i]);
    for (int r = 0; r < q; ++r) {
      const Eigen::VectorXd col = sample.x.col(r);
      curve.phi(r, i) =
          eval(col, fit.bandwidths[static_cast<std::size_t>(r) + 1].h, fit.xbar_tilde[r], curve.u[i]);
    }
  }
  return curve;
}

}  // namespace canreg
