#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <cmath>
#include <limits>

#include "canreg/errors.hpp"
#include "canreg/model.hpp"
#include "canreg/nls.hpp"
#include "canreg/restore.hpp"
#include "canreg/special.hpp"

namespace canreg {

//! Outcome of the empirical likelihood inner problem at one parameter value.
//!
//! `infeasible` means zero is not in the interior of the convex hull of the
//! score rows: the weight problem has an empty feasible set, the ratio is
//! +infinity and the parameter is definitively excluded from any region.
struct ELResult {
  Eigen::VectorXd lambda;
  double lratio = 0.0;
  bool converged = false;
  bool infeasible = false;
  int inner_iterations = 0;
  Eigen::VectorXd weights;  // implied p_i = 1 / (n (1 + lambda' g_i))
};

namespace detail {

inline ELResult infeasible_result(int p) {
  ELResult r;
  r.lambda = Eigen::VectorXd::Zero(p);
  r.lratio = std::numeric_limits<double>::infinity();
  r.infeasible = true;
  return r;
}

}  // namespace detail

//! Solves for the multiplier of the empirical likelihood ratio given score
//! rows g_i (n x p).
//!
//! lambda maximizes the concave dual D(lambda) = sum log(1 + lambda' g_i)
//! over the open set where every 1 + lambda' g_i > 1/n (so that the implied
//! weights lie in (0, 1)). Newton steps with halving line search; converged
//! when ||grad D|| <= 1e-10 * n. An unbounded dual is reported as
//! `infeasible` rather than thrown: it is the analytic signal that the ratio
//! is +infinity.
inline ELResult el_lambda(const Eigen::MatrixXd& scores) {
  const int n = static_cast<int>(scores.rows());
  const int p = static_cast<int>(scores.cols());
  if (n <= p) throw ValidationError("el_lambda: need n > p");
  if (!scores.allFinite()) throw ValidationError("el_lambda: non-finite scores");

  const double score_scale = scores.rowwise().norm().maxCoeff();
  if (score_scale == 0.0) {
    // All rows zero: every weight vector satisfies the constraint.
    ELResult r;
    r.lambda = Eigen::VectorXd::Zero(p);
    r.converged = true;
    r.weights = Eigen::VectorXd::Constant(n, 1.0 / n);
    return r;
  }

  const Eigen::VectorXd mean = scores.colwise().mean();
  if (p == 1) {
    const double lo = scores.minCoeff(), hi = scores.maxCoeff();
    if (lo >= 0.0 || hi <= 0.0)
      if (mean.norm() > 0.0) return detail::infeasible_result(p);
  }
  if (mean.norm() > 0.0) {
    // If no score has a negative component along the mean direction, the
    // dual grows without bound along it.
    if ((scores * mean).minCoeff() >= 0.0) return detail::infeasible_result(p);
  }

  const double floor = 1.0 / n;
  const double grad_tol = 1e-10 * n;
  const double lratio_cap = 1e6;

  Eigen::VectorXd lambda = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd z = Eigen::VectorXd::Ones(n);  // 1 + lambda' g_i
  double dual = 0.0;
  ELResult result;
  for (int it = 1; it <= 100; ++it) {
    result.inner_iterations = it;
    const Eigen::VectorXd grad = scores.transpose() * z.cwiseInverse();
    if (grad.norm() <= grad_tol) {
      result.converged = true;
      break;
    }
    Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(p, p);
    for (int i = 0; i < n; ++i) {
      const Eigen::VectorXd gi = scores.row(i);
      hess.noalias() += gi * gi.transpose() / (z[i] * z[i]);
    }
    hess.diagonal().array() += 1e-12 * hess.diagonal().maxCoeff();
    const Eigen::VectorXd direction = hess.ldlt().solve(grad);

    double t = 1.0;
    bool moved = false;
    const Eigen::VectorXd dz = scores * direction;
    for (int halving = 0; halving < 60; ++halving, t *= 0.5) {
      const Eigen::VectorXd z_new = z + t * dz;
      if (z_new.minCoeff() <= floor) continue;
      const double dual_new = z_new.array().log().sum();
      if (dual_new >= dual) {
        lambda += t * direction;
        z = z_new;
        dual = dual_new;
        moved = true;
        break;
      }
    }
    if (2.0 * dual > lratio_cap || lambda.norm() * score_scale > 1e12)
      return detail::infeasible_result(p);
    if (!moved) break;
  }
  result.lambda = lambda;
  result.lratio = 2.0 * dual;
  result.weights = (z.array() * n).inverse();
  if (!result.converged && 2.0 * dual > lratio_cap) return detail::infeasible_result(p);
  return result;
}

//! Plug-in empirical log-likelihood ratio at beta, on restored data.
inline ELResult el_ratio(const ModelSpec& model, const RestoredSample& restored,
                         const Eigen::VectorXd& beta) {
  ELResult r = el_lambda(score_vectors(model, restored, beta));
  if (r.infeasible) r.converged = true;  // definitive exclusion, not a failure
  return r;
}

//! Two-coordinate slice of the ratio surface around `center`: the selected
//! pair sweeps the grid while every other coordinate stays fixed at the
//! center (a slice, not a profile).
struct RegionGrid {
  int k1 = 0, k2 = 0;
  Eigen::VectorXd grid1, grid2;
  Eigen::MatrixXd lratio;            // grid1.size() x grid2.size()
  Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic> inside;
  Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic> failed;
  double level = 0.0;                // chi-square quantile used for `inside`
};

inline RegionGrid el_region_slice(const ModelSpec& model, const RestoredSample& restored,
                                  const Eigen::VectorXd& center, std::pair<int, int> pair,
                                  std::pair<double, double> extent1,
                                  std::pair<double, double> extent2, std::pair<int, int> resolution,
                                  double alpha) {
  if (model.p < 2) throw ValidationError("el_region_slice: need p >= 2");
  const auto [k1, k2] = pair;
  if (k1 < 0 || k2 < 0 || k1 >= model.p || k2 >= model.p || k1 == k2)
    throw ValidationError("el_region_slice: bad coordinate pair");
  const auto [n1, n2] = resolution;
  if (n1 < 2 || n2 < 2) throw ValidationError("el_region_slice: resolution must be >= 2");

  RegionGrid grid;
  grid.k1 = k1;
  grid.k2 = k2;
  grid.level = chi2_quantile(model.p, alpha);
  grid.grid1.setLinSpaced(n1, extent1.first, extent1.second);
  grid.grid2.setLinSpaced(n2, extent2.first, extent2.second);
  grid.lratio.resize(n1, n2);
  grid.inside.setZero(n1, n2);
  grid.failed.setZero(n1, n2);
  Eigen::VectorXd beta = center;
  for (int i = 0; i < n1; ++i) {
    for (int j = 0; j < n2; ++j) {
      beta = center;
      beta[k1] = grid.grid1[i];
      beta[k2] = grid.grid2[j];
      try {
        const ELResult r = el_ratio(model, restored, beta);
        grid.lratio(i, j) = r.lratio;
        grid.inside(i, j) = r.lratio <= grid.level ? 1 : 0;
      } catch (const NumericalError&) {
        grid.lratio(i, j) = std::numeric_limits<double>::quiet_NaN();
        grid.failed(i, j) = 1;
      }
    }
  }
  return grid;
}

}  // namespace canreg
