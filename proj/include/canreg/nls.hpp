#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <cmath>
#include <vector>

#include "canreg/errors.hpp"
#include "canreg/model.hpp"
#include "canreg/restore.hpp"

namespace canreg {

struct FitConfig {
  Eigen::VectorXd init;
  int max_iter = 200;
  double tol_step = 1e-10;   // relative step size
  double tol_grad = 1e-8;    // tolerance on ||(1/n) * score sum||
  double damping = 1e-3;     // initial Levenberg damping
};

struct FitResult {
  Eigen::VectorXd beta_hat;
  bool converged = false;
  int iterations = 0;
  double rss = 0.0;
  double sigma2_hat = 0.0;        // rss / (n - p)
  double grad_norm = 0.0;         // ||(1/n) * column sums of scores||
  Eigen::MatrixXd scores;         // n x p, row i = residual_i * dbeta(x_i)
  std::vector<double> rss_trace;  // rss after each accepted step, for monitoring
};

//! Per-observation score rows at beta: (y_i - f(x_i, beta)) * dbeta(x_i, beta).
//! Column sums are the estimating equations whose root is the least squares
//! estimate.
inline Eigen::MatrixXd score_vectors(const ModelSpec& model, const Eigen::MatrixXd& x,
                                     const Eigen::VectorXd& y, const Eigen::VectorXd& beta) {
  const int n = static_cast<int>(y.size());
  if (x.rows() != n) throw ValidationError("score_vectors: x and y lengths disagree");
  if (x.cols() != model.q || beta.size() != model.p)
    throw ValidationError("score_vectors: dimensions do not match the model");
  Eigen::MatrixXd scores(n, model.p);
  for (int i = 0; i < n; ++i) {
    const Eigen::VectorXd xi = x.row(i);
    const double fi = model.eval(xi, beta);
    const Eigen::VectorXd gi = model.dbeta(xi, beta);
    if (!std::isfinite(fi) || !gi.allFinite())
      throw NumericalError("score_vectors: model evaluation left its domain");
    scores.row(i) = (y[i] - fi) * gi.transpose();
  }
  return scores;
}

inline Eigen::MatrixXd score_vectors(const ModelSpec& model, const RestoredSample& restored,
                                     const Eigen::VectorXd& beta) {
  return score_vectors(model, restored.x, restored.y, beta);
}

namespace detail {

inline Eigen::VectorXd clip_to_bounds(const ModelSpec& model, Eigen::VectorXd beta) {
  if (!model.has_bounds()) return beta;
  for (int k = 0; k < model.p; ++k)
    beta[k] = std::min(std::max(beta[k], model.beta_lower[k]), model.beta_upper[k]);
  return beta;
}

struct Evaluated {
  Eigen::VectorXd residual;
  Eigen::MatrixXd jacobian;  // n x p, d f / d beta
  double rss = 0.0;
  bool finite = true;
};

inline Evaluated evaluate(const ModelSpec& model, const Eigen::MatrixXd& x,
                          const Eigen::VectorXd& y, const Eigen::VectorXd& beta) {
  const int n = static_cast<int>(y.size());
  Evaluated ev;
  ev.residual.resize(n);
  ev.jacobian.resize(n, model.p);
  for (int i = 0; i < n; ++i) {
    const Eigen::VectorXd xi = x.row(i);
    const double fi = model.eval(xi, beta);
    const Eigen::VectorXd gi = model.dbeta(xi, beta);
    if (!std::isfinite(fi) || !gi.allFinite()) {
      ev.finite = false;
      return ev;
    }
    ev.residual[i] = y[i] - fi;
    ev.jacobian.row(i) = gi.transpose();
  }
  ev.rss = ev.residual.squaredNorm();
  return ev;
}

}  // namespace detail

//! Levenberg-damped Gauss-Newton for the least squares fit on restored data.
//!
//! The gradient stationarity tested at exit is exactly the root condition of
//! the estimating equations, so `converged` guarantees grad_norm <= tol_grad.
//! A run that stalls (tiny steps, budget exhausted) returns the best iterate
//! with converged = false rather than throwing.
inline FitResult fit(const ModelSpec& model, const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                     const FitConfig& config) {
  const int n = static_cast<int>(y.size());
  const int p = model.p;
  if (config.init.size() != p) throw ValidationError("fit: init has wrong dimension");
  if (n <= p) throw NumericalError("fit: need more observations than parameters");
  if (config.max_iter < 1 || !(config.tol_step > 0.0) || !(config.tol_grad > 0.0))
    throw ValidationError("fit: bad configuration");

  Eigen::VectorXd beta = detail::clip_to_bounds(model, config.init);
  detail::Evaluated cur = detail::evaluate(model, x, y, beta);
  if (!cur.finite) throw NumericalError("fit: model evaluation failed at the starting value");

  FitResult result;
  result.rss_trace.push_back(cur.rss);
  double mu = config.damping;
  bool converged = false;
  bool stalled = false;
  int iter = 0;
  for (; iter < config.max_iter && !converged && !stalled; ++iter) {
    const Eigen::VectorXd grad = cur.jacobian.transpose() * cur.residual;  // score sums
    if (grad.norm() / n <= config.tol_grad) {
      converged = true;
      break;
    }
    Eigen::MatrixXd jtj = cur.jacobian.transpose() * cur.jacobian;
    Eigen::VectorXd diag = jtj.diagonal();
    const double diag_floor = 1e-12 * std::max(diag.maxCoeff(), 1e-300);
    for (int k = 0; k < p; ++k) diag[k] = std::max(diag[k], diag_floor);

    bool accepted = false;
    for (int tries = 0; tries < 60; ++tries) {
      Eigen::MatrixXd damped = jtj;
      damped.diagonal() += mu * diag;
      const Eigen::VectorXd delta = damped.ldlt().solve(grad);
      const Eigen::VectorXd candidate = detail::clip_to_bounds(model, beta + delta);
      const detail::Evaluated next = detail::evaluate(model, x, y, candidate);
      if (next.finite && next.rss < cur.rss) {
        const double step_rel = (candidate - beta).norm() / (1.0 + beta.norm());
        beta = candidate;
        cur = next;
        result.rss_trace.push_back(cur.rss);
        mu = std::max(mu * 0.5, 1e-15);
        accepted = true;
        if (step_rel <= config.tol_step) stalled = true;
        break;
      }
      mu = std::min(mu * 4.0, 1e15);
    }
    if (!accepted) {
      // rss improvements have dropped below its rounding floor; polish with
      // an (almost) undamped step accepted on strict gradient decrease, which
      // still contracts near the solution
      Eigen::MatrixXd damped = jtj;
      damped.diagonal() += 1e-12 * diag;
      const Eigen::VectorXd delta = damped.ldlt().solve(grad);
      const Eigen::VectorXd candidate = detail::clip_to_bounds(model, beta + delta);
      const detail::Evaluated next = detail::evaluate(model, x, y, candidate);
      if (next.finite && next.rss <= cur.rss * (1.0 + 1e-9)) {
        const Eigen::VectorXd grad_next = next.jacobian.transpose() * next.residual;
        if (grad_next.norm() <= 0.9 * grad.norm()) {
          beta = candidate;
          cur = next;
          continue;
        }
      }
      stalled = true;
    }
  }

  const Eigen::VectorXd grad = cur.jacobian.transpose() * cur.residual;
  result.beta_hat = beta;
  result.iterations = iter;
  result.rss = cur.rss;
  result.grad_norm = grad.norm() / n;
  result.converged = result.grad_norm <= config.tol_grad;
  result.sigma2_hat = cur.rss / (n - p);
  result.scores = cur.jacobian.array().colwise() * cur.residual.array();
  return result;
}

inline FitResult fit(const ModelSpec& model, const RestoredSample& restored,
                     const FitConfig& config) {
  return fit(model, restored.x, restored.y, config);
}

//! Runs `fit` from the configured start plus the given extra starts and keeps
//! the best converged result (lowest rss); falls back to the overall best.
inline FitResult fit_multi(const ModelSpec& model, const Eigen::MatrixXd& x,
                           const Eigen::VectorXd& y, const FitConfig& config,
                           const std::vector<Eigen::VectorXd>& extra_starts) {
  FitResult best = fit(model, x, y, config);
  for (const auto& start : extra_starts) {
    FitConfig c = config;
    c.init = start;
    FitResult candidate;
    try {
      candidate = fit(model, x, y, c);
    } catch (const NumericalError&) {
      continue;
    }
    const bool better = (candidate.converged && !best.converged) ||
                        (candidate.converged == best.converged && candidate.rss < best.rss);
    if (better) best = candidate;
  }
  return best;
}

}  // namespace canreg
