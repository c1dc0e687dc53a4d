#pragma once

#include <Eigen/Core>
#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "canreg/errors.hpp"

namespace canreg {

//! A regression function f(x, beta) with analytic derivatives.
//!
//! `dbeta` and `dx` are the exact first derivatives in the parameters and in
//! the predictors; `d2_beta_x` holds the p x q cross derivatives, required of
//! the built-ins (validation and the score-expansion oracle use them) and
//! optional for user-supplied models. Instances are immutable after
//! construction and safe to share across threads.
struct ModelSpec {
  std::string id;
  int p = 0;  // parameter dimension
  int q = 0;  // predictor dimension

  std::function<double(const Eigen::VectorXd&, const Eigen::VectorXd&)> eval;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&, const Eigen::VectorXd&)> dbeta;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&, const Eigen::VectorXd&)> dx;
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&, const Eigen::VectorXd&)> d2_beta_x;

  // Closed parameter intervals; empty means unbounded. The solver clips
  // steps to these when present.
  Eigen::VectorXd beta_lower, beta_upper;

  // Box in predictor space on which derivatives are bounded; used to place
  // validation probes. Empty means unrestricted.
  Eigen::VectorXd x_lower, x_upper;

  std::vector<std::string> param_names;

  bool has_cross() const { return static_cast<bool>(d2_beta_x); }
  bool has_bounds() const { return beta_lower.size() == p && beta_upper.size() == p; }
};

namespace detail {

inline std::vector<std::string> numbered_names(const char* stem, int first, int count) {
  std::vector<std::string> names;
  names.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) names.push_back(stem + std::to_string(first + i));
  return names;
}

}  // namespace detail

//! Builds one of the built-in model families.
//!
//! ids: "linear" (q predictors, intercept beta0 with the x0 = 1 convention),
//! "expsat" (saturating exponential), "power" (shifted power law, x > -1),
//! "mdrd-exp" (quadratic-exponent decay with offset).
inline ModelSpec builtin_model(const std::string& id, int q = 1) {
  ModelSpec m;
  m.id = id;
  if (id == "linear") {
    if (q < 1) throw ValidationError("builtin_model: linear needs q >= 1");
    m.p = q + 1;
    m.q = q;
    m.param_names = detail::numbered_names("beta", 0, m.p);
    m.eval = [q](const Eigen::VectorXd& x, const Eigen::VectorXd& b) {
      double v = b[0];
      for (int l = 0; l < q; ++l) v += b[l + 1] * x[l];
      return v;
    };
    m.dbeta = [q](const Eigen::VectorXd& x, const Eigen::VectorXd&) {
      Eigen::VectorXd g(q + 1);
      g[0] = 1.0;
      g.tail(q) = x;
      return g;
    };
    m.dx = [q](const Eigen::VectorXd&, const Eigen::VectorXd& b) {
      return Eigen::VectorXd(b.tail(q));
    };
    m.d2_beta_x = [q](const Eigen::VectorXd&, const Eigen::VectorXd&) {
      Eigen::MatrixXd c = Eigen::MatrixXd::Zero(q + 1, q);
      for (int l = 0; l < q; ++l) c(l + 1, l) = 1.0;
      return c;
    };
    return m;
  }
  if (q != 1) throw ValidationError("builtin_model: '" + id + "' is a single-predictor model");
  if (id == "expsat") {
    m.p = 2;
    m.q = 1;
    m.param_names = detail::numbered_names("beta", 1, 2);
    m.eval = [](const Eigen::VectorXd& x, const Eigen::VectorXd& b) {
      return b[0] * (1.0 - std::exp(-b[1] * x[0]));
    };
    m.dbeta = [](const Eigen::VectorXd& x, const Eigen::VectorXd& b) {
      const double e = std::exp(-b[1] * x[0]);
      return Eigen::Vector2d(1.0 - e, b[0] * x[0] * e);
    };
    m.dx = [](const Eigen::VectorXd& x, const Eigen::VectorXd& b) {
      Eigen::VectorXd g(1);
      g[0] = b[0] * b[1] * std::exp(-b[1] * x[0]);
      return g;
    };
    m.d2_beta_x = [](const Eigen::VectorXd& x, const Eigen::VectorXd& b) {
      const double e = std::exp(-b[1] * x[0]);
      Eigen::MatrixXd c(2, 1);
      c(0, 0) = b[1] * e;
      c(1, 0) = b[0] * e * (1.0 - b[1] * x[0]);
      return c;
    };
    return m;
  }
  if (id == "power") {
    m.p = 2;
    m.q = 1;
    m.param_names = detail::numbered_names("beta", 1, 2);
    m.x_lower = Eigen::VectorXd::Constant(1, -1.0);  // pole at x = -1
    m.x_upper = Eigen::VectorXd::Constant(1, std::numeric_limits<double>::infinity());
    m.eval = [](const Eigen::VectorXd& x, const Eigen::VectorXd& b) {
      return b[0] * std::pow(1.0 + x[0], b[1]);
    };
    m.dbeta = [](const Eigen::VectorXd& x, const Eigen::VectorXd& b) {
      const double base = 1.0 + x[0];
      const double pw = std::pow(base, b[1]);
      return Eigen::Vector2d(pw, b[0] * pw * std::log(base));
    };
    m.dx = [](const Eigen::VectorXd& x, const Eigen::VectorXd& b) {
      Eigen::VectorXd g(1);
      g[0] = b[0] * b[1] * std::pow(1.0 + x[0], b[1] - 1.0);
      return g;
    };
    m.d2_beta_x = [](const Eigen::VectorXd& x, const Eigen::VectorXd& b) {
      const double base = 1.0 + x[0];
      const double pw1 = std::pow(base, b[1] - 1.0);
      Eigen::MatrixXd c(2, 1);
      c(0, 0) = b[1] * pw1;
      c(1, 0) = b[0] * pw1 * (1.0 + b[1] * std::log(base));
      return c;
    };
    return m;
  }
  if (id == "mdrd-exp") {
    m.p = 4;
    m.q = 1;
    m.param_names = detail::numbered_names("beta", 1, 4);
    m.eval = [](const Eigen::VectorXd& x, const Eigen::VectorXd& b) {
      return b[0] * std::exp(-b[1] * x[0] - b[2] * x[0] * x[0]) + b[3];
    };
    m.dbeta = [](const Eigen::VectorXd& x, const Eigen::VectorXd& b) {
      const double t = x[0];
      const double e = std::exp(-b[1] * t - b[2] * t * t);
      Eigen::VectorXd g(4);
      g[0] = e;
      g[1] = -b[0] * t * e;
      g[2] = -b[0] * t * t * e;
      g[3] = 1.0;
      return g;
    };
    m.dx = [](const Eigen::VectorXd& x, const Eigen::VectorXd& b) {
      const double t = x[0];
      const double e = std::exp(-b[1] * t - b[2] * t * t);
      Eigen::VectorXd g(1);
      g[0] = b[0] * e * (-b[1] - 2.0 * b[2] * t);
      return g;
    };
    m.d2_beta_x = [](const Eigen::VectorXd& x, const Eigen::VectorXd& b) {
      const double t = x[0];
      const double e = std::exp(-b[1] * t - b[2] * t * t);
      Eigen::MatrixXd c(4, 1);
      c(0, 0) = e * (-b[1] - 2.0 * b[2] * t);
      c(1, 0) = b[0] * e * (b[1] * t + 2.0 * b[2] * t * t - 1.0);
      c(2, 0) = b[0] * e * (b[1] * t * t + 2.0 * b[2] * t * t * t - 2.0 * t);
      c(3, 0) = 0.0;
      return c;
    };
    return m;
  }
  throw ValidationError("builtin_model: unknown model id '" + id + "'");
}

struct DerivativeProbe {
  Eigen::VectorXd x;
  Eigen::VectorXd beta;
};

struct DerivativeReport {
  struct Row {
    double max_rel_dbeta = 0.0;
    double max_rel_dx = 0.0;
    double max_rel_cross = 0.0;
    bool finite = true;
  };
  std::vector<Row> rows;
  double tol = 0.0;
  bool pass = false;
};

namespace detail {

inline double rel_gap(double analytic, double numeric) {
  return std::abs(analytic - numeric) / (1.0 + std::abs(analytic));
}

}  // namespace detail

//! Compares analytic derivatives against central finite differences at the
//! given probes. A probe whose evaluations go non-finite is marked and fails
//! the report; this is how leaving the model's domain box shows up.
inline DerivativeReport check_derivatives(const ModelSpec& model,
                                          const std::vector<DerivativeProbe>& probes,
                                          double tol = 1e-6) {
  DerivativeReport report;
  report.tol = tol;
  report.pass = true;
  const double step = 5e-6;
  for (const auto& probe : probes) {
    DerivativeReport::Row row;
    const Eigen::VectorXd gb = model.dbeta(probe.x, probe.beta);
    const Eigen::VectorXd gx = model.dx(probe.x, probe.beta);
    bool finite = gb.allFinite() && gx.allFinite() && std::isfinite(model.eval(probe.x, probe.beta));
    for (int k = 0; k < model.p && finite; ++k) {
      Eigen::VectorXd bp = probe.beta, bm = probe.beta;
      const double d = step * (1.0 + std::abs(probe.beta[k]));
      bp[k] += d;
      bm[k] -= d;
      const double fd = (model.eval(probe.x, bp) - model.eval(probe.x, bm)) / (2.0 * d);
      finite = std::isfinite(fd);
      row.max_rel_dbeta = std::max(row.max_rel_dbeta, detail::rel_gap(gb[k], fd));
    }
    for (int l = 0; l < model.q && finite; ++l) {
      Eigen::VectorXd xp = probe.x, xm = probe.x;
      const double d = step * (1.0 + std::abs(probe.x[l]));
      xp[l] += d;
      xm[l] -= d;
      const double fd = (model.eval(xp, probe.beta) - model.eval(xm, probe.beta)) / (2.0 * d);
      finite = std::isfinite(fd);
      row.max_rel_dx = std::max(row.max_rel_dx, detail::rel_gap(gx[l], fd));
      if (model.has_cross() && finite) {
        const Eigen::VectorXd cp = model.dbeta(xp, probe.beta);
        const Eigen::VectorXd cm = model.dbeta(xm, probe.beta);
        finite = cp.allFinite() && cm.allFinite();
        const Eigen::MatrixXd cross = model.d2_beta_x(probe.x, probe.beta);
        for (int k = 0; k < model.p && finite; ++k) {
          const double fd2 = (cp[k] - cm[k]) / (2.0 * d);
          finite = std::isfinite(fd2);
          row.max_rel_cross = std::max(row.max_rel_cross, detail::rel_gap(cross(k, l), fd2));
        }
      }
    }
    row.finite = finite;
    if (!finite || row.max_rel_dbeta > tol || row.max_rel_dx > tol || row.max_rel_cross > tol)
      report.pass = false;
    report.rows.push_back(row);
  }
  return report;
}

}  // namespace canreg
