#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/LU>
#include <cmath>

#include "canreg/errors.hpp"
#include "canreg/model.hpp"
#include "canreg/nls.hpp"
#include "canreg/restore.hpp"
#include "canreg/special.hpp"

namespace canreg {

//! Plug-in components of the limiting covariance of the scaled estimation
//! error, assembled as sigma = sigma2 * L^-1 + A + B + C with
//! A = (1/4) L^-1 Omega L^-1, B = L^-1 Gamma L^-1 and
//! C = sigma2 * L^-1 (eta zeta' + zeta eta')/2 L^-1.
struct SigmaHat {
  Eigen::MatrixXd lambda_mat;  // second moments of the parameter gradient
  Eigen::VectorXd zeta;        // mean parameter gradient
  Eigen::VectorXd eta;         // response-weighted mean gradient over mean response
  Eigen::MatrixXd omega;       // second moments of the sampling-correction vectors
  Eigen::MatrixXd gamma_mat;   // second moments of the distortion-residual vectors
  double sigma2 = 0.0;
  Eigen::MatrixXd sigma;       // assembled and symmetrized
};

//! Plug-in covariance at the fitted parameters. Every population expectation
//! becomes a sample average over the restored data; the unobservable
//! distortion differences are replaced by (observed - restored) values.
inline SigmaHat sigma_hat(const ModelSpec& model, const RestoredSample& restored,
                          const ObservedSample& observed, const FitResult& fit) {
  if (!fit.converged) throw ValidationError("sigma_hat: fit did not converge");
  const int n = restored.n();
  const int q = restored.q();
  const int p = model.p;
  if (observed.n() != n || observed.q() != q)
    throw ValidationError("sigma_hat: observed and restored samples disagree");
  const Eigen::VectorXd& beta = fit.beta_hat;

  Eigen::MatrixXd grad_beta(n, p);  // f_beta at each restored x
  Eigen::MatrixXd grad_x(n, q);
  for (int i = 0; i < n; ++i) {
    const Eigen::VectorXd xi = restored.x.row(i);
    grad_beta.row(i) = model.dbeta(xi, beta).transpose();
    grad_x.row(i) = model.dx(xi, beta).transpose();
  }
  if (!grad_beta.allFinite() || !grad_x.allFinite())
    throw NumericalError("sigma_hat: model derivatives non-finite on restored data");

  SigmaHat s;
  s.lambda_mat = grad_beta.transpose() * grad_beta / n;
  s.zeta = grad_beta.colwise().mean();

  const double ybar = restored.y.mean();
  if (ybar == 0.0) throw NumericalError("sigma_hat: restored response mean is zero");
  s.eta = (grad_beta.transpose() * restored.y / n) / ybar;

  const Eigen::VectorXd xbar = restored.x.colwise().mean();
  Eigen::MatrixXd slope(q, p);  // E[X_l f_xl f_bk] / E[X_l], plug-in
  for (int l = 0; l < q; ++l) {
    if (xbar[l] == 0.0) throw NumericalError("sigma_hat: restored predictor mean is zero");
    const Eigen::VectorXd weighted = restored.x.col(l).cwiseProduct(grad_x.col(l));
    slope.row(l) = (grad_beta.transpose() * weighted / n).transpose() / xbar[l];
  }

  Eigen::MatrixXd omega_rows = (restored.y.array() - ybar).matrix() * s.eta.transpose();
  Eigen::MatrixXd gamma_rows = (observed.y - restored.y) * s.eta.transpose();
  for (int l = 0; l < q; ++l) {
    omega_rows.noalias() -= (restored.x.col(l).array() - xbar[l]).matrix() * slope.row(l);
    gamma_rows.noalias() -= (observed.x.col(l) - restored.x.col(l)) * slope.row(l);
  }
  s.omega = omega_rows.transpose() * omega_rows / n;
  s.gamma_mat = gamma_rows.transpose() * gamma_rows / n;
  s.sigma2 = fit.sigma2_hat;

  Eigen::LDLT<Eigen::MatrixXd> ldlt(s.lambda_mat);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
      ldlt.vectorD().minCoeff() <= 1e-14 * ldlt.vectorD().maxCoeff())
    throw NumericalError("sigma_hat: gradient moment matrix is singular");
  const Eigen::MatrixXd lambda_inv = ldlt.solve(Eigen::MatrixXd::Identity(p, p));

  const Eigen::MatrixXd a_term = 0.25 * lambda_inv * s.omega * lambda_inv;
  const Eigen::MatrixXd b_term = lambda_inv * s.gamma_mat * lambda_inv;
  const Eigen::MatrixXd cross = 0.5 * (s.eta * s.zeta.transpose() + s.zeta * s.eta.transpose());
  const Eigen::MatrixXd c_term = s.sigma2 * lambda_inv * cross * lambda_inv;
  Eigen::MatrixXd sigma = s.sigma2 * lambda_inv + a_term + b_term + c_term;
  s.sigma = 0.5 * (sigma + sigma.transpose());
  return s;
}

struct WaldTest {
  double statistic = 0.0;
  double threshold = 0.0;
  bool inside = false;
};

//! Ellipsoidal region check: n (beta_hat - beta)' sigma^-1 (beta_hat - beta)
//! against the chi-square quantile at level alpha.
inline WaldTest wald_region(const FitResult& fit, const SigmaHat& sigma, const Eigen::VectorXd& beta,
                            double alpha) {
  const int p = static_cast<int>(fit.beta_hat.size());
  if (beta.size() != p) throw ValidationError("wald_region: beta has wrong dimension");
  const int n = static_cast<int>(fit.scores.rows());
  Eigen::FullPivLU<Eigen::MatrixXd> lu(sigma.sigma);
  if (!lu.isInvertible()) throw NumericalError("wald_region: covariance is singular");
  const Eigen::VectorXd diff = fit.beta_hat - beta;
  WaldTest t;
  t.statistic = n * diff.dot(lu.solve(diff));
  t.threshold = chi2_quantile(p, alpha);
  t.inside = t.statistic <= t.threshold;
  return t;
}

}  // namespace canreg
