#pragma once

#include <Eigen/Core>

#include "canreg/errors.hpp"
#include "canreg/model.hpp"
#include "canreg/restore.hpp"

namespace canreg {

//! A simulated draw with everything the data-generating process knows:
//! latent predictors/response, the noise, the distortion values, and the
//! induced observed data.
struct LatentSample {
  Eigen::VectorXd u;
  Eigen::MatrixXd x;    // n x q latent predictors
  Eigen::VectorXd eps;
  Eigen::VectorXd y;    // f(x, beta0) + eps
  Eigen::VectorXd psi;  // response distortion at u
  Eigen::MatrixXd phi;  // n x q predictor distortions at u
  Eigen::MatrixXd xt;   // observed predictors, phi .* x
  Eigen::VectorXd yt;   // observed response, psi .* y

  int n() const { return static_cast<int>(u.size()); }
  int q() const { return static_cast<int>(x.cols()); }
  ObservedSample observed() const { return {u, xt, yt}; }
};

//! Population constants entering the first-order expansion of the estimating
//! equations: either exact (quadrature) or large-sample Monte Carlo moments.
struct PopulationMoments {
  double ey = 0.0;                // E[Y]
  Eigen::VectorXd ey_dbeta;       // E[Y f_bk], length p
  Eigen::VectorXd ex;             // E[X_l], length q
  Eigen::MatrixXd ex_dx_dbeta;    // E[X_l f_xl f_bk], q x p
};

//! The three additive pieces of the expansion, per observation, plus their
//! total. Simulation/testing use only: a real user never has the latent
//! values this needs.
struct ExpandedScores {
  Eigen::MatrixXd noise_term;       // eps_i * f_bk(x_i)
  Eigen::MatrixXd sampling_term;    // centered-moment correction, factor 1/2
  Eigen::MatrixXd distortion_term;  // observed-minus-latent correction
  Eigen::VectorXd total;            // column sums of the three terms
};

//! Evaluates the first-order representation of the estimating equations at
//! beta on a latent sample, with the population expectations supplied.
inline ExpandedScores expanded_scores(const ModelSpec& model, const LatentSample& latent,
                                      const Eigen::VectorXd& beta, const PopulationMoments& moments) {
  const int n = latent.n();
  const int q = latent.q();
  const int p = model.p;
  if (q != model.q || beta.size() != p) throw ValidationError("expanded_scores: dimension mismatch");
  if (moments.ey_dbeta.size() != p || moments.ex.size() != q || moments.ex_dx_dbeta.rows() != q ||
      moments.ex_dx_dbeta.cols() != p)
    throw ValidationError("expanded_scores: moments have wrong dimensions");
  if (latent.eps.size() != n || latent.y.size() != n || latent.yt.size() != n ||
      latent.x.rows() != n || latent.xt.rows() != n)
    throw ValidationError("expanded_scores: latent sample is incomplete");
  if (moments.ey == 0.0) throw ValidationError("expanded_scores: E[Y] must be nonzero");

  const Eigen::VectorXd response_coef = moments.ey_dbeta / moments.ey;  // length p
  Eigen::MatrixXd predictor_coef(q, p);
  for (int l = 0; l < q; ++l) {
    if (moments.ex[l] == 0.0) throw ValidationError("expanded_scores: E[X_l] must be nonzero");
    predictor_coef.row(l) = moments.ex_dx_dbeta.row(l) / moments.ex[l];
  }

  ExpandedScores out;
  out.noise_term.resize(n, p);
  out.sampling_term.resize(n, p);
  out.distortion_term.resize(n, p);
  for (int i = 0; i < n; ++i) {
    const Eigen::VectorXd xi = latent.x.row(i);
    out.noise_term.row(i) = latent.eps[i] * model.dbeta(xi, beta).transpose();
    Eigen::RowVectorXd centered = (latent.y[i] - moments.ey) * response_coef.transpose();
    Eigen::RowVectorXd distorted = (latent.yt[i] - latent.y[i]) * response_coef.transpose();
    for (int l = 0; l < q; ++l) {
      centered -= (latent.x(i, l) - moments.ex[l]) * predictor_coef.row(l);
      distorted -= (latent.xt(i, l) - latent.x(i, l)) * predictor_coef.row(l);
    }
    out.sampling_term.row(i) = 0.5 * centered;
    out.distortion_term.row(i) = distorted;
  }
  out.total = (out.noise_term + out.sampling_term + out.distortion_term).colwise().sum();
  return out;
}

}  // namespace canreg
