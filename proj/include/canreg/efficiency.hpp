#pragma once

#include <Eigen/Core>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "canreg/errors.hpp"

namespace canreg {

//! Population moments of a linear model with distortions, everything the
//! variance formulas need. Index 0 is the intercept with the x0 = 1
//! convention: exx(0,0) = 1, exx(0,k) = E[X_k].
//!
//! e_psi2 is stored redundantly as var_psi + 1 (the distortion has mean one).
//! var_phi does not enter the efficiency verdict (it cancels in the variance
//! difference) but the individual variances need it.
struct MomentSet {
  int q = 0;
  Eigen::VectorXd ex;        // E[X_k], length q
  Eigen::MatrixXd exx;       // (q+1) x (q+1) second moments with intercept
  double var_psi = 0.0;
  double e_psi2 = 1.0;       // = var_psi + 1
  Eigen::VectorXd e_psiphi;  // E[psi phi_k], length q
  Eigen::VectorXd var_phi;   // Var[phi_k], length q
  double sigma2 = 0.0;
  double ey = 0.0;           // = exx.col(0) . beta, stored for convenience
  Eigen::VectorXd beta;      // length q + 1
  std::string source;        // how the moments were obtained (analytic / monte-carlo)
};

inline MomentSet make_moment_set(const Eigen::VectorXd& ex, const Eigen::MatrixXd& exx,
                                 double var_psi, const Eigen::VectorXd& e_psiphi,
                                 const Eigen::VectorXd& var_phi, double sigma2,
                                 const Eigen::VectorXd& beta, std::string source) {
  const int q = static_cast<int>(ex.size());
  if (exx.rows() != q + 1 || exx.cols() != q + 1)
    throw ValidationError("make_moment_set: exx must be (q+1) x (q+1)");
  if (e_psiphi.size() != q || var_phi.size() != q || beta.size() != q + 1)
    throw ValidationError("make_moment_set: vector lengths disagree with q");
  if (std::abs(exx(0, 0) - 1.0) > 1e-10)
    throw ValidationError("make_moment_set: exx(0,0) must be 1 (intercept convention)");
  for (int k = 0; k < q; ++k)
    if (std::abs(exx(0, k + 1) - ex[k]) > 1e-10 * (1.0 + std::abs(ex[k])))
      throw ValidationError("make_moment_set: first row of exx must hold E[X_k]");
  if (!exx.isApprox(exx.transpose(), 1e-10)) throw ValidationError("make_moment_set: exx not symmetric");
  Eigen::LLT<Eigen::MatrixXd> llt(exx);
  if (llt.info() != Eigen::Success)
    throw ValidationError("make_moment_set: exx is not positive definite");
  if (var_psi < 0.0 || var_phi.minCoeff() < 0.0 || sigma2 < 0.0)
    throw ValidationError("make_moment_set: variances must be nonnegative");
  MomentSet m;
  m.q = q;
  m.ex = ex;
  m.exx = 0.5 * (exx + exx.transpose());
  m.var_psi = var_psi;
  m.e_psi2 = var_psi + 1.0;
  m.e_psiphi = e_psiphi;
  m.var_phi = var_phi;
  m.sigma2 = sigma2;
  m.beta = beta;
  m.ey = exx.col(0).dot(beta);
  m.source = std::move(source);
  return m;
}

inline MomentSet with_beta(MomentSet m, const Eigen::VectorXd& beta) {
  if (beta.size() != m.q + 1) throw ValidationError("with_beta: wrong dimension");
  m.beta = beta;
  m.ey = m.exx.col(0).dot(beta);
  return m;
}

namespace detail {

// Per-coordinate view with the intercept conventions phi_0 = 1, X_0 = 1.
struct CoordinateMoments {
  double mean = 0.0;      // E[X_k]
  double second = 0.0;    // E[X_k^2]
  double e_psiphi = 1.0;  // E[psi phi_k]
  double var_phi = 0.0;
};

inline CoordinateMoments coordinate_moments(const MomentSet& m, int k) {
  if (k < 0 || k > m.q) throw ValidationError("efficiency: coordinate index out of range");
  CoordinateMoments c;
  c.mean = m.exx(0, k);
  c.second = m.exx(k, k);
  c.e_psiphi = (k == 0) ? 1.0 : m.e_psiphi[k - 1];
  c.var_phi = (k == 0) ? 0.0 : m.var_phi[k - 1];
  if (c.mean == 0.0) throw ValidationError("efficiency: E[X_k] must be nonzero");
  return c;
}

inline Eigen::MatrixXd moment_inverse(const MomentSet& m) {
  Eigen::FullPivLU<Eigen::MatrixXd> lu(m.exx);
  if (!lu.isInvertible()) throw NumericalError("efficiency: moment matrix is singular");
  return lu.inverse();
}

}  // namespace detail

//! Asymptotic variance of the k-th coefficient under the direct
//! (restoration-based) estimator, expanded in the stored moments using the
//! independence of predictors, confounder and noise.
inline double variance_v1(const MomentSet& m, int k) {
  if (std::abs(m.ey) < 1e-10) throw NumericalError("variance_v1: E[Y] is numerically zero");
  const auto c = detail::coordinate_moments(m, k);
  const Eigen::MatrixXd inv = detail::moment_inverse(m);
  const double ey2 = m.beta.dot(m.exx * m.beta) + m.sigma2;      // E[Y^2]
  const double eyxk = m.exx.row(k).dot(m.beta);                  // E[Y X_k]
  const double my = m.ey, mk = c.mean;
  const double bk = m.beta[k];
  // E[(Y/EY - X_k/EX_k)^2]; centered and uncentered agree since both ratios
  // have mean one.
  const double spread = ey2 / (my * my) - 2.0 * eyxk / (my * mk) + c.second / (mk * mk);
  // E[((Yt-Y)/EY - (Xt_k-X_k)/EX_k)^2] expanded over the distortion moments.
  const double distortion = m.var_psi * ey2 / (my * my) -
                            2.0 * (c.e_psiphi - 1.0) * eyxk / (my * mk) +
                            c.var_phi * c.second / (mk * mk);
  double v = m.sigma2 * inv(k, k) + 0.25 * bk * bk * spread + bk * bk * distortion;
  if (k == 0) v += m.sigma2 * m.beta[0] / my;
  return v;
}

//! Asymptotic variance of the k-th coefficient under the transformation-based
//! estimator.
inline double variance_v2(const MomentSet& m, int k) {
  const auto c = detail::coordinate_moments(m, k);
  const Eigen::MatrixXd inv = detail::moment_inverse(m);
  const double var_diff = m.var_psi + c.var_phi - 2.0 * (c.e_psiphi - 1.0);  // Var[psi - phi_k]
  return m.sigma2 * inv(k, k) * (1.0 + m.var_psi) +
         m.beta[k] * m.beta[k] * (c.second / (c.mean * c.mean)) * var_diff;
}

//! The comparison matrix for coordinate k: beta' C_k beta equals
//! 4 (E[Y])^2 (v1_k - v2_k), so the direct estimator wins exactly when the
//! quadratic form is nonpositive. beta_k itself sits inside the matrix, so
//! this is a quadratic form only for the fixed beta supplied here.
inline Eigen::MatrixXd ck_matrix(const MomentSet& m, int k) {
  const auto c = detail::coordinate_moments(m, k);
  const Eigen::MatrixXd inv = detail::moment_inverse(m);
  const int d = m.q + 1;
  const Eigen::VectorXd col0 = m.exx.col(0);
  const Eigen::VectorXd colk = m.exx.col(k);
  Eigen::VectorXd ek = Eigen::VectorXd::Zero(d);
  ek[k] = 1.0;
  const double bk2 = m.beta[k] * m.beta[k];

  const double lead = (-3.0 - 4.0 * m.e_psi2 + 8.0 * c.e_psiphi) * (c.second / (c.mean * c.mean)) * bk2 -
                      4.0 * m.sigma2 * m.var_psi * inv(k, k);
  Eigen::MatrixXd ck = lead * col0 * col0.transpose();
  ck += m.sigma2 * (-3.0 + 4.0 * m.e_psi2) * ek * ek.transpose();
  if (k == 0)
    ck += 2.0 * m.sigma2 * (ek * colk.transpose() + colk * ek.transpose());
  ck += (3.0 - 4.0 * c.e_psiphi) * (bk2 / c.mean) * (colk * col0.transpose() + col0 * colk.transpose());
  ck += (-3.0 + 4.0 * m.e_psi2) * bk2 * m.exx;
  return 0.5 * (ck + ck.transpose());
}

enum class RegionLabel { R1, R2, R3, R4 };

inline const char* region_label_name(RegionLabel label) {
  switch (label) {
    case RegionLabel::R1: return "R1";
    case RegionLabel::R2: return "R2";
    case RegionLabel::R3: return "R3";
    default: return "R4";
  }
}

//! Per-coordinate efficiency comparison plus, for q = 1, the four-way region
//! label of the (beta0, beta1) point: R1 both coordinates favor the direct
//! estimator, R2 only k = 1 does, R3 only k = 0, R4 neither.
struct EfficiencyVerdict {
  struct PerCoordinate {
    double quad_form = 0.0;
    double v1 = 0.0;
    double v2 = 0.0;
    double lambda_min = 0.0;
    bool direct_better = false;
  };
  std::vector<PerCoordinate> per_k;
  std::optional<RegionLabel> label;  // q = 1 only
  std::string source;
};

inline EfficiencyVerdict efficiency_verdict(const MomentSet& m) {
  EfficiencyVerdict verdict;
  verdict.source = m.source;
  for (int k = 0; k <= m.q; ++k) {
    EfficiencyVerdict::PerCoordinate row;
    const Eigen::MatrixXd ck = ck_matrix(m, k);
    row.quad_form = m.beta.dot(ck * m.beta);
    row.v1 = variance_v1(m, k);
    row.v2 = variance_v2(m, k);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(ck);
    row.lambda_min = eig.eigenvalues().minCoeff();
    row.direct_better = row.quad_form <= 0.0;

    // The quadratic form and the direct variance comparison are two routes
    // to the same sign; disagreement beyond the boundary band is a bug.
    const double qf_scale = ck.norm() * m.beta.squaredNorm() + 1e-30;
    const double v_scale = std::abs(row.v1) + std::abs(row.v2) + 1e-30;
    const bool qf_boundary = std::abs(row.quad_form) <= 1e-8 * qf_scale;
    const bool v_boundary = std::abs(row.v1 - row.v2) <= 1e-8 * v_scale;
    if (!qf_boundary && !v_boundary && (row.quad_form < 0.0) != (row.v1 < row.v2))
      throw NumericalError("efficiency_verdict: quadratic-form and variance comparisons disagree");
    verdict.per_k.push_back(row);
  }
  if (m.q == 1) {
    const bool k0 = verdict.per_k[0].direct_better;
    const bool k1 = verdict.per_k[1].direct_better;
    verdict.label = k0 && k1   ? RegionLabel::R1
                    : k1       ? RegionLabel::R2
                    : k0       ? RegionLabel::R3
                               : RegionLabel::R4;
  }
  return verdict;
}

//! Region classification of a (beta0, beta1) grid for a q = 1 moment set.
struct EfficiencyMap {
  Eigen::VectorXd beta0, beta1;
  std::vector<std::vector<RegionLabel>> labels;  // [i over beta0][j over beta1]
};

inline EfficiencyMap efficiency_map(const MomentSet& m, std::pair<double, double> beta0_range,
                                    std::pair<double, double> beta1_range, int steps0, int steps1) {
  if (m.q != 1) throw ValidationError("efficiency_map: defined for q = 1");
  if (steps0 < 2 || steps1 < 2) throw ValidationError("efficiency_map: need at least 2 steps");
  EfficiencyMap map;
  map.beta0.setLinSpaced(steps0, beta0_range.first, beta0_range.second);
  map.beta1.setLinSpaced(steps1, beta1_range.first, beta1_range.second);
  map.labels.assign(static_cast<std::size_t>(steps0),
                    std::vector<RegionLabel>(static_cast<std::size_t>(steps1), RegionLabel::R4));
  for (int i = 0; i < steps0; ++i) {
    for (int j = 0; j < steps1; ++j) {
      // Classify through the quadratic forms alone; unlike the variance
      // formulas they stay finite on the E[Y] = 0 line the grid may cross.
      const MomentSet local = with_beta(m, Eigen::Vector2d(map.beta0[i], map.beta1[j]));
      const bool k0 = local.beta.dot(ck_matrix(local, 0) * local.beta) <= 0.0;
      const bool k1 = local.beta.dot(ck_matrix(local, 1) * local.beta) <= 0.0;
      map.labels[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
          k0 && k1 ? RegionLabel::R1 : k1 ? RegionLabel::R2 : k0 ? RegionLabel::R3 : RegionLabel::R4;
    }
  }
  return map;
}

}  // namespace canreg
