#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>

#include "canreg/covariance.hpp"
#include "canreg/rng.hpp"
#include "canreg/sim.hpp"

using namespace canreg;

namespace {

ModelSpec scalar_slope_model() {
  // f(x, b) = b * x, the smallest model with p = q = 1
  ModelSpec m;
  m.id = "slope";
  m.p = 1;
  m.q = 1;
  m.param_names = {"beta1"};
  m.eval = [](const Eigen::VectorXd& x, const Eigen::VectorXd& b) { return b[0] * x[0]; };
  m.dbeta = [](const Eigen::VectorXd& x, const Eigen::VectorXd&) {
    return Eigen::VectorXd::Constant(1, x[0]);
  };
  m.dx = [](const Eigen::VectorXd&, const Eigen::VectorXd& b) {
    return Eigen::VectorXd::Constant(1, b[0]);
  };
  m.d2_beta_x = [](const Eigen::VectorXd&, const Eigen::VectorXd&) {
    return Eigen::MatrixXd::Constant(1, 1, 1.0);
  };
  return m;
}

}  // namespace

TEST_CASE("plug-in moments match hand arithmetic on a three-point sample") {
  const ModelSpec m = scalar_slope_model();
  RestoredSample restored;
  restored.u = Eigen::VectorXd::Zero(3);
  restored.x.resize(3, 1);
  restored.x << 1.0, 2.0, 3.0;
  restored.y.resize(3);
  restored.y << 2.0, 3.0, 5.0;
  ObservedSample observed;
  observed.u = restored.u;
  observed.x = restored.x;
  observed.y = restored.y;

  FitConfig config;
  config.init = Eigen::VectorXd::Constant(1, 1.0);
  config.tol_grad = 1e-13;
  const FitResult fitted = fit(m, restored, config);
  REQUIRE(fitted.converged);
  CHECK(std::abs(fitted.beta_hat[0] - 23.0 / 14.0) <= 1e-10);

  const SigmaHat s = sigma_hat(m, restored, observed, fitted);
  CHECK(std::abs(s.lambda_mat(0, 0) - 14.0 / 3.0) <= 1e-12);
  CHECK(std::abs(s.zeta[0] - 2.0) <= 1e-12);
  CHECK(std::abs(s.eta[0] - 2.3) <= 1e-12);  // (23/3) / (10/3)
  CHECK(s.gamma_mat(0, 0) == 0.0);           // observed equals restored here
  CHECK(s.sigma2 == fitted.sigma2_hat);
}

TEST_CASE("without distortion the noise part dominates the covariance") {
  Scenario sc;
  sc.id = "plain-linear";
  sc.model = builtin_model("linear", 1);
  sc.beta0 = Eigen::Vector2d(5.0, 0.2);
  sc.x_dist = TruncatedNormalDist{2.0, 0.5, 1.0, 3.0};
  sc.u_dist = TruncatedNormalDist{0.0, 1.0, -2.0, 2.0};
  sc.eps_sd = 2.0;
  sc.psi_shape = [](double) { return 1.0; };
  sc.phi_shape = [](double) { return 1.0; };
  sc.default_init = Eigen::Vector2d(1.0, 0.0);

  const LatentSample latent = generate(sc, 2000, 13);
  const ObservedSample observed = latent.observed();
  FitConfig config;
  config.init = sc.default_init;
  const PipelineResult run = run_pipeline(sc.model, observed, {}, config);
  REQUIRE(run.fit.converged);
  const SigmaHat s = sigma_hat(sc.model, run.restored, observed, run.fit);

  const Eigen::MatrixXd lambda_inv =
      s.lambda_mat.ldlt().solve(Eigen::MatrixXd::Identity(2, 2));
  const Eigen::MatrixXd noise_part = s.sigma2 * lambda_inv;
  const Eigen::MatrixXd a_part = 0.25 * lambda_inv * s.omega * lambda_inv;
  const Eigen::MatrixXd b_part = lambda_inv * s.gamma_mat * lambda_inv;
  CHECK((a_part + b_part).norm() / noise_part.norm() < 0.2);
}

TEST_CASE("assembled covariance is symmetric and almost positive semidefinite") {
  const Scenario sc = scenario_ex41();
  for (std::uint64_t seed : {1ULL, 2ULL}) {
    const LatentSample latent = generate(sc, 300, seed);
    const ObservedSample observed = latent.observed();
    FitConfig config;
    config.init = sc.default_init;
    const PipelineResult run = run_pipeline(sc.model, observed, {}, config);
    REQUIRE(run.fit.converged);
    const SigmaHat s = sigma_hat(sc.model, run.restored, observed, run.fit);
    CHECK((s.sigma - s.sigma.transpose()).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((s.lambda_mat - s.lambda_mat.transpose()).cwiseAbs().maxCoeff() <= 1e-10);
    CHECK((s.omega - s.omega.transpose()).cwiseAbs().maxCoeff() <= 1e-10);
    CHECK((s.gamma_mat - s.gamma_mat.transpose()).cwiseAbs().maxCoeff() <= 1e-10);
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(s.sigma);
    CHECK(eig.eigenvalues().minCoeff() >= -1e-10 * s.sigma.trace());
  }
}

TEST_CASE("sigma_hat requires a converged fit") {
  const ModelSpec m = scalar_slope_model();
  RestoredSample restored;
  restored.u = Eigen::VectorXd::Zero(3);
  restored.x = Eigen::MatrixXd::Ones(3, 1);
  restored.y = Eigen::VectorXd::Ones(3);
  ObservedSample observed{restored.u, restored.x, restored.y};
  FitResult unconverged;
  unconverged.converged = false;
  CHECK_THROWS_AS(sigma_hat(m, restored, observed, unconverged), ValidationError);
}

TEST_CASE("ellipsoid statistic at the center and in one dimension") {
  FitResult fitted;
  fitted.converged = true;
  fitted.beta_hat = Eigen::VectorXd::Constant(1, 1.1);
  fitted.scores = Eigen::MatrixXd::Zero(100, 1);
  SigmaHat s;
  s.sigma = Eigen::MatrixXd::Constant(1, 1, 1.0);

  const WaldTest center = wald_region(fitted, s, fitted.beta_hat, 0.05);
  CHECK(center.statistic == 0.0);
  CHECK(center.inside);

  const WaldTest off = wald_region(fitted, s, Eigen::VectorXd::Constant(1, 1.0), 0.05);
  CHECK(std::abs(off.statistic - 1.0) <= 1e-12);  // 100 * 0.1^2 / 1
  CHECK(off.inside);                              // 1.0 < 3.84

  SigmaHat singular;
  singular.sigma = Eigen::MatrixXd::Zero(1, 1);
  CHECK_THROWS_AS(wald_region(fitted, singular, fitted.beta_hat, 0.05), NumericalError);
}

TEST_CASE("ellipsoid statistic is invariant under consistent linear maps") {
  Rng rng(31);
  FitResult fitted;
  fitted.converged = true;
  fitted.beta_hat = Eigen::Vector2d(1.4, -0.3);
  fitted.scores = Eigen::MatrixXd::Zero(250, 2);
  SigmaHat s;
  Eigen::MatrixXd root(2, 2);
  root << 1.0, 0.3, 0.0, 0.8;
  s.sigma = root * root.transpose();
  const Eigen::VectorXd beta = Eigen::Vector2d(1.1, -0.1);
  const double base = wald_region(fitted, s, beta, 0.05).statistic;

  for (int trial = 0; trial < 10; ++trial) {
    Eigen::MatrixXd map(2, 2);
    do {
      for (int i = 0; i < 4; ++i) map(i / 2, i % 2) = rng.uniform(-2, 2);
    } while (std::abs(map.determinant()) < 0.1);
    FitResult mapped_fit = fitted;
    mapped_fit.beta_hat = map * fitted.beta_hat;
    SigmaHat mapped_sigma;
    mapped_sigma.sigma = map * s.sigma * map.transpose();
    const double mapped = wald_region(mapped_fit, mapped_sigma, map * beta, 0.05).statistic;
    CHECK(std::abs(mapped - base) <= 1e-10 * (1.0 + base));
  }
}
