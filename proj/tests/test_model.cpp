#include <catch2/catch_amalgamated.hpp>

#include "canreg/model.hpp"
#include "canreg/rng.hpp"

using namespace canreg;

namespace {

// Test-side central differences, separate from the library's checker.
double fd_beta(const ModelSpec& m, const Eigen::VectorXd& x, Eigen::VectorXd beta, int k) {
  const double d = 1e-6 * (1.0 + std::abs(beta[k]));
  beta[k] += d;
  const double hi = m.eval(x, beta);
  beta[k] -= 2.0 * d;
  const double lo = m.eval(x, beta);
  return (hi - lo) / (2.0 * d);
}

double fd_x(const ModelSpec& m, Eigen::VectorXd x, const Eigen::VectorXd& beta, int l) {
  const double d = 1e-6 * (1.0 + std::abs(x[l]));
  x[l] += d;
  const double hi = m.eval(x, beta);
  x[l] -= 2.0 * d;
  const double lo = m.eval(x, beta);
  return (hi - lo) / (2.0 * d);
}

double fd_cross(const ModelSpec& m, Eigen::VectorXd x, const Eigen::VectorXd& beta, int k, int l) {
  const double d = 1e-6 * (1.0 + std::abs(x[l]));
  x[l] += d;
  const double hi = m.dbeta(x, beta)[k];
  x[l] -= 2.0 * d;
  const double lo = m.dbeta(x, beta)[k];
  return (hi - lo) / (2.0 * d);
}

double rel_gap(double a, double b) { return std::abs(a - b) / (1.0 + std::abs(a)); }

struct ProbeBox {
  double x_lo, x_hi;
  std::vector<std::pair<double, double>> beta_box;
};

void check_model_derivatives(const ModelSpec& m, const ProbeBox& box, Rng& rng) {
  for (int probe = 0; probe < 100; ++probe) {
    Eigen::VectorXd x(m.q);
    for (int l = 0; l < m.q; ++l) x[l] = rng.uniform(box.x_lo, box.x_hi);
    Eigen::VectorXd beta(m.p);
    for (int k = 0; k < m.p; ++k)
      beta[k] = rng.uniform(box.beta_box[static_cast<std::size_t>(k)].first,
                            box.beta_box[static_cast<std::size_t>(k)].second);
    const Eigen::VectorXd gb = m.dbeta(x, beta);
    const Eigen::VectorXd gx = m.dx(x, beta);
    const Eigen::MatrixXd cross = m.d2_beta_x(x, beta);
    for (int k = 0; k < m.p; ++k) CHECK(rel_gap(gb[k], fd_beta(m, x, beta, k)) <= 1e-6);
    for (int l = 0; l < m.q; ++l) CHECK(rel_gap(gx[l], fd_x(m, x, beta, l)) <= 1e-6);
    for (int k = 0; k < m.p; ++k)
      for (int l = 0; l < m.q; ++l)
        CHECK(rel_gap(cross(k, l), fd_cross(m, x, beta, k, l)) <= 1e-6);
  }
}

}  // namespace

TEST_CASE("built-in model point values") {
  const ModelSpec expsat = builtin_model("expsat");
  Eigen::VectorXd x0 = Eigen::VectorXd::Zero(1);
  CHECK(expsat.eval(x0, Eigen::Vector2d(4.309, 0.208)) == 0.0);

  const ModelSpec power = builtin_model("power");
  CHECK(power.eval(x0, Eigen::Vector2d(2.5, -1.0)) == 2.5);

  const ModelSpec mdrd = builtin_model("mdrd-exp");
  CHECK(std::abs(mdrd.eval(x0, Eigen::Vector4d(10.71, 0.0759, -0.0004, 1.1528)) - 11.8628) <= 1e-12);
}

TEST_CASE("unknown ids and bad dimensions") {
  CHECK_THROWS_AS(builtin_model("spline"), ValidationError);
  CHECK_THROWS_AS(builtin_model("linear", 0), ValidationError);
  CHECK_THROWS_AS(builtin_model("expsat", 2), ValidationError);
}

TEST_CASE("analytic derivatives match finite differences on random probes") {
  Rng rng(101);
  check_model_derivatives(builtin_model("linear", 2), {-5.0, 5.0, {{-3, 3}, {-3, 3}, {-3, 3}}}, rng);
  check_model_derivatives(builtin_model("expsat"), {0.0, 25.0, {{0.5, 8.0}, {0.05, 1.0}}}, rng);
  check_model_derivatives(builtin_model("power"), {-0.5, 5.0, {{0.5, 5.0}, {-2.0, 2.0}}}, rng);
  check_model_derivatives(builtin_model("mdrd-exp"),
                          {0.3, 10.0, {{5.0, 15.0}, {0.01, 0.3}, {-0.01, 0.01}, {0.5, 2.0}}}, rng);
}

TEST_CASE("linear model is exactly linear in x") {
  const ModelSpec m = builtin_model("linear", 2);
  const Eigen::VectorXd beta = Eigen::Vector3d(0.7, -1.3, 2.2);
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::VectorXd x(2);
    x << rng.uniform(-4, 4), rng.uniform(-4, 4);
    for (int l = 0; l < 2; ++l) {
      Eigen::VectorXd x1 = x, x2 = x;
      const double d = 0.37;
      x1[l] += d;
      x2[l] += 2 * d;
      const double second_diff = m.eval(x2, beta) - 2.0 * m.eval(x1, beta) + m.eval(x, beta);
      CHECK(std::abs(second_diff) <= 1e-12);
    }
  }
}

TEST_CASE("check_derivatives passes on good probes") {
  const ModelSpec m = builtin_model("expsat");
  std::vector<DerivativeProbe> probes;
  probes.push_back({Eigen::VectorXd::Constant(1, 5.0), Eigen::Vector2d(4.309, 0.208)});
  probes.push_back({Eigen::VectorXd::Constant(1, 12.0), Eigen::Vector2d(2.0, 0.5)});
  const DerivativeReport report = check_derivatives(m, probes, 1e-6);
  CHECK(report.pass);
  for (const auto& row : report.rows) {
    CHECK(row.finite);
    CHECK(row.max_rel_dbeta <= 1e-6);
    CHECK(row.max_rel_dx <= 1e-6);
    CHECK(row.max_rel_cross <= 1e-6);
  }
}

TEST_CASE("check_derivatives on the linear model is exact to rounding") {
  const ModelSpec m = builtin_model("linear", 1);
  std::vector<DerivativeProbe> probes;
  probes.push_back({Eigen::VectorXd::Constant(1, 1.5), Eigen::Vector2d(0.3, -2.0)});
  const DerivativeReport report = check_derivatives(m, probes, 1e-6);
  REQUIRE(report.pass);
  CHECK(report.rows[0].max_rel_dbeta <= 1e-9);
  CHECK(report.rows[0].max_rel_dx <= 1e-9);
}

TEST_CASE("probing next to the power-law pole is reported as non-finite") {
  const ModelSpec m = builtin_model("power");
  std::vector<DerivativeProbe> probes;
  probes.push_back({Eigen::VectorXd::Constant(1, -1.0 + 1e-9), Eigen::Vector2d(2.5, -1.0)});
  const DerivativeReport report = check_derivatives(m, probes, 1e-6);
  CHECK_FALSE(report.pass);
  REQUIRE(report.rows.size() == 1);
  CHECK_FALSE(report.rows[0].finite);
}
