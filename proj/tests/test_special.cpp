#include <catch2/catch_amalgamated.hpp>

#include "canreg/rng.hpp"
#include "canreg/special.hpp"

using namespace canreg;

TEST_CASE("chi-square quantiles at reference points") {
  // dof 2 has the closed form -2 log(alpha)
  CHECK(std::abs(chi2_quantile(2, 0.05) - (-2.0 * std::log(0.05))) <= 1e-9);
  CHECK(std::abs(chi2_quantile(2, 0.05) - 5.991465) <= 1e-6);
  CHECK(std::abs(chi2_quantile(1, 0.05) - 3.841459) <= 1e-6);
  // full lower tail: alpha near 1 sends the quantile to 0
  CHECK(chi2_quantile(2, 0.999999) < 1e-5);
  CHECK_THROWS_AS(chi2_quantile(0, 0.05), ValidationError);
  CHECK_THROWS_AS(chi2_quantile(2, 0.0), ValidationError);
  CHECK_THROWS_AS(chi2_quantile(2, 1.0), ValidationError);
}

TEST_CASE("cdf and quantile are mutual inverses") {
  for (int dof = 1; dof <= 6; ++dof) {
    for (double alpha : {0.2, 0.1, 0.05, 0.01}) {
      const double c = chi2_quantile(dof, alpha);
      CHECK(std::abs(chi2_cdf(c, dof) - (1.0 - alpha)) <= 1e-8);
    }
  }
}

TEST_CASE("dof 2 cdf matches the closed form") {
  for (double x : {0.5, 2.0, 5.0, 10.0})
    CHECK(std::abs(chi2_cdf(x, 2) - (1.0 - std::exp(-0.5 * x))) <= 1e-12);
  CHECK(chi2_cdf(-1.0, 2) == 0.0);
  CHECK(chi2_cdf(0.0, 2) == 0.0);
}

TEST_CASE("ks statistic behaves on calibrated and shifted samples") {
  Rng rng(17);
  std::vector<double> sample(2000);
  for (auto& v : sample) v = rng.uniform01();
  auto uniform_cdf = [](double t) { return std::min(1.0, std::max(0.0, t)); };
  const double d_calibrated = ks_statistic(sample, uniform_cdf);
  CHECK(d_calibrated < ks_critical(0.01, sample.size()));

  for (auto& v : sample) v = 0.5 * v;  // wrong distribution
  CHECK(ks_statistic(sample, uniform_cdf) > ks_critical(0.01, sample.size()));
  CHECK(std::abs(ks_critical(0.01, 500) - 1.62762 / std::sqrt(500.0)) <= 1e-4);
}

TEST_CASE("stream rng is deterministic and role-separated") {
  Rng a(42, 3, Rng::Role::predictor);
  Rng b(42, 3, Rng::Role::predictor);
  Rng c(42, 3, Rng::Role::noise);
  bool any_different = false;
  for (int i = 0; i < 100; ++i) {
    const auto va = a.next_u64();
    CHECK(va == b.next_u64());
    if (va != c.next_u64()) any_different = true;
  }
  CHECK(any_different);
}

TEST_CASE("truncated normal sampling respects the bounds") {
  Rng rng(9);
  double mean = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double v = rng.truncated_normal(1.0, 2.0, 0.0, 3.0);
    REQUIRE(v >= 0.0);
    REQUIRE(v <= 3.0);
    mean += v;
  }
  mean /= n;
  CHECK(mean > 0.9);
  CHECK(mean < 1.6);
  // pathological bounds exhaust the rejection budget
  CHECK_THROWS_AS(rng.truncated_normal(0.0, 1e-3, 50.0, 51.0), NumericalError);
}
