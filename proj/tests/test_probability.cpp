#include <doctest.h>

#include <cmath>
#include <numbers>

#include "rydtrans/errors.hpp"
#include "rydtrans/probability.hpp"

using namespace rydtrans;
using namespace rydtrans::fitkit;

TEST_CASE("Poisson pmf edge cases") {
  CHECK(poisson_pmf(0.0, 0) == 1.0);
  for (long k = 1; k < 5; ++k) CHECK(poisson_pmf(0.0, k) == 0.0);
  CHECK(poisson_pmf(3.0, -1) == 0.0);
  CHECK(poisson_pmf(2.0, 3) == doctest::Approx(std::exp(-2.0) * 8.0 / 6.0).epsilon(1e-14));
  CHECK(poisson_log_pmf(1000.0, 1000) == doctest::Approx(-0.5 * std::log(2 * std::numbers::pi * 1000.0)).epsilon(1e-4));
  CHECK_THROWS_AS(poisson_pmf(-1.0, 0), DomainError);
  CHECK_THROWS_AS(poisson_cdf(std::nan(""), 0), DomainError);
}

TEST_CASE("cdf + sf = 1 and cdf is monotone") {
  for (double mu : {0.0, 0.3, 3.4879, 8.62, 25.0, 140.0}) {
    double prev = 0.0;
    for (long k = 0; k < 200; ++k) {
      const double c = poisson_cdf(mu, k);
      CHECK(c + poisson_sf(mu, k) == doctest::Approx(1.0).epsilon(1e-10));
      CHECK(c >= prev);
      CHECK(c <= 1.0);
      prev = c;
    }
  }
  CHECK(1.0 - poisson_cdf(8.62, 5) == doctest::Approx(0.85921).epsilon(1e-4));
}

TEST_CASE("pmf table sums to the cdf") {
  const auto t = poisson_pmf_table(8.62, 40);
  REQUIRE(t.size() == 41);
  double s = 0.0;
  for (long k = 0; k <= 40; ++k) {
    CHECK(t[k] == doctest::Approx(poisson_pmf(8.62, k)).epsilon(1e-12));
    s += t[k];
  }
  CHECK(s == doctest::Approx(poisson_cdf(8.62, 40)).epsilon(1e-12));
}

TEST_CASE("Gauss-Legendre integrates polynomials exactly") {
  for (int n : {1, 2, 5, 16}) {
    const auto r = gauss_legendre(n);
    CHECK(r.weights.sum() == doctest::Approx(2.0).epsilon(1e-13));
    for (int p = 0; p <= 2 * n - 1; ++p) {
      double q = 0.0;
      for (int i = 0; i < n; ++i) q += r.weights[i] * std::pow(r.nodes[i], p);
      const double exact = (p % 2 == 1) ? 0.0 : 2.0 / (p + 1);
      CHECK(q == doctest::Approx(exact).epsilon(1e-12));
    }
  }
  CHECK_THROWS_AS(gauss_legendre(0), ConfigError);
}

TEST_CASE("Gauss-Hermite reproduces standard normal moments") {
  const auto r = gauss_hermite_normal(20);
  double m0 = 0, m2 = 0, m4 = 0, lognormal = 0;
  for (int i = 0; i < 20; ++i) {
    const double z = r.nodes[i];
    m0 += r.weights[i];
    m2 += r.weights[i] * z * z;
    m4 += r.weights[i] * z * z * z * z;
    lognormal += r.weights[i] * std::exp(0.3 * z);
  }
  CHECK(m0 == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(m2 == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(m4 == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(lognormal == doctest::Approx(std::exp(0.045)).epsilon(1e-12));
}

TEST_CASE("adaptive quadrature") {
  const auto r = integrate_adaptive([](double x) { return std::exp(-x * x); }, -8.0, 8.0, 1e-12);
  CHECK(r.value == doctest::Approx(std::sqrt(std::numbers::pi)).epsilon(1e-12));
  CHECK(r.error_estimate < 1e-10);
  const auto peak = integrate_adaptive([](double x) { return 1e-3 / (x * x + 1e-6); }, -1.0, 1.0, 1e-10);
  CHECK(peak.value == doctest::Approx(2.0 * std::atan(1000.0)).epsilon(1e-9));
  const auto r2 = integrate_adaptive_2d([](double x, double y) { return std::exp(-(x * x + y * y) / 2.0); }, -10,
                                        10, -10, 10, 1e-9);
  CHECK(r2.value == doctest::Approx(2.0 * std::numbers::pi).epsilon(1e-8));
  CHECK_THROWS_AS(integrate_adaptive([](double x) { return 1.0 / std::sqrt(std::abs(x)); }, -1.0, 1.0, 1e-14, 1e-300, 6),
                  NumericalError);
}
