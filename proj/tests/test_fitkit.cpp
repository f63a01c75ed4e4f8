#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "rydtrans/errors.hpp"
#include "rydtrans/fitkit.hpp"

using namespace rydtrans;
using namespace rydtrans::fitkit;

namespace {

Vector linspace(double a, double b, int n) { return Vector::LinSpaced(n, a, b); }

Vector evaluate(const Model& m, const Vector& x, const Vector& p) {
  Vector y(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) y[i] = m.value(x[i], p);
  return y;
}

}  // namespace

TEST_CASE("linear model converges at once") {
  const auto m = Model::user([](double x, const Vector& p) { return p[0] * x; }, 1);
  const Vector x = linspace(0.0, 5.0, 11);
  const Vector y = 2.75 * x;
  const auto r = nlls_fit({m, x, y, {}, Vector::Constant(1, 1.0), std::nullopt});
  CHECK(r.converged);
  CHECK(r.iterations <= 2);
  CHECK(r.params[0] == doctest::Approx(2.75).epsilon(1e-12));
}

TEST_CASE("noiseless Lorentzian round trip") {
  const auto m = Model::lorentzian();
  const Vector truth = (Vector(4) << 69.3, 1.7, 0.45, 0.05).finished();
  const Vector x = linspace(60.0, 80.0, 81);
  const Vector y = evaluate(m, x, truth);
  const Vector init = (Vector(4) << 68.0, 3.0, 0.3, 0.0).finished();
  const auto r = nlls_fit({m, x, y, {}, init, std::nullopt}, {.gradient_tol = 1e-12, .step_tol = 1e-14, .value_tol = 1e-20, .max_iter = 500});
  CHECK(r.converged);
  // the width enters squared, so only its magnitude is identifiable
  CHECK(r.params[0] == doctest::Approx(truth[0]).epsilon(1e-8));
  CHECK(std::abs(r.params[1]) == doctest::Approx(truth[1]).epsilon(1e-8));
  CHECK(r.params[2] == doctest::Approx(truth[2]).epsilon(1e-8));
  CHECK(r.params[3] == doctest::Approx(truth[3]).epsilon(1e-8));
}

TEST_CASE("analytic Jacobians match finite differences") {
  const Vector x = linspace(0.0, 200.0, 41);
  const Vector pl = (Vector(4) << 100.0, 30.0, 2.0, 0.3).finished();
  const Vector pe = (Vector(2) << 0.9, 100.0).finished();
  const auto shape = [](double k) { return std::exp(-0.1 * k); };
  const Vector ps = (Vector(1) << 0.6).finished();
  for (const auto& [model, p] : {std::pair{Model::lorentzian(), pl}, std::pair{Model::exponential_recovery(), pe},
                                 std::pair{Model::scaled_pmf(shape), ps}}) {
    const Matrix a = model_jacobian(model, x, p);
    const Matrix n = numeric_jacobian(model, x, p);
    CHECK((a - n).cwiseAbs().maxCoeff() <= 1e-5 * std::max(1.0, a.cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("fit is invariant under reordering of the data") {
  const auto m = Model::exponential_recovery();
  const Vector truth = (Vector(2) << 0.8, 100.0).finished();
  const Vector x = linspace(0.0, 400.0, 60);
  Vector y = evaluate(m, x, truth);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> noise(0.0, 0.01);
  for (auto& v : y) v += noise(rng);

  std::vector<int> perm(x.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  Vector xs(x.size()), ys(y.size());
  for (std::size_t i = 0; i < perm.size(); ++i) {
    xs[i] = x[perm[i]];
    ys[i] = y[perm[i]];
  }
  const Vector init = (Vector(2) << 0.5, 50.0).finished();
  const auto a = nlls_fit({m, x, y, {}, init, std::nullopt});
  const auto b = nlls_fit({m, xs, ys, {}, init, std::nullopt});
  CHECK(a.params[0] == doctest::Approx(b.params[0]).epsilon(1e-9));
  CHECK(a.params[1] == doctest::Approx(b.params[1]).epsilon(1e-9));
}

TEST_CASE("exponential recovery with 1% noise: 100-seed oracle") {
  // tau = 0.10 ms = 100 us
  const auto m = Model::exponential_recovery();
  const Vector truth = (Vector(2) << 0.9, 100.0).finished();
  const Vector x = linspace(0.0, 500.0, 101);
  const Vector clean = evaluate(m, x, truth);
  int within = 0;
  double mean_tau = 0.0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 0.01);
    Vector y = clean;
    for (auto& v : y) v += noise(rng);
    const auto r = nlls_fit({m, x, y, {}, (Vector(2) << 0.5, 50.0).finished(), std::nullopt});
    REQUIRE(r.converged);
    mean_tau += r.params[1] / 100.0;
    within += std::abs(r.params[1] / 100.0 - 1.0) < 0.05;
    // the reported standard error is a fair scale for the scatter
    CHECK(r.stderr_of(1) > 0.0);
    CHECK(r.stderr_of(1) < 10.0);
  }
  CHECK(within == 100);
  CHECK(mean_tau == doctest::Approx(100.0).epsilon(0.01));
}

TEST_CASE("bounds keep parameters feasible") {
  const auto m = Model::user([](double x, const Vector& p) { return p[0] * x; }, 1);
  const Vector x = linspace(1.0, 5.0, 5);
  const Vector y = -1.0 * x;
  Bounds b{Vector::Constant(1, 0.0), Vector::Constant(1, 10.0)};
  const auto r = nlls_fit({m, x, y, {}, Vector::Constant(1, 1.0), b});
  CHECK(r.params[0] >= 0.0);
  CHECK(r.params[0] == doctest::Approx(0.0).epsilon(1e-8));
}

TEST_CASE("invalid problems") {
  const auto m = Model::lorentzian();
  const Vector x = linspace(0, 1, 5);
  CHECK_THROWS_AS(nlls_fit({m, x, Vector::Zero(4), {}, Vector::Zero(4), std::nullopt}), ConfigError);
  CHECK_THROWS_AS(nlls_fit({m, x, Vector::Zero(5), {}, Vector::Zero(3), std::nullopt}), ConfigError);
  CHECK_THROWS_AS(nlls_fit({m, x, Vector::Zero(5), Vector::Constant(5, -1.0), Vector::Ones(4), std::nullopt}),
                  ConfigError);
  const auto bad = Model::user([](double, const Vector&) { return std::nan(""); }, 1);
  CHECK_THROWS_AS(nlls_fit({bad, x, Vector::Zero(5), {}, Vector::Ones(1), std::nullopt}), NumericalError);
  CHECK_THROWS_AS(Model::user([](double, const Vector&) { return 0.0; }, 0), ConfigError);
}

TEST_CASE("covariance scales with the residual variance") {
  const auto m = Model::user([](double x, const Vector& p) { return p[0] + p[1] * x; }, 2);
  const Vector x = linspace(0.0, 9.0, 10);
  Vector y = 1.0 + 2.0 * x.array();
  for (Eigen::Index i = 0; i < y.size(); ++i) y[i] += (i % 2 ? 0.1 : -0.1);
  const auto r = nlls_fit({m, x, y, {}, Vector::Zero(2), std::nullopt});
  // ordinary least squares, closed form
  Matrix a(x.size(), 2);
  a.col(0).setOnes();
  a.col(1) = x;
  const Vector beta = a.colPivHouseholderQr().solve(y);
  const double s2 = (y - a * beta).squaredNorm() / (x.size() - 2);
  const Matrix cov = s2 * (a.transpose() * a).inverse();
  CHECK(r.params[0] == doctest::Approx(beta[0]).epsilon(1e-10));
  CHECK(r.params[1] == doctest::Approx(beta[1]).epsilon(1e-10));
  CHECK(r.covariance(0, 0) == doctest::Approx(cov(0, 0)).epsilon(1e-8));
  CHECK(r.covariance(0, 1) == doctest::Approx(cov(0, 1)).epsilon(1e-8));
}
