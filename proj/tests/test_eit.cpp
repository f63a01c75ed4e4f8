#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "rydtrans/errors.hpp"
#include "rydtrans/eit.hpp"

using namespace rydtrans;
using namespace rydtrans::eit;

namespace {

EitParams params(double od, double omega_c, double gamma_r, double delta_c = 0.0) {
  EitParams p;
  p.od = od;
  p.omega_c = omega_c;
  p.gamma_r = gamma_r;
  p.delta_c = delta_c;
  return p;
}

Eigen::VectorXd grid(double lo, double hi, double step) {
  const auto n = static_cast<Eigen::Index>(std::llround((hi - lo) / step)) + 1;
  return Eigen::VectorXd::LinSpaced(n, lo, hi);
}

}  // namespace

TEST_CASE("absorption limits") {
  CHECK(eit_absorption(params(1, 0, 0), 0.0) == 1.0);
  CHECK(eit_absorption(params(1, 4.0, 0.0, 1.3), -1.3) == 0.0);
  CHECK(std::abs(eit_absorption(params(1, 4.0, 0.2), 1e7)) < 1e-6);
  CHECK(std::abs(eit_absorption(params(1, 4.0, 0.2), -1e7)) < 1e-6);
  // two-level Lorentzian when the control is off
  const double g = kRbD1Linewidth / 2.0;
  CHECK(eit_absorption(params(1, 0, 0.3), 1.7) == doctest::Approx(g * g / (g * g + 1.7 * 1.7)).epsilon(1e-14));
}

TEST_CASE("transmission limits") {
  const auto d = grid(-20.0, 20.0, 0.5);
  CHECK((transmission(params(0.0, 5.0, 0.4), d).array() == 1.0).all());
  CHECK(transmission(params(5.0, 5.0, 0.0), Eigen::VectorXd::Zero(1))[0] == 1.0);
  CHECK(transmission(params(3.7, 0.0, 0.4), Eigen::VectorXd::Zero(1))[0] == doctest::Approx(std::exp(-3.7)).epsilon(1e-15));
  SUBCASE("0 <= T <= 1 on random parameters") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
      const auto p = params(20.0 * u(rng), 15.0 * u(rng), 2.0 * u(rng), 10.0 * (u(rng) - 0.5));
      const auto t = transmission(p, grid(-40.0, 40.0, 0.37));
      CHECK(t.minCoeff() >= 0.0);
      CHECK(t.maxCoeff() <= 1.0);
    }
  }
  CHECK_THROWS_AS(transmission(params(-1.0, 1.0, 0.1), d), ConfigError);
  CHECK_THROWS_AS(transmission(params(1.0, 1.0, -0.1), d), ConfigError);
}

TEST_CASE("operating point window") {
  const auto res = transmission_spectrum(EitParams::operating_point(), grid(-20.0, 20.0, 0.01));
  CHECK(res.t0 == doctest::Approx(0.49).epsilon(1e-3));
  REQUIRE(res.window.fwhm.has_value());
  CHECK(*res.window.fwhm == doctest::Approx(1.90).epsilon(2e-3));
  CHECK(res.window.peak_detuning == doctest::Approx(0.0).epsilon(1e-9));
  CHECK_FALSE(res.window.grid_too_coarse);
  const auto coarse = transmission_spectrum(EitParams::operating_point(), grid(-20.0, 20.0, 2.0));
  CHECK(coarse.window.grid_too_coarse);
  const auto via = fwhm_of(EitParams::operating_point(), -20.0, 20.0);
  REQUIRE(via.has_value());
  CHECK(*via == doctest::Approx(*res.window.fwhm).epsilon(1e-3));
  CHECK_FALSE(fwhm_of(params(5.0, 0.0, 0.4), -20.0, 20.0).has_value());
}

TEST_CASE("noiseless fit round trip") {
  for (const auto& truth : {EitParams::operating_point(), params(8.0, 7.0, 0.2), params(2.0, 3.0, 0.8)}) {
    const auto d = grid(-20.0, 20.0, 0.1);
    const Spectrum s{d, transmission(truth, d)};
    auto init = truth;
    init.od *= 1.3;
    init.omega_c *= 0.8;
    init.gamma_r *= 1.5;
    const auto fit = fit_spectrum(s, init);
    CHECK(fit.params.od == doctest::Approx(truth.od).epsilon(1e-3));
    CHECK(fit.params.omega_c == doctest::Approx(truth.omega_c).epsilon(1e-3));
    CHECK(fit.params.gamma_r == doctest::Approx(truth.gamma_r).epsilon(1e-3));
  }
}

TEST_CASE("operating point fit on noisy self-generated spectra: 100-seed oracle") {
  const auto truth = EitParams::operating_point();
  const auto d = grid(-20.0, 20.0, 0.2);
  const Eigen::VectorXd clean = transmission(truth, d);
  int od_ok = 0, fwhm_ok = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 0.01);
    Eigen::VectorXd t = clean;
    for (auto& v : t) v = std::clamp(v + noise(rng), 0.0, 1.0);
    auto init = truth;
    init.od = 4.0;
    init.omega_c = 4.0;
    init.gamma_r = 0.6;
    const auto fit = fit_spectrum({d, t}, init);
    od_ok += std::abs(fit.params.od / 5.0 - 1.0) < 0.05;
    fwhm_ok += fit.fwhm && std::abs(*fit.fwhm / 1.9 - 1.0) < 0.10;
  }
  CHECK(od_ok == 100);
  CHECK(fwhm_ok == 100);
}

TEST_CASE("spectrum validation") {
  Eigen::VectorXd d = grid(-1, 1, 0.5);
  CHECK_THROWS_AS(fit_spectrum({d, Eigen::VectorXd::Constant(5, 1.2)}, EitParams::operating_point()), ConfigError);
  CHECK_THROWS_AS(fit_spectrum({d, Eigen::VectorXd::Constant(4, 0.5)}, EitParams::operating_point()), ConfigError);
  CHECK_THROWS_AS(fit_spectrum({grid(0, 1, 0.5), Eigen::VectorXd::Constant(3, 0.5)}, EitParams::operating_point()),
                  ConfigError);
}

TEST_CASE("cloud optical depth") {
  const CloudParams cloud;
  const auto w = cloud.thermal_widths_um();
  CHECK(w[0] == doctest::Approx(6.575).epsilon(1e-3));
  CHECK(w[1] == doctest::Approx(24.17).epsilon(1e-3));
  CHECK(cloud_peak_od(cloud) == doctest::Approx(22.67).epsilon(1e-3));

  SUBCASE("column density scales as N / (sigma_x sigma_y)") {
    CloudParams hot = cloud;
    hot.temperature_uk *= 4.0;  // every width doubles
    CHECK(cloud_peak_od(hot) == doctest::Approx(cloud_peak_od(cloud) / 4.0).epsilon(1e-12));
    CloudParams more = cloud;
    more.atom_number *= 3.0;
    CHECK(cloud_peak_od(more) == doctest::Approx(3.0 * cloud_peak_od(cloud)).epsilon(1e-12));
  }
  SUBCASE("beam average") {
    const auto uniform = beam_averaged_transmission(cloud, [](double, double) { return 2.5; });
    CHECK(uniform.od_eff == doctest::Approx(2.5).epsilon(1e-8));
    const auto empty = beam_averaged_transmission(cloud, [](double, double) { return 0.0; });
    CHECK(empty.mean_transmission == doctest::Approx(1.0).epsilon(1e-12));
    const auto avg = beam_averaged_transmission(cloud, cloud_od_profile(cloud));
    CHECK(avg.od_eff <= cloud_peak_od(cloud));
    CHECK(avg.od_eff == doctest::Approx(8.0).epsilon(0.30));
    CHECK(avg.od_eff == doctest::Approx(8.42).epsilon(2e-3));
  }
  SUBCASE("validation") {
    CloudParams bad = cloud;
    bad.temperature_uk = 0.0;
    CHECK_THROWS_AS(cloud_peak_od(bad), ConfigError);
    bad = cloud;
    bad.beam_waist_um = -1.0;
    CHECK_THROWS_AS(beam_averaged_transmission(bad, cloud_od_profile(cloud)), ConfigError);
  }
}
