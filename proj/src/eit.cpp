#include "rydtrans/eit.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "rydtrans/errors.hpp"
#include "rydtrans/fitkit.hpp"
#include "rydtrans/probability.hpp"

namespace rydtrans::eit {

namespace {

constexpr double kBoltzmann = 1.380649e-23;
constexpr double kAtomicMass = 1.66053906660e-27;

void require(bool ok, const char* field, const char* what) {
  if (!ok) throw ConfigError(std::string(field) + " " + what);
}

}  // namespace

void EitParams::validate() const {
  require(std::isfinite(gamma_e) && gamma_e > 0.0, "gamma_e", "must be > 0");
  require(std::isfinite(omega_c) && omega_c >= 0.0, "omega_c", "must be >= 0");
  require(std::isfinite(gamma_r) && gamma_r >= 0.0, "gamma_r", "must be >= 0");
  require(std::isfinite(delta_c), "delta_c", "must be finite");
  require(std::isfinite(od) && od >= 0.0, "od", "must be >= 0");
}

EitParams EitParams::operating_point() {
  EitParams p;
  p.od = 5.0;
  p.omega_c = 5.2367616;
  p.gamma_r = 0.39683716;
  return p;
}

double eit_absorption(const EitParams& params, double delta_s) {
  return absorption(params.gamma_e, params.omega_c, params.gamma_r, params.delta_c, delta_s);
}

Eigen::VectorXd transmission(const EitParams& params, const Eigen::VectorXd& detunings) {
  params.validate();
  return detunings.unaryExpr(
      [&](double ds) { return std::exp(-params.od * eit_absorption(params, ds)); });
}

void Spectrum::validate() const {
  if (detunings.size() != transmissions.size()) {
    throw ConfigError("spectrum: detuning and transmission columns differ in length");
  }
  if (detunings.size() == 0) throw ConfigError("spectrum is empty");
  for (Eigen::Index i = 0; i < transmissions.size(); ++i) {
    if (!(transmissions[i] >= 0.0 && transmissions[i] <= 1.0)) {
      throw ConfigError("spectrum: transmission outside [0, 1] at row " + std::to_string(i));
    }
    if (i > 0 && !(detunings[i] > detunings[i - 1])) {
      throw ConfigError("spectrum: detunings must be strictly increasing");
    }
  }
}

WindowShape window_shape(const Spectrum& spectrum, double two_photon_detuning) {
  const Eigen::VectorXd& x = spectrum.detunings;
  const Eigen::VectorXd& t = spectrum.transmissions;
  const Eigen::Index n = x.size();
  WindowShape w;
  if (n == 0) return w;

  Eigen::Index peak = 0;
  (x.array() - two_photon_detuning).abs().minCoeff(&peak);
  while (peak + 1 < n && t[peak + 1] > t[peak]) ++peak;
  while (peak > 0 && t[peak - 1] > t[peak]) --peak;
  w.peak_detuning = x[peak];
  w.peak_transmission = t[peak];

  Eigen::Index left_min = peak;
  while (left_min > 0 && t[left_min - 1] <= t[left_min]) --left_min;
  Eigen::Index right_min = peak;
  while (right_min + 1 < n && t[right_min + 1] <= t[right_min]) ++right_min;

  const double half_left = 0.5 * (t[peak] + t[left_min]);
  const double half_right = 0.5 * (t[peak] + t[right_min]);

  std::optional<double> left_x;
  for (Eigen::Index i = peak; i > left_min; --i) {
    if (t[i - 1] < half_left) {
      const double f = (t[i] - half_left) / (t[i] - t[i - 1]);
      left_x = x[i] + f * (x[i - 1] - x[i]);
      break;
    }
  }
  std::optional<double> right_x;
  for (Eigen::Index i = peak; i < right_min; ++i) {
    if (t[i + 1] < half_right) {
      const double f = (t[i] - half_right) / (t[i] - t[i + 1]);
      right_x = x[i] + f * (x[i + 1] - x[i]);
      break;
    }
  }
  if (left_x && right_x) {
    w.fwhm = *right_x - *left_x;
    double spacing = 0.0;
    for (Eigen::Index i = std::max<Eigen::Index>(left_min, 1); i <= right_min; ++i) {
      spacing = std::max(spacing, x[i] - x[i - 1]);
    }
    w.grid_too_coarse = spacing > *w.fwhm / 10.0;
  } else {
    w.grid_too_coarse = n < 3;
  }
  return w;
}

SpectrumResult transmission_spectrum(const EitParams& params, const Eigen::VectorXd& detunings) {
  if (detunings.size() == 0) throw ConfigError("detuning grid is empty");
  SpectrumResult out;
  out.spectrum.detunings = detunings;
  out.spectrum.transmissions = transmission(params, detunings);
  out.window = window_shape(out.spectrum, -params.delta_c);
  out.t0 = std::exp(-params.od * eit_absorption(params, 0.0));
  return out;
}

std::optional<double> fwhm_of(const EitParams& params, double lo, double hi, int points) {
  const Eigen::VectorXd grid = Eigen::VectorXd::LinSpaced(points, lo, hi);
  return transmission_spectrum(params, grid).window.fwhm;
}

SpectrumFit fit_spectrum(const Spectrum& spectrum, const EitParams& init) {
  spectrum.validate();
  init.validate();
  if (spectrum.detunings.size() < 5) {
    throw ConfigError("spectrum fit needs at least 5 points, got " +
                      std::to_string(spectrum.detunings.size()));
  }
  const double gamma_e = init.gamma_e;
  const double delta_c = init.delta_c;
  auto model = fitkit::Model::user(
      [gamma_e, delta_c](double ds, const fitkit::Vector& p) {
        return std::exp(-p[0] * absorption(gamma_e, p[1], p[2], delta_c, ds));
      },
      3);

  const double inf = std::numeric_limits<double>::infinity();
  fitkit::FitProblem problem{model, spectrum.detunings, spectrum.transmissions, {},
                             Eigen::Vector3d(init.od, init.omega_c, init.gamma_r),
                             fitkit::Bounds{Eigen::Vector3d::Zero(), Eigen::Vector3d::Constant(inf)}};
  const auto res = fitkit::nlls_fit(problem);
  if (!res.converged) {
    std::ostringstream msg;
    msg << "spectrum fit did not converge: residual " << res.residual_norm << " after "
        << res.iterations << " iterations (" << res.message << ")";
    throw NumericalError(msg.str());
  }

  SpectrumFit out;
  out.params = init;
  out.params.od = res.params[0];
  out.params.omega_c = res.params[1];
  out.params.gamma_r = res.params[2];
  out.covariance = res.covariance;
  out.residual = res.residual_norm;
  out.iterations = res.iterations;
  out.t0 = std::exp(-out.params.od * eit_absorption(out.params, 0.0));
  const double span = std::max(std::abs(spectrum.detunings[0]),
                               std::abs(spectrum.detunings[spectrum.detunings.size() - 1]));
  out.fwhm = fwhm_of(out.params, -delta_c - span, -delta_c + span);
  return out;
}

void CloudParams::validate() const {
  require(atom_number > 0.0, "atom_number", "must be > 0");
  require(temperature_uk > 0.0, "temperature_uk", "must be > 0");
  for (double f : trap_freqs_hz) require(f > 0.0, "trap_freqs_hz", "must all be > 0");
  require(wavelength_nm > 0.0, "wavelength_nm", "must be > 0");
  require(beam_waist_um > 0.0, "beam_waist_um", "must be > 0");
  require(cross_section_prefactor > 0.0, "cross_section_prefactor", "must be > 0");
  require(mass_amu > 0.0, "mass_amu", "must be > 0");
  for (double s : thermal_widths_um()) require(std::isfinite(s), "thermal width", "is not finite");
}

std::array<double, 3> CloudParams::thermal_widths_um() const {
  const double kt_over_m =
      kBoltzmann * temperature_uk * 1e-6 / (mass_amu * kAtomicMass);
  std::array<double, 3> out{};
  for (std::size_t i = 0; i < 3; ++i) {
    const double omega = 2.0 * std::numbers::pi * trap_freqs_hz[i];
    out[i] = std::sqrt(kt_over_m) / omega * 1e6;
  }
  return out;
}

double CloudParams::cross_section_um2() const {
  const double lambda_um = wavelength_nm * 1e-3;
  return cross_section_prefactor * 3.0 * lambda_um * lambda_um / (2.0 * std::numbers::pi);
}

double cloud_peak_od(const CloudParams& cloud) {
  cloud.validate();
  const auto s = cloud.thermal_widths_um();
  return cloud.cross_section_um2() * cloud.atom_number / (2.0 * std::numbers::pi * s[0] * s[1]);
}

std::function<double(double, double)> cloud_od_profile(const CloudParams& cloud) {
  const double peak = cloud_peak_od(cloud);
  const auto s = cloud.thermal_widths_um();
  const double ax = 0.5 / (s[0] * s[0]);
  const double ay = 0.5 / (s[1] * s[1]);
  return [=](double x, double y) { return peak * std::exp(-ax * x * x - ay * y * y); };
}

BeamAverage beam_averaged_transmission(const CloudParams& cloud,
                                       const std::function<double(double, double)>& od_profile) {
  cloud.validate();
  const double w = cloud.beam_waist_um;
  const double k = 2.0 / (w * w);
  const double lim = 4.0 * w;
  constexpr double kRelTol = 1e-6;
  const auto intensity = [k](double x, double y) { return std::exp(-k * (x * x + y * y)); };

  const auto num = fitkit::integrate_adaptive_2d(
      [&](double x, double y) { return intensity(x, y) * std::exp(-od_profile(x, y)); }, -lim, lim,
      -lim, lim, kRelTol);
  const auto den = fitkit::integrate_adaptive_2d(intensity, -lim, lim, -lim, lim, kRelTol);

  BeamAverage out;
  out.mean_transmission = num.value / den.value;
  out.od_eff = -std::log(out.mean_transmission);
  out.error_estimate = out.mean_transmission * (num.error_estimate / std::abs(num.value) +
                                                den.error_estimate / std::abs(den.value));
  out.evaluations = num.evaluations + den.evaluations;
  return out;
}

}  // namespace rydtrans::eit
