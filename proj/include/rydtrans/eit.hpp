#pragma once

// Three-level ladder EIT: probe absorption, transmission spectra, spectrum
// fitting and the optical depth of a thermal cloud in a harmonic trap.
//
// Frequencies are angular frequencies quoted in units of 2pi x MHz, i.e. the
// number 5.75 means 2pi x 5.75 MHz.

#include <Eigen/Dense>
#include <array>
#include <complex>
#include <functional>
#include <optional>

namespace rydtrans::eit {

/// Rb D1 (5P1/2) natural linewidth.
inline constexpr double kRbD1Linewidth = 5.75;

struct EitParams {
  double gamma_e = kRbD1Linewidth;
  double omega_c = 0.0;
  double gamma_r = 0.0;
  double delta_c = 0.0;
  double od = 0.0;

  /// Throws ConfigError naming the offending field.
  void validate() const;

  /// od 5, FWHM 2pi x 1.9 MHz, T(0) = 0.49 with gamma_e fixed at the D1 value.
  static EitParams operating_point();
};

/// Normalised absorption A(delta_s) = Re[(G/2) / ((G/2 - i ds) + (Wc^2/4) / (gr - i (ds + dc)))],
/// written with the two-photon factor in the numerator so the transparency
/// point gives exactly zero. Without control light the two-level Lorentzian
/// is returned directly, which also covers the 0/0 point at gr = 0.
template <typename Scalar>
Scalar absorption(Scalar gamma_e, Scalar omega_c, Scalar gamma_r, Scalar delta_c, Scalar delta_s) {
  using C = std::complex<Scalar>;
  const Scalar half = gamma_e / Scalar(2);
  if (omega_c == Scalar(0)) return half * half / (half * half + delta_s * delta_s);
  const C two_photon(gamma_r, -(delta_s + delta_c));
  const C num = half * two_photon;
  const C den = C(half, -delta_s) * two_photon + omega_c * omega_c / Scalar(4);
  if (den == C(0)) return Scalar(0);
  return (num / den).real();
}

double eit_absorption(const EitParams& params, double delta_s);

/// exp(-od * A) evaluated element-wise.
Eigen::VectorXd transmission(const EitParams& params, const Eigen::VectorXd& detunings);

struct Spectrum {
  Eigen::VectorXd detunings;
  Eigen::VectorXd transmissions;

  void validate() const;
};

struct WindowShape {
  double peak_detuning = 0.0;
  double peak_transmission = 0.0;
  std::optional<double> fwhm;  // empty if the half level is never crossed
  bool grid_too_coarse = false;
};

/// Transparency window around the two-photon resonance. The half level on
/// each side sits halfway between the peak and the adjacent absorption
/// minimum; crossings use linear interpolation between grid points. The grid
/// is too coarse when its spacing exceeds FWHM / 10.
WindowShape window_shape(const Spectrum& spectrum, double two_photon_detuning);

struct SpectrumResult {
  Spectrum spectrum;
  WindowShape window;
  double t0 = 1.0;  // T at delta_s = 0
};

SpectrumResult transmission_spectrum(const EitParams& params, const Eigen::VectorXd& detunings);

/// FWHM on a fine internal grid spanning [lo, hi].
std::optional<double> fwhm_of(const EitParams& params, double lo, double hi, int points = 20001);

struct SpectrumFit {
  EitParams params;
  Eigen::Matrix3d covariance;  // (od, omega_c, gamma_r)
  std::optional<double> fwhm;
  double t0 = 0.0;
  double residual = 0.0;
  int iterations = 0;
};

/// Least squares for (od, omega_c, gamma_r); gamma_e and delta_c stay at
/// their values in init. Throws NumericalError carrying the residual and
/// iteration count if the fit does not converge.
SpectrumFit fit_spectrum(const Spectrum& spectrum, const EitParams& init);

struct CloudParams {
  double atom_number = 1.5e5;
  double temperature_uk = 0.33;
  std::array<double, 3> trap_freqs_hz{136.0, 37.0, 37.0};
  double wavelength_nm = 795.0;
  double beam_waist_um = 8.0;
  /// Relative line strength of F=1,mF=-1 -> F'=2,mF'=-2 on the D1 line.
  double cross_section_prefactor = 0.5;
  double mass_amu = 86.909180527;

  void validate() const;
  /// Thermal rms radii sqrt(kB T / (m w^2)) in um.
  std::array<double, 3> thermal_widths_um() const;
  /// prefactor * 3 lambda^2 / (2 pi) in um^2.
  double cross_section_um2() const;
};

/// On-axis OD along z: sigma0 * N / (2 pi sigma_x sigma_y).
double cloud_peak_od(const CloudParams& cloud);

/// OD(x, y) transverse to the beam for the Gaussian column density.
std::function<double(double, double)> cloud_od_profile(const CloudParams& cloud);

struct BeamAverage {
  double mean_transmission = 1.0;
  double od_eff = 0.0;
  double error_estimate = 0.0;
  int evaluations = 0;
};

/// <T> = int I exp(-OD) / int I over a Gaussian probe of the cloud's beam
/// waist, integrated adaptively over +-4 waists to relative 1e-6.
BeamAverage beam_averaged_transmission(const CloudParams& cloud,
                                       const std::function<double(double, double)>& od_profile);

}  // namespace rydtrans::eit
