#pragma once

// Figures of merit for a single-photon transistor: extinction and gain from
// target traces, blockade recovery time, p0 from the bimodal click
// histogram, single-shot discrimination fidelity and storage efficiency.

#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "rydtrans/transistor.hpp"

namespace rydtrans::analysis {

/// Radiative lifetime of the Rydberg state at room temperature, for comparison
/// with fitted blockade lifetimes.
inline constexpr double kRadiativeLifetimeMs = 0.14;

struct TransistorMetrics {
  double n_trans = 0.0;
  double n_trans_ref = 0.0;
  double n_g = 0.0;
  double ratio = 0.0;        // N_trans / N_trans,ref
  double suppression = 0.0;  // 1 - ratio, reported as "extinction"
  double gain = 0.0;         // |N_trans,ref - N_trans| / N_g
};

TransistorMetrics transistor_metrics(double n_trans, double n_trans_ref, double n_g);

/// Integrates both traces (sum of per-bin photons). Throws ConfigError if the
/// binning differs or n_trans_ref, n_g are not positive.
TransistorMetrics extinction_gain(const mc::Trace& gated, const mc::Trace& reference, double n_g);

struct DecayFit {
  std::optional<double> tau_ms;
  std::optional<double> tau_stderr_ms;
  double depth = 0.0;
  double depth_stderr = 0.0;
  bool degenerate = false;
  double residual = 0.0;
  int iterations = 0;
  int points = 0;
  std::string note;
};

/// Fits gated/reference = 1 - B exp(-t / tau) over bins with t >= start_us.
/// A ratio indistinguishable from 1 is reported as degenerate with no tau.
DecayFit decay_fit(const mc::Trace& gated, const mc::Trace& reference, double start_us = 0.0);

/// Reference distribution for the bimodal fit: a Poisson mean or a measured
/// histogram.
using Reference = std::variant<double, mc::ClickHistogram>;

std::vector<double> reference_pmf(const Reference& ref, std::int64_t k_max);

struct BimodalFit {
  double p0 = 0.0;
  double p0_stderr = 0.0;
  double n_cut = 0.0;
  int bins_used = 0;
  /// max(0, gated - p0 * reference) per click number, normalised to shots.
  std::vector<double> subtracted;
};

/// Least-squares scale p0 of the reference PMF against the gated histogram
/// for N_c > n_cut, counts weighted by 1 / max(count, 1).
BimodalFit bimodal_fit(const mc::ClickHistogram& gated, const Reference& reference, double n_cut);

struct CutoffScan {
  std::vector<std::pair<double, double>> points;  // (n_cut, p0)
  double p0_min = 0.0;
  double p0_max = 0.0;
  double spread() const { return p0_max - p0_min; }
};

CutoffScan cutoff_scan(const mc::ClickHistogram& gated, const Reference& reference, double cut_lo,
                       double cut_hi);

struct ThresholdPoint {
  double threshold = 0.0;
  double c0 = 0.0;  // P(N_c > thr | nothing stored)
  double c1 = 0.0;  // P(N_c <= thr | excitation stored)
};

struct DiscriminationResult {
  std::optional<double> p0;
  std::optional<std::pair<double, double>> p0_range;
  double threshold = 0.0;
  double c0 = 0.0;
  double c1 = 0.0;
  double fidelity = 0.0;
};

/// Half-integer thresholds -0.5 .. L - 0.5 for PMFs of length up to L.
std::vector<double> default_thresholds(std::size_t pmf_length);

std::vector<ThresholdPoint> threshold_curve(const std::vector<double>& pmf_ref,
                                            const std::vector<double>& pmf_blocked,
                                            const std::vector<double>& thresholds);

/// Threshold maximising min(c0, c1), ties to the lower threshold. Both PMFs
/// must be normalised to 1e-6; thresholds must be half-integers.
DiscriminationResult fidelity_threshold(const std::vector<double>& pmf_ref,
                                        const std::vector<double>& pmf_blocked,
                                        std::vector<double> thresholds = {});

/// Poisson mean of a blocked branch for which c1 and c0 = P(N > thr | mu_ref)
/// balance at the given threshold; exhaustive scan on a grid of `step`.
double calibrate_blocked_mean(double mu_ref, double threshold = 5.5, double step = 1e-4);

struct StorageEstimate {
  double eta_lower = 0.0;                // (1 - p0) / N_g
  std::optional<double> eta_poisson;     // -ln(p0) / N_g, empty for p0 = 0
  double n_s_bound = 0.0;                // 1 - p0
};

StorageEstimate storage_bounds(double p0, double n_g);

struct ResonanceFit {
  double center = 0.0;
  double width = 0.0;
  double amplitude = 0.0;
  double offset = 0.0;
  double center_stderr = 0.0;
  double amplitude_stderr = 0.0;
  bool converged = false;
  bool low_significance = false;  // |amplitude| <= 3 sigma or no convergence
};

ResonanceFit lorentzian_resonance_fit(const std::vector<std::pair<double, double>>& points);

}  // namespace rydtrans::analysis
