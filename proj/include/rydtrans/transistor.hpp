#pragma once

// Monte Carlo model of gate-target cycles in a Rydberg single-photon
// transistor.
//
// Per shot: a Poisson number of gate excitations is stored; the blockade
// lasts until the last of them has decayed (each exponential with mean tau).
// The target pulse starts dark_time after storage. Detected clicks in each
// time bin are Poisson with mean rate * eta_det * T(t) * dt, where T(t) is
// T0 * leak while blockaded and T0 afterwards. An optional per-shot
// lognormal factor with unit mean and coefficient of variation
// `overdispersion` multiplies the incident rate.

#include <cstdint>
#include <map>
#include <vector>

namespace rydtrans::mc {

struct ExperimentConfig {
  double n_gate_photons = 1.0;
  double storage_mean = 0.0;      // mean stored excitations N_s
  double eta_det = 0.24;
  double t0_transmission = 0.49;
  double photon_rate_in = 1.0;    // incident target photons per us
  double pulse_duration_us = 30.0;
  double bin_width_us = 2.0;
  double tau_blockade_ms = 0.10;
  double blockade_leak = 0.02;
  double dark_time_us = 0.15;
  double cycle_time_ms = 1.0;
  double overdispersion = 0.0;

  /// Throws ConfigError naming the first invalid field.
  void validate() const;

  double p0() const;
  /// Mean detected clicks of a reference (no gate) pulse.
  double reference_mean_clicks() const;
  /// Mean transmitted photons of a reference pulse (clicks / eta_det).
  double reference_transmitted() const;
  int n_bins() const;
  /// Start and width of bin i; the last bin is shortened to end with the pulse.
  double bin_start_us(int i) const;
  double bin_width_of(int i) const;

  /// Target-trace regime: 10 us pulse, storage tuned for 0.89 suppression
  /// and 20 photons of gain at one gate photon.
  static ExperimentConfig transistor_trace();
  /// Click-histogram regime: 30 us pulse, 8.62 reference clicks, p0 = 0.60.
  static ExperimentConfig click_histogram();
};

struct CycleOutcome {
  int n_stored = 0;
  double decay_time_us = 0.0;  // +inf when nothing was stored
  std::vector<std::int64_t> clicks_per_bin;
  std::int64_t total_clicks = 0;
};

/// Counter-based stream seed for shot `index`.
std::uint64_t shot_seed(std::uint64_t base_seed, std::uint64_t index);

/// One gated cycle. `gated == false` forces storage_mean to zero.
CycleOutcome simulate_cycle(const ExperimentConfig& config, std::uint64_t seed, bool gated = true);

class ClickHistogram {
 public:
  ClickHistogram() = default;
  explicit ClickHistogram(std::map<std::int64_t, std::int64_t> counts);

  const std::map<std::int64_t, std::int64_t>& counts() const { return counts_; }
  std::int64_t n_shots() const { return n_shots_; }
  double mean() const { return mean_; }
  /// Sample variance (n - 1 denominator).
  double variance() const { return variance_; }
  std::int64_t count(std::int64_t n_clicks) const;
  std::int64_t max_clicks() const;
  /// Normalised frequencies for N_c = 0..k_max.
  std::vector<double> frequencies(std::int64_t k_max) const;

 private:
  std::map<std::int64_t, std::int64_t> counts_;
  std::int64_t n_shots_ = 0;
  double mean_ = 0.0;
  double variance_ = 0.0;
};

struct Trace {
  std::vector<double> t_us;       // bin centres
  std::vector<double> bin_width_us;
  std::vector<double> photons;    // mean transmitted photons per bin
  std::vector<double> stderr_;    // standard error of the mean, same units
};

struct RunResult {
  ClickHistogram histogram;
  Trace trace;
};

/// Aggregates n_shots cycles with seeds shot_seed(base_seed, i). All
/// reductions are on integers, so the result does not depend on `threads`
/// (0 = hardware concurrency).
RunResult simulate_run(const ExperimentConfig& config, std::int64_t n_shots, std::uint64_t base_seed,
                       bool gated, unsigned threads = 0);

/// Mean clicks given the blockade lasted `blocked_us` into the target pulse.
double clicks_given_blockade(const ExperimentConfig& config, double blocked_us);

/// P(blockade still on at time t into the target pulse), averaged over the
/// stored-excitation number (including shots with nothing stored).
double blockade_survival(const ExperimentConfig& config, double t_us);

/// 1 - <N_trans> / N_trans,ref in expectation.
double expected_suppression(const ExperimentConfig& config);

/// Expected transmitted photons per bin.
Trace expected_trace(const ExperimentConfig& config, bool gated);

/// Mean clicks of the blocked branch (at least one excitation stored).
double blocked_branch_mean(const ExperimentConfig& config);

/// storage_mean giving the requested expected suppression (bisection).
double calibrate_storage_mean(ExperimentConfig config, double target_suppression);

/// blockade_leak giving the requested blocked-branch mean click number.
double calibrate_blockade_leak(ExperimentConfig config, double target_blocked_mean);

/// Click-number PMF for N_c = 0..k_max. Reference: Poisson(mu_ref). Gated:
/// p0 Poisson(mu_ref) + sum_{n>=1} P(n) int Poisson(mu(D)) dF_n(D) with the
/// decay integral done by composite Gauss-Legendre in the CDF variable.
/// Overdispersion is folded in by Gauss-Hermite quadrature over the lognormal
/// rate factor. k_max < 0 picks a range holding all but ~1e-14 of the mass.
/// Throws NumericalError if the mass is not 1 within 1e-9 on that range.
std::vector<double> analytic_click_pmf(const ExperimentConfig& config, bool gated,
                                       std::int64_t k_max = -1);

/// Distribution of N_c given at least one stored excitation, normalised.
std::vector<double> blocked_branch_pmf(const ExperimentConfig& config, std::int64_t k_max = -1);

/// Total-variation distance between a histogram and a PMF.
double total_variation(const ClickHistogram& hist, const std::vector<double>& pmf);

}  // namespace rydtrans::mc
