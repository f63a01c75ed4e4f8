#include "rydtrans/transistor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <thread>

#include "rydtrans/errors.hpp"
#include "rydtrans/probability.hpp"

namespace rydtrans::mc {

namespace {

void require(bool ok, const char* field, const char* what) {
  if (!ok) throw ConfigError(std::string(field) + " " + what);
}

bool unit_interval(double v) { return v >= 0.0 && v <= 1.0; }

double tau_us(const ExperimentConfig& c) { return c.tau_blockade_ms * 1e3; }

double lognormal_sigma(double cv) { return std::sqrt(std::log1p(cv * cv)); }

// Gauss-Legendre panels used for the decay-time integral.
constexpr int kPanels = 32;
constexpr int kNodesPerPanel = 16;

}  // namespace

void ExperimentConfig::validate() const {
  require(std::isfinite(n_gate_photons) && n_gate_photons >= 0.0, "n_gate_photons", "must be >= 0");
  require(std::isfinite(storage_mean) && storage_mean >= 0.0, "storage_mean", "must be >= 0");
  require(unit_interval(eta_det), "eta_det", "must lie in [0, 1]");
  require(unit_interval(t0_transmission), "t0_transmission", "must lie in [0, 1]");
  require(std::isfinite(photon_rate_in) && photon_rate_in >= 0.0, "photon_rate_in", "must be >= 0");
  require(std::isfinite(pulse_duration_us) && pulse_duration_us > 0.0, "pulse_duration_us", "must be > 0");
  require(std::isfinite(bin_width_us) && bin_width_us > 0.0, "bin_width_us", "must be > 0");
  require(std::isfinite(tau_blockade_ms) && tau_blockade_ms > 0.0, "tau_blockade_ms", "must be > 0");
  require(unit_interval(blockade_leak), "blockade_leak", "must lie in [0, 1]");
  require(std::isfinite(dark_time_us) && dark_time_us >= 0.0, "dark_time_us", "must be >= 0");
  require(std::isfinite(cycle_time_ms) && cycle_time_ms > 0.0, "cycle_time_ms", "must be > 0");
  require(std::isfinite(overdispersion) && overdispersion >= 0.0, "overdispersion", "must be >= 0");
  require(pulse_duration_us / bin_width_us <= 1e7, "bin_width_us", "gives too many bins");
}

double ExperimentConfig::p0() const { return std::exp(-storage_mean); }

double ExperimentConfig::reference_mean_clicks() const {
  return photon_rate_in * eta_det * t0_transmission * pulse_duration_us;
}

double ExperimentConfig::reference_transmitted() const {
  return photon_rate_in * t0_transmission * pulse_duration_us;
}

int ExperimentConfig::n_bins() const {
  const double ratio = pulse_duration_us / bin_width_us;
  const double whole = std::round(ratio);
  // Tolerate round-off such as 30 / 0.1.
  if (std::abs(ratio - whole) <= 1e-9 * std::max(1.0, ratio)) return std::max(1, static_cast<int>(whole));
  return static_cast<int>(std::ceil(ratio));
}

double ExperimentConfig::bin_start_us(int i) const { return i * bin_width_us; }

double ExperimentConfig::bin_width_of(int i) const {
  return std::min(bin_width_us, pulse_duration_us - bin_start_us(i));
}

ExperimentConfig ExperimentConfig::transistor_trace() {
  ExperimentConfig c;
  c.n_gate_photons = 1.0;
  c.storage_mean = 2.5153874366009097;
  c.pulse_duration_us = 10.0;
  c.bin_width_us = 2.0;
  c.photon_rate_in = 4.586104104563173;
  c.blockade_leak = 0.02;
  return c;
}

ExperimentConfig ExperimentConfig::click_histogram() {
  ExperimentConfig c;
  c.n_gate_photons = 1.0;
  c.storage_mean = -std::log(0.60);
  c.pulse_duration_us = 30.0;
  c.bin_width_us = 2.0;
  c.photon_rate_in = 2.4433106575963714;
  c.blockade_leak = 0.3308949900119952;
  c.cycle_time_ms = 0.7;
  return c;
}

std::uint64_t shot_seed(std::uint64_t base_seed, std::uint64_t index) {
  // splitmix64 finaliser over a Weyl sequence keyed by the base seed.
  std::uint64_t z = base_seed + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

double clicks_given_blockade(const ExperimentConfig& c, double blocked_us) {
  const double l = std::clamp(blocked_us, 0.0, c.pulse_duration_us);
  return c.photon_rate_in * c.eta_det * c.t0_transmission *
         (c.pulse_duration_us - (1.0 - c.blockade_leak) * l);
}

CycleOutcome simulate_cycle(const ExperimentConfig& config, std::uint64_t seed, bool gated) {
  config.validate();
  std::mt19937_64 rng(seed);
  CycleOutcome out;

  const double storage = gated ? config.storage_mean : 0.0;
  if (storage > 0.0) out.n_stored = std::poisson_distribution<int>(storage)(rng);
  out.decay_time_us = std::numeric_limits<double>::infinity();
  if (out.n_stored > 0) {
    std::exponential_distribution<double> decay(1.0 / tau_us(config));
    double last = 0.0;
    for (int i = 0; i < out.n_stored; ++i) last = std::max(last, decay(rng));
    out.decay_time_us = last;
  }

  double scale = 1.0;
  if (config.overdispersion > 0.0) {
    const double s = lognormal_sigma(config.overdispersion);
    scale = std::exp(s * std::normal_distribution<double>(0.0, 1.0)(rng) - 0.5 * s * s);
  }

  const double blocked_until = out.n_stored > 0 ? out.decay_time_us - config.dark_time_us : 0.0;
  const double rate = config.photon_rate_in * config.eta_det * config.t0_transmission * scale;
  const int bins = config.n_bins();
  out.clicks_per_bin.resize(static_cast<std::size_t>(bins));
  for (int i = 0; i < bins; ++i) {
    const double a = config.bin_start_us(i);
    const double w = config.bin_width_of(i);
    const double overlap = std::clamp(blocked_until - a, 0.0, w);
    const double mean = rate * (w - (1.0 - config.blockade_leak) * overlap);
    std::int64_t k = 0;
    if (mean > 0.0) k = std::poisson_distribution<std::int64_t>(mean)(rng);
    out.clicks_per_bin[static_cast<std::size_t>(i)] = k;
    out.total_clicks += k;
  }
  return out;
}

ClickHistogram::ClickHistogram(std::map<std::int64_t, std::int64_t> counts) : counts_(std::move(counts)) {
  long double sum = 0.0L;
  for (const auto& [k, c] : counts_) {
    if (k < 0 || c < 0) throw ConfigError("histogram: negative click number or count");
    n_shots_ += c;
    sum += static_cast<long double>(k) * c;
  }
  if (n_shots_ == 0) return;
  const long double mean = sum / n_shots_;
  long double ss = 0.0L;
  for (const auto& [k, c] : counts_) ss += c * (k - mean) * (k - mean);
  mean_ = static_cast<double>(mean);
  variance_ = n_shots_ > 1 ? static_cast<double>(ss / (n_shots_ - 1)) : 0.0;
}

std::int64_t ClickHistogram::count(std::int64_t n_clicks) const {
  const auto it = counts_.find(n_clicks);
  return it == counts_.end() ? 0 : it->second;
}

std::int64_t ClickHistogram::max_clicks() const {
  return counts_.empty() ? -1 : counts_.rbegin()->first;
}

std::vector<double> ClickHistogram::frequencies(std::int64_t k_max) const {
  std::vector<double> out(static_cast<std::size_t>(std::max<std::int64_t>(k_max + 1, 0)), 0.0);
  if (n_shots_ == 0) return out;
  for (const auto& [k, c] : counts_) {
    if (k <= k_max) out[static_cast<std::size_t>(k)] = static_cast<double>(c) / n_shots_;
  }
  return out;
}

namespace {

struct Accumulator {
  std::map<std::int64_t, std::int64_t> counts;
  std::vector<std::int64_t> sum;
  std::vector<std::int64_t> sum_sq;
};

}  // namespace

RunResult simulate_run(const ExperimentConfig& config, std::int64_t n_shots, std::uint64_t base_seed,
                       bool gated, unsigned threads) {
  config.validate();
  if (n_shots < 1) throw ConfigError("simulate_run needs at least one shot");
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::int64_t>(threads, n_shots));

  const auto bins = static_cast<std::size_t>(config.n_bins());
  std::vector<Accumulator> parts(threads);
  const auto work = [&](unsigned t) {
    Accumulator& acc = parts[t];
    acc.sum.assign(bins, 0);
    acc.sum_sq.assign(bins, 0);
    const std::int64_t begin = n_shots * t / threads;
    const std::int64_t end = n_shots * (t + 1) / threads;
    for (std::int64_t i = begin; i < end; ++i) {
      const auto out = simulate_cycle(config, shot_seed(base_seed, static_cast<std::uint64_t>(i)), gated);
      ++acc.counts[out.total_clicks];
      for (std::size_t b = 0; b < bins; ++b) {
        acc.sum[b] += out.clicks_per_bin[b];
        acc.sum_sq[b] += out.clicks_per_bin[b] * out.clicks_per_bin[b];
      }
    }
  };
  if (threads == 1) {
    work(0);
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(work, t);
  }

  Accumulator total;
  total.sum.assign(bins, 0);
  total.sum_sq.assign(bins, 0);
  for (const auto& p : parts) {
    for (const auto& [k, c] : p.counts) total.counts[k] += c;
    for (std::size_t b = 0; b < bins; ++b) {
      total.sum[b] += p.sum[b];
      total.sum_sq[b] += p.sum_sq[b];
    }
  }

  RunResult res;
  res.histogram = ClickHistogram(std::move(total.counts));
  const double n = static_cast<double>(n_shots);
  for (std::size_t b = 0; b < bins; ++b) {
    const int i = static_cast<int>(b);
    const double mean = total.sum[b] / n;
    const double var = n > 1 ? std::max(0.0, (total.sum_sq[b] - n * mean * mean) / (n - 1)) : 0.0;
    res.trace.t_us.push_back(config.bin_start_us(i) + 0.5 * config.bin_width_of(i));
    res.trace.bin_width_us.push_back(config.bin_width_of(i));
    res.trace.photons.push_back(config.eta_det > 0.0 ? mean / config.eta_det : 0.0);
    res.trace.stderr_.push_back(config.eta_det > 0.0 ? std::sqrt(var / n) / config.eta_det : 0.0);
  }
  return res;
}

double blockade_survival(const ExperimentConfig& c, double t_us) {
  if (t_us < 0.0) return 1.0;
  // P(max of Poisson(S) exponentials <= s) = exp(-S e^{-s/tau}).
  const double s = t_us + c.dark_time_us;
  return -std::expm1(-c.storage_mean * std::exp(-s / tau_us(c)));
}

double expected_suppression(const ExperimentConfig& c) {
  c.validate();
  if (c.storage_mean == 0.0) return 0.0;
  const auto r = fitkit::integrate_adaptive([&](double t) { return blockade_survival(c, t); }, 0.0,
                                            c.pulse_duration_us, 1e-12);
  return (1.0 - c.blockade_leak) * r.value / c.pulse_duration_us;
}

Trace expected_trace(const ExperimentConfig& config, bool gated) {
  config.validate();
  ExperimentConfig c = config;
  if (!gated) c.storage_mean = 0.0;
  Trace tr;
  const double rate = c.photon_rate_in * c.t0_transmission;
  for (int i = 0; i < c.n_bins(); ++i) {
    const double a = c.bin_start_us(i);
    const double w = c.bin_width_of(i);
    double blocked = 0.0;
    if (c.storage_mean > 0.0) {
      blocked = fitkit::integrate_adaptive([&](double t) { return blockade_survival(c, t); }, a, a + w,
                                           1e-12)
                    .value;
    }
    tr.t_us.push_back(a + 0.5 * w);
    tr.bin_width_us.push_back(w);
    tr.photons.push_back(rate * (w - (1.0 - c.blockade_leak) * blocked));
    tr.stderr_.push_back(0.0);
  }
  return tr;
}

double blocked_branch_mean(const ExperimentConfig& c) {
  c.validate();
  if (c.storage_mean == 0.0) throw NumericalError("blocked branch is empty when storage_mean is 0");
  const auto r = fitkit::integrate_adaptive([&](double t) { return blockade_survival(c, t); }, 0.0,
                                            c.pulse_duration_us, 1e-12);
  const double mean_blocked = r.value / (1.0 - c.p0());
  return clicks_given_blockade(c, mean_blocked);
}

namespace {

template <typename F>
double bisect(F f, double lo, double hi, const char* what) {
  double flo = f(lo);
  const double fhi = f(hi);
  if ((flo < 0.0) == (fhi < 0.0)) throw NumericalError(std::string(what) + ": target not bracketed");
  for (int i = 0; i < 200 && hi - lo > 1e-15 * std::max(1.0, std::abs(hi)); ++i) {
    const double mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    if ((fm < 0.0) == (flo < 0.0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace

double calibrate_storage_mean(ExperimentConfig config, double target_suppression) {
  return bisect(
      [&](double s) {
        config.storage_mean = s;
        return expected_suppression(config) - target_suppression;
      },
      0.0, 50.0, "storage_mean calibration");
}

double calibrate_blockade_leak(ExperimentConfig config, double target_blocked_mean) {
  return bisect(
      [&](double leak) {
        config.blockade_leak = leak;
        return blocked_branch_mean(config) - target_blocked_mean;
      },
      0.0, 1.0, "blockade_leak calibration");
}

namespace {

// pmf[k] += w * Poisson(k; mu), by recurrence where e^{-mu} is representable.
void add_scaled_poisson(std::vector<double>& pmf, double mu, double w, std::int64_t k_max) {
  if (mu > 600.0) {
    for (std::int64_t k = 0; k <= k_max; ++k) pmf[static_cast<std::size_t>(k)] += w * fitkit::poisson_pmf(mu, k);
    return;
  }
  double term = std::exp(-mu);
  for (std::int64_t k = 0; k <= k_max; ++k) {
    pmf[static_cast<std::size_t>(k)] += w * term;
    term *= mu / static_cast<double>(k + 1);
  }
}

// Blocked-branch PMF (unnormalised, weight 1 - p0) for a fixed reference mean.
void add_blocked_branch(const ExperimentConfig& c, double mu_ref, std::int64_t k_max,
                        const fitkit::QuadratureRule& gl, std::vector<double>& pmf, double weight) {
  const double tau = tau_us(c);
  const double s_mean = c.storage_mean;
  const double t_on = c.dark_time_us;
  const double t_off = c.dark_time_us + c.pulse_duration_us;
  const auto mu_of_blocked = [&](double l) {
    return mu_ref * (1.0 - (1.0 - c.blockade_leak) * std::clamp(l, 0.0, c.pulse_duration_us) /
                               c.pulse_duration_us);
  };
  const auto add_poisson = [&](double mu, double w) {
    if (w > 0.0) add_scaled_poisson(pmf, mu, weight * w, k_max);
  };

  const double p_n0 = std::exp(-s_mean);
  double tail = 1.0 - p_n0;
  for (int n = 1; tail > 1e-16; ++n) {
    const double w_n = fitkit::poisson_pmf(s_mean, n);
    tail -= w_n;
    if (w_n == 0.0) {
      if (n > s_mean) break;
      continue;
    }
    // F_n(D) = (1 - e^{-D/tau})^n; integrate over u = F_n(D).
    const double u_on = std::pow(-std::expm1(-t_on / tau), n);
    const double u_off = std::pow(-std::expm1(-t_off / tau), n);
    add_poisson(mu_ref, w_n * u_on);                       // decayed before the pulse
    add_poisson(mu_of_blocked(c.pulse_duration_us), w_n * (1.0 - u_off));  // blocked throughout
    const double panel = (u_off - u_on) / kPanels;
    if (panel <= 0.0) continue;
    for (int p = 0; p < kPanels; ++p) {
      const double a = u_on + p * panel;
      for (Eigen::Index q = 0; q < gl.nodes.size(); ++q) {
        const double u = a + 0.5 * panel * (gl.nodes[q] + 1.0);
        const double d = -tau * std::log1p(-std::pow(u, 1.0 / n));
        add_poisson(mu_of_blocked(d - t_on), w_n * 0.5 * panel * gl.weights[q]);
      }
    }
  }
}

std::int64_t default_k_max(const ExperimentConfig& c) {
  const double mu = c.reference_mean_clicks() * (1.0 + 10.0 * c.overdispersion);
  return static_cast<std::int64_t>(std::ceil(mu + 15.0 * std::sqrt(mu + 1.0) + 25.0));
}

std::vector<double> click_pmf_impl(const ExperimentConfig& c, bool gated, std::int64_t k_max,
                                   bool blocked_only) {
  c.validate();
  if (k_max < 0) k_max = default_k_max(c);
  std::vector<double> pmf(static_cast<std::size_t>(k_max + 1), 0.0);
  const double p0 = gated ? c.p0() : 1.0;
  const auto gl = fitkit::gauss_legendre(kNodesPerPanel);

  fitkit::QuadratureRule scale_rule;
  if (c.overdispersion > 0.0) {
    const double s = lognormal_sigma(c.overdispersion);
    scale_rule = fitkit::gauss_hermite_normal(64);
    scale_rule.nodes = (s * scale_rule.nodes.array() - 0.5 * s * s).exp();
  } else {
    scale_rule.nodes = Eigen::VectorXd::Ones(1);
    scale_rule.weights = Eigen::VectorXd::Ones(1);
  }

  for (Eigen::Index i = 0; i < scale_rule.nodes.size(); ++i) {
    const double mu_ref = c.reference_mean_clicks() * scale_rule.nodes[i];
    const double w = scale_rule.weights[i];
    if (!blocked_only && p0 > 0.0) add_scaled_poisson(pmf, mu_ref, w * p0, k_max);
    if (gated && c.storage_mean > 0.0) add_blocked_branch(c, mu_ref, k_max, gl, pmf, w);
  }

  double mass = std::accumulate(pmf.begin(), pmf.end(), 0.0);
  const double expected = blocked_only ? 1.0 - p0 : 1.0;
  if (!std::isfinite(mass) || std::abs(mass - expected) > 1e-9 * std::max(expected, 1e-300) + 1e-12) {
    throw NumericalError("click PMF is not normalisable on 0.." + std::to_string(k_max) +
                         " (mass " + std::to_string(mass) + ", expected " + std::to_string(expected) + ")");
  }
  if (blocked_only) {
    for (double& v : pmf) v /= mass;
  }
  return pmf;
}

}  // namespace

std::vector<double> analytic_click_pmf(const ExperimentConfig& config, bool gated, std::int64_t k_max) {
  return click_pmf_impl(config, gated, k_max, false);
}

std::vector<double> blocked_branch_pmf(const ExperimentConfig& config, std::int64_t k_max) {
  if (config.storage_mean <= 0.0) throw NumericalError("blocked branch is empty when storage_mean is 0");
  return click_pmf_impl(config, true, k_max, true);
}

double total_variation(const ClickHistogram& hist, const std::vector<double>& pmf) {
  const std::int64_t k_top = std::max<std::int64_t>(hist.max_clicks(), static_cast<std::int64_t>(pmf.size()) - 1);
  const auto freq = hist.frequencies(k_top);
  double tv = 0.0;
  for (std::int64_t k = 0; k <= k_top; ++k) {
    const double p = k < static_cast<std::int64_t>(pmf.size()) ? pmf[static_cast<std::size_t>(k)] : 0.0;
    tv += std::abs(freq[static_cast<std::size_t>(k)] - p);
  }
  return 0.5 * tv;
}

}  // namespace rydtrans::mc
