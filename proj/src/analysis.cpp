#include "rydtrans/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rydtrans/errors.hpp"
#include "rydtrans/fitkit.hpp"
#include "rydtrans/probability.hpp"

namespace rydtrans::analysis {

namespace {

bool is_half_integer(double v) {
  const double twice = 2.0 * v;
  return std::abs(twice - std::round(twice)) < 1e-9 && static_cast<long long>(std::llround(twice)) % 2 != 0;
}

void require_same_binning(const mc::Trace& a, const mc::Trace& b) {
  if (a.t_us.size() != b.t_us.size() || a.photons.size() != a.t_us.size() ||
      b.photons.size() != b.t_us.size()) {
    throw ConfigError("traces have different numbers of bins");
  }
  for (std::size_t i = 0; i < a.t_us.size(); ++i) {
    if (std::abs(a.t_us[i] - b.t_us[i]) > 1e-9 * std::max(1.0, std::abs(a.t_us[i]))) {
      throw ConfigError("traces use different bin times (bin " + std::to_string(i) + ")");
    }
  }
}

}  // namespace

TransistorMetrics transistor_metrics(double n_trans, double n_trans_ref, double n_g) {
  if (!(n_trans_ref > 0.0)) throw ConfigError("reference photon number must be > 0");
  if (!(n_g > 0.0)) throw ConfigError("gate photon number must be > 0");
  if (!(n_trans >= 0.0)) throw ConfigError("transmitted photon number must be >= 0");
  TransistorMetrics m;
  m.n_trans = n_trans;
  m.n_trans_ref = n_trans_ref;
  m.n_g = n_g;
  m.ratio = n_trans / n_trans_ref;
  m.suppression = 1.0 - m.ratio;
  m.gain = std::abs(n_trans_ref - n_trans) / n_g;
  return m;
}

TransistorMetrics extinction_gain(const mc::Trace& gated, const mc::Trace& reference, double n_g) {
  require_same_binning(gated, reference);
  const double area_g = std::accumulate(gated.photons.begin(), gated.photons.end(), 0.0);
  const double area_r = std::accumulate(reference.photons.begin(), reference.photons.end(), 0.0);
  return transistor_metrics(area_g, area_r, n_g);
}

DecayFit decay_fit(const mc::Trace& gated, const mc::Trace& reference, double start_us) {
  require_same_binning(gated, reference);
  std::vector<double> t, ratio, weight;
  bool have_errors = !gated.stderr_.empty() && gated.stderr_.size() == gated.t_us.size() &&
                     reference.stderr_.size() == reference.t_us.size();
  for (std::size_t i = 0; i < gated.t_us.size(); ++i) {
    if (gated.t_us[i] < start_us) continue;
    const double r = reference.photons[i];
    if (!(r > 0.0)) {
      throw ConfigError("reference trace is not positive at t = " + std::to_string(reference.t_us[i]) + " us");
    }
    const double g = gated.photons[i];
    t.push_back(gated.t_us[i]);
    ratio.push_back(g / r);
    if (have_errors) {
      const double sg = gated.stderr_[i] / r;
      const double sr = g * reference.stderr_[i] / (r * r);
      const double var = sg * sg + sr * sr;
      if (var > 0.0) {
        weight.push_back(1.0 / var);
      } else {
        have_errors = false;
      }
    }
  }
  DecayFit out;
  out.points = static_cast<int>(t.size());
  if (t.size() < 3) throw ConfigError("decay fit needs at least 3 bins after the start time");

  const double max_dev = std::accumulate(ratio.begin(), ratio.end(), 0.0,
                                         [](double m, double r) { return std::max(m, std::abs(r - 1.0)); });
  if (max_dev <= 1e-12) {
    out.degenerate = true;
    out.note = "ratio is identically 1; no recovery to fit";
    return out;
  }

  // Initial guess from a log-linear fit of 1 - ratio.
  const double b0 = 1.0 - ratio.front();
  double tau0 = (t.back() - t.front()) / 3.0;
  {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int m = 0;
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double d = 1.0 - ratio[i];
      if (b0 > 0.0 && d > 0.05 * b0) {
        const double ly = std::log(d);
        sx += t[i];
        sy += ly;
        sxx += t[i] * t[i];
        sxy += t[i] * ly;
        ++m;
      }
    }
    const double den = m * sxx - sx * sx;
    if (m >= 2 && den > 0.0) {
      const double slope = (m * sxy - sx * sy) / den;
      if (slope < 0.0) tau0 = -1.0 / slope;
    }
  }
  const double b_init = std::clamp(b0 * std::exp(t.front() / tau0), -10.0, 10.0);

  const Eigen::Index n = static_cast<Eigen::Index>(t.size());
  fitkit::FitProblem problem{fitkit::Model::exponential_recovery(),
                             Eigen::Map<const Eigen::VectorXd>(t.data(), n),
                             Eigen::Map<const Eigen::VectorXd>(ratio.data(), n),
                             have_errors ? Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(weight.data(), n))
                                         : Eigen::VectorXd(),
                             Eigen::Vector2d(b_init, std::clamp(tau0, 1e-3, 1e8)),
                             fitkit::Bounds{Eigen::Vector2d(-10.0, 1e-3), Eigen::Vector2d(10.0, 1e8)}};
  const auto res = fitkit::nlls_fit(problem);
  if (!res.converged) throw NumericalError("decay fit did not converge: " + res.message);

  out.depth = res.params[0];
  out.depth_stderr = res.stderr_of(0);
  out.residual = res.residual_norm;
  out.iterations = res.iterations;
  if (!(std::abs(out.depth) > 2.0 * out.depth_stderr)) {
    out.degenerate = true;
    out.note = "recovery depth not significant (|B| <= 2 sigma)";
    return out;
  }
  out.tau_ms = res.params[1] * 1e-3;
  out.tau_stderr_ms = res.stderr_of(1) * 1e-3;
  return out;
}

std::vector<double> reference_pmf(const Reference& ref, std::int64_t k_max) {
  if (const double* mu = std::get_if<double>(&ref)) {
    if (!(*mu >= 0.0)) throw ConfigError("reference mean must be >= 0");
    return fitkit::poisson_pmf_table(*mu, k_max);
  }
  const auto& hist = std::get<mc::ClickHistogram>(ref);
  if (hist.n_shots() == 0) throw ConfigError("reference histogram is empty");
  return hist.frequencies(k_max);
}

BimodalFit bimodal_fit(const mc::ClickHistogram& gated, const Reference& reference, double n_cut) {
  if (!is_half_integer(n_cut)) throw ConfigError("n_cut must be a half-integer");
  const std::int64_t k_first = static_cast<std::int64_t>(std::ceil(n_cut));
  const std::int64_t k_last = gated.max_clicks();
  std::vector<double> xs, ys;
  int populated = 0;
  for (std::int64_t k = std::max<std::int64_t>(k_first, 0); k <= k_last; ++k) {
    const auto c = gated.count(k);
    xs.push_back(static_cast<double>(k));
    ys.push_back(static_cast<double>(c));
    if (c > 0) ++populated;
  }
  if (populated < 3) {
    throw NumericalError("bimodal fit needs >= 3 populated bins above n_cut = " + std::to_string(n_cut) +
                         ", found " + std::to_string(populated));
  }

  const std::int64_t k_max = std::max<std::int64_t>(k_last, 0);
  const auto ref = reference_pmf(reference, k_max);
  const double shots = static_cast<double>(gated.n_shots());
  const auto shape = [&ref, shots](double k) {
    const auto i = static_cast<std::size_t>(std::llround(k));
    return i < ref.size() ? shots * ref[i] : 0.0;
  };

  const Eigen::Index n = static_cast<Eigen::Index>(xs.size());
  Eigen::VectorXd x = Eigen::Map<Eigen::VectorXd>(xs.data(), n);
  Eigen::VectorXd y = Eigen::Map<Eigen::VectorXd>(ys.data(), n);
  Eigen::VectorXd w = y.cwiseMax(1.0).cwiseInverse();
  double model_mass = 0.0;
  for (double k : xs) model_mass += shape(k);
  if (!(model_mass > 0.0)) throw NumericalError("reference has no weight above n_cut");
  const double init = y.sum() / model_mass;

  fitkit::FitProblem problem{fitkit::Model::scaled_pmf(shape), x, y, w, Eigen::VectorXd::Constant(1, init), {}};
  const auto res = fitkit::nlls_fit(problem);
  if (!res.converged) throw NumericalError("bimodal fit did not converge: " + res.message);

  BimodalFit out;
  out.p0 = res.params[0];
  out.p0_stderr = res.stderr_of(0);
  out.n_cut = n_cut;
  out.bins_used = static_cast<int>(n);
  const auto freq = gated.frequencies(k_max);
  out.subtracted.resize(freq.size());
  for (std::size_t k = 0; k < freq.size(); ++k) {
    out.subtracted[k] = std::max(0.0, freq[k] - out.p0 * ref[k]);
  }
  return out;
}

CutoffScan cutoff_scan(const mc::ClickHistogram& gated, const Reference& reference, double cut_lo,
                       double cut_hi) {
  if (!is_half_integer(cut_lo) || !is_half_integer(cut_hi)) {
    throw ConfigError("cutoff range must have half-integer ends");
  }
  if (cut_hi < cut_lo) throw ConfigError("cutoff range is empty");
  CutoffScan scan;
  scan.p0_min = std::numeric_limits<double>::infinity();
  scan.p0_max = -std::numeric_limits<double>::infinity();
  for (double cut = cut_lo; cut <= cut_hi + 1e-9; cut += 1.0) {
    const double p0 = bimodal_fit(gated, reference, cut).p0;
    scan.points.emplace_back(cut, p0);
    scan.p0_min = std::min(scan.p0_min, p0);
    scan.p0_max = std::max(scan.p0_max, p0);
  }
  return scan;
}

std::vector<double> default_thresholds(std::size_t pmf_length) {
  std::vector<double> out;
  for (std::size_t k = 0; k <= pmf_length; ++k) out.push_back(static_cast<double>(k) - 0.5);
  return out;
}

std::vector<ThresholdPoint> threshold_curve(const std::vector<double>& pmf_ref,
                                            const std::vector<double>& pmf_blocked,
                                            const std::vector<double>& thresholds) {
  const std::size_t len = std::max(pmf_ref.size(), pmf_blocked.size());
  // cum[k] = P(N <= k - 1)
  std::vector<double> cum_ref(len + 1, 0.0), cum_blk(len + 1, 0.0);
  for (std::size_t k = 0; k < len; ++k) {
    cum_ref[k + 1] = cum_ref[k] + (k < pmf_ref.size() ? pmf_ref[k] : 0.0);
    cum_blk[k + 1] = cum_blk[k] + (k < pmf_blocked.size() ? pmf_blocked[k] : 0.0);
  }
  const double total_ref = cum_ref[len];
  std::vector<ThresholdPoint> out;
  out.reserve(thresholds.size());
  for (double thr : thresholds) {
    if (!is_half_integer(thr)) throw ConfigError("thresholds must be half-integers");
    // Number of click values <= thr.
    const auto below = static_cast<std::size_t>(std::clamp<double>(std::floor(thr) + 1.0, 0.0, static_cast<double>(len)));
    out.push_back({thr, std::clamp(total_ref - cum_ref[below], 0.0, 1.0), std::clamp(cum_blk[below], 0.0, 1.0)});
  }
  return out;
}

DiscriminationResult fidelity_threshold(const std::vector<double>& pmf_ref,
                                        const std::vector<double>& pmf_blocked,
                                        std::vector<double> thresholds) {
  for (const auto* pmf : {&pmf_ref, &pmf_blocked}) {
    const double mass = std::accumulate(pmf->begin(), pmf->end(), 0.0);
    if (std::abs(mass - 1.0) > 1e-6 || std::any_of(pmf->begin(), pmf->end(), [](double p) { return p < 0.0; })) {
      throw ConfigError("fidelity_threshold needs normalised PMFs (mass " + std::to_string(mass) + ")");
    }
  }
  if (thresholds.empty()) thresholds = default_thresholds(std::max(pmf_ref.size(), pmf_blocked.size()));
  std::sort(thresholds.begin(), thresholds.end());
  const auto curve = threshold_curve(pmf_ref, pmf_blocked, thresholds);

  DiscriminationResult best;
  best.fidelity = -1.0;
  for (const auto& pt : curve) {
    const double f = std::min(pt.c0, pt.c1);
    if (f > best.fidelity) {
      best.fidelity = f;
      best.threshold = pt.threshold;
      best.c0 = pt.c0;
      best.c1 = pt.c1;
    }
  }
  return best;
}

double calibrate_blocked_mean(double mu_ref, double threshold, double step) {
  if (!is_half_integer(threshold) || threshold < 0.0) throw ConfigError("threshold must be a half-integer >= 0.5");
  if (!(step > 0.0)) throw ConfigError("step must be > 0");
  const auto k = static_cast<long>(std::floor(threshold));
  const double c0 = fitkit::poisson_sf(mu_ref, k);
  // c1(mu) = P(N <= k | mu) falls with mu; keep the largest mu with c1 >= c0.
  double best = 0.0;
  for (double mu = 0.0; mu <= mu_ref; mu += step) {
    if (fitkit::poisson_cdf(mu, k) >= c0) best = mu;
  }
  return best;
}

StorageEstimate storage_bounds(double p0, double n_g) {
  if (!(p0 >= 0.0 && p0 <= 1.0)) throw ConfigError("p0 must lie in [0, 1]");
  if (!(n_g > 0.0)) throw ConfigError("gate photon number must be > 0");
  StorageEstimate s;
  s.n_s_bound = 1.0 - p0;
  s.eta_lower = s.n_s_bound / n_g;
  if (p0 > 0.0) s.eta_poisson = -std::log(p0) / n_g;
  return s;
}

ResonanceFit lorentzian_resonance_fit(const std::vector<std::pair<double, double>>& points) {
  if (points.size() < 5) throw ConfigError("resonance fit needs at least 5 points");
  const Eigen::Index n = static_cast<Eigen::Index>(points.size());
  Eigen::VectorXd x(n), y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    x[i] = points[static_cast<std::size_t>(i)].first;
    y[i] = points[static_cast<std::size_t>(i)].second;
  }
  std::vector<double> sorted(y.data(), y.data() + n);
  std::nth_element(sorted.begin(), sorted.begin() + n / 2, sorted.end());
  const double offset0 = sorted[static_cast<std::size_t>(n / 2)];
  Eigen::Index peak = 0;
  (y.array() - offset0).abs().maxCoeff(&peak);
  const double amp0 = y[peak] - offset0;
  // Width from the points above half amplitude.
  int above = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (amp0 != 0.0 && (y[i] - offset0) / amp0 > 0.5) ++above;
  }
  const double span = x.maxCoeff() - x.minCoeff();
  const double spacing = span / std::max<Eigen::Index>(n - 1, 1);
  const double width0 = std::max(above * spacing, spacing);

  fitkit::FitProblem problem{fitkit::Model::lorentzian(), x, y, {},
                             Eigen::Vector4d(x[peak], width0, amp0, offset0), {}};
  const auto res = fitkit::nlls_fit(problem);
  ResonanceFit out;
  out.center = res.params[0];
  out.width = std::abs(res.params[1]);
  out.amplitude = res.params[2];
  out.offset = res.params[3];
  out.center_stderr = res.stderr_of(0);
  out.amplitude_stderr = res.stderr_of(2);
  out.converged = res.converged;
  out.low_significance = !res.converged || !(std::abs(out.amplitude) > 3.0 * out.amplitude_stderr);
  return out;
}

}  // namespace rydtrans::analysis
