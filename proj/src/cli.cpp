#include "rydtrans/cli.hpp"

#include <CLI11.hpp>
#include <cmath>
#include <iostream>
#include <optional>
#include <sstream>

#include "rydtrans/analysis.hpp"
#include "rydtrans/config.hpp"
#include "rydtrans/eit.hpp"
#include "rydtrans/errors.hpp"
#include "rydtrans/io.hpp"
#include "rydtrans/structure.hpp"
#include "rydtrans/transistor.hpp"

namespace rydtrans::cli {

namespace {

using io::json;
namespace fs = std::filesystem;

struct Globals {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  bool quiet = false;
};

struct FoersterArgs {
  std::string n_range;
  std::string channels;
  std::string qd_file;
  std::optional<int> gate_n;
  std::optional<double> gamma_eit;
  std::string branch;
};

struct EitArgs {
  std::optional<double> od, omega_c, gamma_r, delta_c, gamma_e;
  std::optional<double> from, to, step;
  std::string input;
  std::optional<double> atoms, temperature, waist, prefactor;
};

struct SimulateArgs {
  std::string preset;
  std::int64_t shots = 10000;
  bool gated = true;
  unsigned threads = 0;
  std::optional<double> storage_mean;
  std::optional<double> p0;
};

struct AnalyzeArgs {
  std::string gated;
  std::string reference;
  std::optional<double> ref_mean;
  std::optional<double> n_g;
  std::optional<double> start_us;
  std::optional<double> n_cut;
  std::optional<double> cut_min, cut_max;
  std::optional<double> p0;
};

std::pair<int, int> parse_range(const std::string& text) {
  const auto colon = text.find(':');
  try {
    if (colon == std::string::npos) {
      const int n = std::stoi(text);
      return {n, n};
    }
    return {std::stoi(text.substr(0, colon)), std::stoi(text.substr(colon + 1))};
  } catch (const std::exception&) {
    throw ConfigError("--n expects N or N_MIN:N_MAX, got '" + text + "'");
  }
}

std::vector<structure::Channel> parse_channels(const std::string& text) {
  std::vector<structure::Channel> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(structure::Channel::parse(item));
  }
  if (out.empty()) throw ConfigError("--channels is empty");
  return out;
}

class Session {
 public:
  Session(const Globals& g, std::ostream& out) : globals_(g), out_(out) {
    cfg_ = g.config_path.empty() ? config::from_json(json::object()) : config::load(g.config_path);
    if (g.seed) cfg_.seed = *g.seed;
    if (!g.out_dir.empty()) cfg_.out_dir = g.out_dir;
  }

  config::RunConfig& cfg() { return cfg_; }

  fs::path output(const std::string& name) const { return cfg_.out_dir / name; }

  void write(const std::string& name, const std::string& text) {
    io::write_text(output(name), text);
    written_.push_back(name);
  }

  void write_json(const std::string& name, const json& doc) { write(name, doc.dump(2) + "\n"); }

  void say(const std::string& line) {
    if (!globals_.quiet) out_ << line << '\n';
  }

  const std::vector<std::string>& written() const { return written_; }

 private:
  Globals globals_;
  std::ostream& out_;
  config::RunConfig cfg_;
  std::vector<std::string> written_;
};

structure::QuantumDefectTable load_table(const config::RunConfig& cfg) {
  return cfg.structure.quantum_defects.empty() ? structure::QuantumDefectTable::rubidium87()
                                               : structure::QuantumDefectTable::load(cfg.structure.quantum_defects);
}

void cmd_foerster(Session& s, const FoersterArgs& a) {
  auto& st = s.cfg().structure;
  if (!a.n_range.empty()) std::tie(st.n_min, st.n_max) = parse_range(a.n_range);
  if (!a.channels.empty()) st.channels = parse_channels(a.channels);
  if (!a.qd_file.empty()) st.quantum_defects = a.qd_file;
  if (a.gate_n) st.n = *a.gate_n;
  if (a.gamma_eit) st.interaction.gamma_eit_mhz = *a.gamma_eit;
  if (!a.branch.empty()) {
    json patch = config::to_json(s.cfg());
    patch["structure"]["branch"] = a.branch;
    const auto out_dir = s.cfg().out_dir;
    s.cfg() = config::from_json(patch);
    s.cfg().out_dir = out_dir;
  }
  s.cfg().validate();

  const auto table = load_table(s.cfg());
  const auto scan = structure::foerster_scan(table, st.n_min, st.n_max, st.channels);
  std::ostringstream csv;
  io::write_scan_csv(csv, scan);
  s.write("foerster_scan.csv", csv.str());
  s.write_json("foerster_crossings.json", io::crossings_json(scan));

  const structure::Channel channel =
      st.channel == "auto" ? structure::most_resonant_channel(table, st.n, st.channels)
                           : structure::Channel::parse(st.channel);
  const auto model = structure::interaction_estimate(table, st.n, channel, st.interaction);
  s.write_json("blockade.json", io::interaction_json(st.n, channel, st.interaction, model));

  s.say("foerster: " + std::to_string(scan.rows.size()) + " rows, " + std::to_string(scan.crossings.size()) +
        " zero crossings");
  for (const auto& c : scan.crossings) {
    s.say("  " + c.channel.label() + " changes sign between n=" + std::to_string(c.n_low) + " and " +
          std::to_string(c.n_high));
  }
  s.say("blockade radius " + io::format_number(model.blockade_radius_um) + " um (" +
        structure::to_string(model.branch_used) + " branch, n=" + std::to_string(st.n) + ", " + channel.label() + ")");
}

void apply_eit_overrides(eit::EitParams& p, const EitArgs& a) {
  if (a.od) p.od = *a.od;
  if (a.omega_c) p.omega_c = *a.omega_c;
  if (a.gamma_r) p.gamma_r = *a.gamma_r;
  if (a.delta_c) p.delta_c = *a.delta_c;
  if (a.gamma_e) p.gamma_e = *a.gamma_e;
}

void cmd_eit_spectrum(Session& s, const EitArgs& a) {
  auto& cfg = s.cfg();
  apply_eit_overrides(cfg.eit, a);
  if (a.from) cfg.grid.min_mhz = *a.from;
  if (a.to) cfg.grid.max_mhz = *a.to;
  if (a.step) cfg.grid.step_mhz = *a.step;
  cfg.validate();
  const auto n = static_cast<Eigen::Index>(std::floor((cfg.grid.max_mhz - cfg.grid.min_mhz) / cfg.grid.step_mhz + 1e-9)) + 1;
  Eigen::VectorXd grid(n);
  for (Eigen::Index i = 0; i < n; ++i) grid[i] = cfg.grid.min_mhz + static_cast<double>(i) * cfg.grid.step_mhz;
  const auto res = eit::transmission_spectrum(cfg.eit, grid);
  std::ostringstream csv;
  io::write_spectrum_csv(csv, res.spectrum);
  s.write("eit_spectrum.csv", csv.str());
  s.write_json("eit_spectrum.json", io::spectrum_summary_json(cfg.eit, res));
  s.say("eit spectrum: " + std::to_string(n) + " points, T(0)=" + io::format_number(res.t0) + ", FWHM=" +
        (res.window.fwhm ? io::format_number(*res.window.fwhm) + " MHz" : std::string("n/a")) +
        (res.window.grid_too_coarse ? " (grid too coarse)" : ""));
}

void cmd_eit_fit(Session& s, const EitArgs& a) {
  if (a.input.empty()) throw ConfigError("eit fit needs --input");
  auto& cfg = s.cfg();
  apply_eit_overrides(cfg.eit, a);
  cfg.validate();
  const auto spectrum = io::read_spectrum_csv(a.input);
  const auto fit = eit::fit_spectrum(spectrum, cfg.eit);
  s.write_json("eit_fit.json", io::fit_report_json(fit));
  s.say("eit fit: od=" + io::format_number(fit.params.od) + " omega_c=" + io::format_number(fit.params.omega_c) +
        " gamma_r=" + io::format_number(fit.params.gamma_r) + " fwhm=" +
        (fit.fwhm ? io::format_number(*fit.fwhm) : std::string("n/a")));
}

void cmd_eit_cloud(Session& s, const EitArgs& a) {
  auto& c = s.cfg().cloud;
  if (a.atoms) c.atom_number = *a.atoms;
  if (a.temperature) c.temperature_uk = *a.temperature;
  if (a.waist) c.beam_waist_um = *a.waist;
  if (a.prefactor) c.cross_section_prefactor = *a.prefactor;
  s.cfg().validate();
  const double peak = eit::cloud_peak_od(c);
  const auto avg = eit::beam_averaged_transmission(c, eit::cloud_od_profile(c));
  const auto w = c.thermal_widths_um();
  s.write_json("cloud_od.json", {{"peak_od", peak},
                                 {"mean_transmission", avg.mean_transmission},
                                 {"od_eff", avg.od_eff},
                                 {"integration_error", avg.error_estimate},
                                 {"thermal_widths_um", w},
                                 {"cross_section_um2", c.cross_section_um2()}});
  s.say("cloud: peak OD " + io::format_number(peak) + ", beam-averaged OD " + io::format_number(avg.od_eff));
}

void cmd_simulate(Session& s, const SimulateArgs& a) {
  auto& cfg = s.cfg();
  if (!a.preset.empty()) {
    cfg.experiment = config::experiment_preset(a.preset);
    cfg.experiment_preset = a.preset;
  }
  if (a.storage_mean) cfg.experiment.storage_mean = *a.storage_mean;
  if (a.p0) {
    if (!(*a.p0 > 0.0 && *a.p0 <= 1.0)) throw ConfigError("--p0 must lie in (0, 1]");
    cfg.experiment.storage_mean = -std::log(*a.p0);
  }
  if (a.shots < 1) throw ConfigError("--shots must be >= 1");
  cfg.validate();

  const auto run = mc::simulate_run(cfg.experiment, a.shots, cfg.seed, a.gated, a.threads);
  const std::string label = a.gated ? "gated" : "reference";
  std::ostringstream trace, hist;
  io::write_trace_csv(trace, run.trace);
  io::write_histogram_csv(hist, run.histogram);
  s.write(label + "_trace.csv", trace.str());
  s.write(label + "_histogram.csv", hist.str());

  json cfg_doc = config::to_json(cfg);
  cfg_doc.erase("out_dir");
  json manifest = {{"tool", "rydtrans"},
                   {"version", kVersion},
                   {"command", "simulate"},
                   {"seed", cfg.seed},
                   {"shots", a.shots},
                   {"gated", a.gated},
                   {"config_hash", config::config_hash(cfg)},
                   {"config", cfg_doc},
                   {"outputs", s.written()},
                   {"summary",
                    {{"mean_clicks", run.histogram.mean()},
                     {"variance_clicks", run.histogram.variance()},
                     {"expected_reference_clicks", cfg.experiment.reference_mean_clicks()},
                     {"p0", a.gated ? cfg.experiment.p0() : 1.0}}}};
  s.write_json(label + "_manifest.json", manifest);
  s.say("simulate: " + std::to_string(a.shots) + " " + label + " shots, mean clicks " +
        io::format_number(run.histogram.mean()) + ", variance " + io::format_number(run.histogram.variance()));
}

analysis::Reference reference_from(const AnalyzeArgs& a, const config::RunConfig& cfg) {
  if (!a.reference.empty()) return io::read_histogram_csv(a.reference);
  if (a.ref_mean) return *a.ref_mean;
  if (cfg.analysis.reference_mean > 0.0) return cfg.analysis.reference_mean;
  throw ConfigError("need --reference HISTOGRAM or --ref-mean MU");
}

void require_input(const std::string& path, const char* flag) {
  if (path.empty()) throw ConfigError(std::string("missing ") + flag);
  if (!fs::exists(path)) throw ConfigError(std::string(flag) + ": no such file: " + path);
}

void cmd_analyze(Session& s, const std::string& what, const AnalyzeArgs& a) {
  auto& an = s.cfg().analysis;
  if (a.n_g) an.n_g = *a.n_g;
  if (a.start_us) an.decay_start_us = *a.start_us;
  if (a.n_cut) an.n_cut = *a.n_cut;
  if (a.cut_min) an.cut_min = *a.cut_min;
  if (a.cut_max) an.cut_max = *a.cut_max;
  s.cfg().validate();

  json metrics = io::empty_metrics();
  json details = json::object();

  if (what == "extinction") {
    require_input(a.gated, "--gated");
    require_input(a.reference, "--reference");
    const auto m = analysis::extinction_gain(io::read_trace_csv(a.gated), io::read_trace_csv(a.reference), an.n_g);
    metrics["ratio"] = m.ratio;
    metrics["suppression"] = m.suppression;
    metrics["gain"] = m.gain;
    details = {{"n_trans", m.n_trans},
               {"n_trans_ref", m.n_trans_ref},
               {"n_g", m.n_g},
               {"extinction_label", "suppression = 1 - ratio"}};
    s.say("extinction (suppression) " + io::format_number(m.suppression) + ", ratio " + io::format_number(m.ratio) +
          ", gain " + io::format_number(m.gain));
  } else if (what == "decay") {
    require_input(a.gated, "--gated");
    require_input(a.reference, "--reference");
    const auto d = analysis::decay_fit(io::read_trace_csv(a.gated), io::read_trace_csv(a.reference), an.decay_start_us);
    if (d.tau_ms) metrics["tau_ms"] = *d.tau_ms;
    details = {{"depth", d.depth},
               {"depth_stderr", d.depth_stderr},
               {"tau_stderr_ms", d.tau_stderr_ms ? json(*d.tau_stderr_ms) : json(nullptr)},
               {"degenerate", d.degenerate},
               {"note", d.note},
               {"points", d.points},
               {"radiative_lifetime_ms", analysis::kRadiativeLifetimeMs}};
    s.say(d.tau_ms ? "decay: tau = " + io::format_number(*d.tau_ms) + " ms (radiative " +
                         io::format_number(analysis::kRadiativeLifetimeMs) + " ms)"
                   : "decay: degenerate fit, " + d.note);
  } else if (what == "bimodal" || what == "fidelity") {
    require_input(a.gated, "--gated");
    if (!a.reference.empty()) require_input(a.reference, "--reference");
    const auto gated = io::read_histogram_csv(a.gated);
    const auto ref = reference_from(a, s.cfg());
    const auto fit = analysis::bimodal_fit(gated, ref, an.n_cut);
    const auto scan = analysis::cutoff_scan(gated, ref, an.cut_min, an.cut_max);
    metrics["p0"] = fit.p0;
    metrics["p0_range"] = {scan.p0_min, scan.p0_max};
    json points = json::array();
    for (const auto& [cut, p0] : scan.points) points.push_back({{"n_cut", cut}, {"p0", p0}});
    details = {{"n_cut", fit.n_cut}, {"p0_stderr", fit.p0_stderr}, {"bins_used", fit.bins_used},
               {"subtracted", fit.subtracted}, {"cutoff_scan", points}};

    if (what == "fidelity") {
      // Quote the lowest fidelity over the cutoff scan.
      const std::int64_t k_max = std::max<std::int64_t>(gated.max_clicks(), 0);
      const auto pmf_ref = analysis::reference_pmf(ref, k_max + 60);
      std::optional<analysis::DiscriminationResult> worst;
      json per_cut = json::array();
      for (const auto& [cut, p0] : scan.points) {
        const auto f = analysis::bimodal_fit(gated, ref, cut);
        std::vector<double> blocked = f.subtracted;
        double mass = 0.0;
        for (double v : blocked) mass += v;
        if (!(mass > 0.0)) throw NumericalError("subtracted distribution is empty at n_cut " + io::format_number(cut));
        for (double& v : blocked) v /= mass;
        std::vector<double> ref_norm = pmf_ref;
        double rmass = 0.0;
        for (double v : ref_norm) rmass += v;
        for (double& v : ref_norm) v /= rmass;
        auto r = analysis::fidelity_threshold(ref_norm, blocked);
        per_cut.push_back({{"n_cut", cut}, {"n_thr", r.threshold}, {"fidelity", r.fidelity}, {"c0", r.c0}, {"c1", r.c1}});
        if (!worst || r.fidelity < worst->fidelity) worst = r;
      }
      metrics["n_thr"] = worst->threshold;
      metrics["c0"] = worst->c0;
      metrics["c1"] = worst->c1;
      metrics["fidelity"] = worst->fidelity;
      details["fidelity_scan"] = per_cut;
      s.say("fidelity " + io::format_number(worst->fidelity) + " at N_thr=" + io::format_number(worst->threshold) +
            " (conservative over cutoffs), p0 " + io::format_number(fit.p0));
    } else {
      s.say("bimodal: p0 " + io::format_number(fit.p0) + " at n_cut " + io::format_number(an.n_cut) + ", range [" +
            io::format_number(scan.p0_min) + ", " + io::format_number(scan.p0_max) + "]");
    }
  } else if (what == "storage") {
    if (!a.p0) throw ConfigError("storage needs --p0");
    const auto st = analysis::storage_bounds(*a.p0, an.n_g);
    metrics["p0"] = *a.p0;
    metrics["eta_lower"] = st.eta_lower;
    metrics["eta_poisson"] = st.eta_poisson ? json(*st.eta_poisson) : json(nullptr);
    details = {{"n_s_bound", st.n_s_bound}, {"n_g", an.n_g},
               {"eta_poisson_defined", st.eta_poisson.has_value()}};
    s.say("storage: eta_lower " + io::format_number(st.eta_lower) + ", eta_poisson " +
          (st.eta_poisson ? io::format_number(*st.eta_poisson) : std::string("undefined (p0 = 0)")));
  } else {
    throw ConfigError("unknown analysis '" + what + "'");
  }

  json doc = metrics;
  doc["analysis"] = what;
  doc["details"] = details;
  s.write_json("metrics.json", doc);
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Rydberg single-photon transistor: structure, EIT, Monte Carlo and analysis"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--config", g.config_path, "JSON run configuration");
  app.add_option("--seed", g.seed, "Base RNG seed");
  app.add_option("--out-dir", g.out_dir, "Output directory");
  app.add_flag("--quiet", g.quiet, "Suppress the summary on stdout");

  FoersterArgs fa;
  auto* foerster = app.add_subcommand("foerster", "Pair-state energy mismatch scan and blockade radius");
  foerster->add_option("--n", fa.n_range, "N or N_MIN:N_MAX");
  foerster->add_option("--channels", fa.channels, "Comma list of p12p12,p12p32,p32p12,p32p32");
  foerster->add_option("--qd-file", fa.qd_file, "Quantum-defect table");
  foerster->add_option("--gate-n", fa.gate_n, "n for the interaction estimate");
  foerster->add_option("--gamma-eit", fa.gamma_eit, "EIT linewidth in MHz");
  foerster->add_option("--branch", fa.branch, "c3, c6 or auto");

  EitArgs ea;
  auto* eit_cmd = app.add_subcommand("eit", "EIT spectra, fits and cloud optical depth");
  eit_cmd->require_subcommand(1);
  auto add_params = [&ea](CLI::App* c) {
    c->add_option("--od", ea.od, "Resonant optical depth");
    c->add_option("--omega-c", ea.omega_c, "Control Rabi frequency (2pi MHz)");
    c->add_option("--gamma-r", ea.gamma_r, "Rydberg dephasing (2pi MHz)");
    c->add_option("--delta-c", ea.delta_c, "Control detuning (2pi MHz)");
    c->add_option("--gamma-e", ea.gamma_e, "Intermediate-state linewidth (2pi MHz)");
  };
  auto* eit_spectrum = eit_cmd->add_subcommand("spectrum", "Write a transmission spectrum");
  add_params(eit_spectrum);
  eit_spectrum->add_option("--from", ea.from, "First probe detuning in MHz");
  eit_spectrum->add_option("--to", ea.to, "Last probe detuning in MHz");
  eit_spectrum->add_option("--step", ea.step, "Detuning step in MHz");
  auto* eit_fit = eit_cmd->add_subcommand("fit", "Fit a spectrum CSV");
  add_params(eit_fit);
  eit_fit->add_option("--input", ea.input, "Spectrum CSV")->required();
  auto* eit_cloud = eit_cmd->add_subcommand("cloud", "Optical depth of the trapped cloud");
  eit_cloud->add_option("--atoms", ea.atoms, "Atom number");
  eit_cloud->add_option("--temperature", ea.temperature, "Cloud temperature in uK");
  eit_cloud->add_option("--waist", ea.waist, "Probe waist in um");
  eit_cloud->add_option("--prefactor", ea.prefactor, "Cross-section prefactor");

  SimulateArgs sa;
  auto* simulate = app.add_subcommand("simulate", "Monte Carlo gate-target cycles");
  simulate->add_option("--preset", sa.preset, "click_histogram, transistor_trace or none");
  simulate->add_option("--shots", sa.shots, "Number of cycles");
  simulate->add_option("--gated", sa.gated, "true: gate pulse applied; false: reference");
  simulate->add_option("--threads", sa.threads, "Worker threads (0 = all cores)");
  simulate->add_option("--storage-mean", sa.storage_mean, "Mean stored excitations");
  simulate->add_option("--p0", sa.p0, "Probability of storing nothing (sets storage-mean)");

  AnalyzeArgs aa;
  std::string analysis_kind;
  auto* analyze = app.add_subcommand("analyze", "Figures of merit from traces and histograms");
  analyze->require_subcommand(1);
  for (const char* name : {"extinction", "decay", "bimodal", "fidelity", "storage"}) {
    auto* sub = analyze->add_subcommand(name);
    sub->callback([&analysis_kind, name] { analysis_kind = name; });
    sub->add_option("--n-g", aa.n_g, "Incoming gate photons");
    const std::string kind = name;
    if (kind == "extinction" || kind == "decay") {
      sub->add_option("--gated", aa.gated, "Gated trace CSV");
      sub->add_option("--reference", aa.reference, "Reference trace CSV");
      if (kind == "decay") sub->add_option("--start-us", aa.start_us, "Fit bins from this time on");
    } else if (kind == "storage") {
      sub->add_option("--p0", aa.p0, "Probability of storing nothing");
    } else {
      sub->add_option("--gated", aa.gated, "Gated histogram CSV");
      sub->add_option("--reference", aa.reference, "Reference histogram CSV");
      sub->add_option("--ref-mean", aa.ref_mean, "Poisson mean of the reference");
      sub->add_option("--n-cut", aa.n_cut, "Click cutoff for the low-count branch");
      sub->add_option("--cut-min", aa.cut_min, "Smallest cutoff in the scan");
      sub->add_option("--cut-max", aa.cut_max, "Largest cutoff in the scan");
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    Session session(g, out);
    if (foerster->parsed()) {
      cmd_foerster(session, fa);
    } else if (eit_spectrum->parsed()) {
      cmd_eit_spectrum(session, ea);
    } else if (eit_fit->parsed()) {
      cmd_eit_fit(session, ea);
    } else if (eit_cloud->parsed()) {
      cmd_eit_cloud(session, ea);
    } else if (simulate->parsed()) {
      cmd_simulate(session, sa);
    } else if (analyze->parsed()) {
      cmd_analyze(session, analysis_kind, aa);
    }
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  }
  return kExitOk;
}

}  // namespace rydtrans::cli
