#include "rydtrans/config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>

#include "rydtrans/errors.hpp"

namespace rydtrans::config {

namespace {

// Reads one JSON object, remembering which keys were consumed so the rest
// can be reported as unknown.
class Section {
 public:
  Section(const json& node, std::string path) : node_(node), path_(std::move(path)) {
    if (!node_.is_object()) throw ConfigError(where() + " must be an object");
  }

  std::string where(const std::string& key = {}) const {
    if (key.empty()) return path_.empty() ? "config" : path_;
    return path_.empty() ? key : path_ + "." + key;
  }

  const json* find(const std::string& key) {
    seen_.insert(key);
    const auto it = node_.find(key);
    return it == node_.end() ? nullptr : &*it;
  }

  template <typename T>
  void read(const std::string& key, T& target) {
    const json* v = find(key);
    if (v == nullptr) return;
    try {
      if constexpr (std::is_floating_point_v<T>) {
        if (!v->is_number()) throw ConfigError("expected a number");
      } else if constexpr (std::is_same_v<T, bool>) {
        if (!v->is_boolean()) throw ConfigError("expected true/false");
      } else if constexpr (std::is_integral_v<T>) {
        if (!v->is_number_integer()) throw ConfigError("expected an integer");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v->is_string()) throw ConfigError("expected a string");
      }
      target = v->get<T>();
    } catch (const std::exception& e) {
      throw ConfigError(where(key) + ": " + e.what());
    }
  }

  Section child(const std::string& key) {
    const json* v = find(key);
    static const json empty = json::object();
    return Section(v ? *v : empty, where(key));
  }

  bool has(const std::string& key) const { return node_.contains(key); }

  void finish() const {
    for (const auto& [key, _] : node_.items()) {
      if (!seen_.count(key)) throw ConfigError(where(key) + ": unknown key");
    }
  }

 private:
  const json& node_;
  std::string path_;
  std::set<std::string> seen_;
};

template <typename F>
void prefixed(const std::string& section, F&& check) {
  try {
    check();
  } catch (const ConfigError& e) {
    throw ConfigError(section + "." + e.what());
  }
}

}  // namespace

void RunConfig::validate() const {
  prefixed("structure", [&] {
    if (structure.n_min > structure.n_max) throw ConfigError("n_min must not exceed n_max");
    if (structure.n_min < 7) throw ConfigError("n_min must be >= 7");
    if (structure.n < 7) throw ConfigError("n must be >= 7");
    if (structure.channels.empty()) throw ConfigError("channels must not be empty");
    if (structure.channel != "auto") structure::Channel::parse(structure.channel);
    if (!(structure.interaction.gamma_eit_mhz > 0.0)) throw ConfigError("gamma_eit_mhz must be > 0");
    if (!(structure.interaction.angular_prefactor > 0.0)) throw ConfigError("angular_prefactor must be > 0");
  });
  prefixed("eit", [&] { eit.validate(); });
  prefixed("eit", [&] {
    if (!(grid.step_mhz > 0.0)) throw ConfigError("step_mhz must be > 0");
    if (!(grid.max_mhz > grid.min_mhz)) throw ConfigError("max_mhz must exceed min_mhz");
  });
  prefixed("cloud", [&] { cloud.validate(); });
  prefixed("experiment", [&] { experiment.validate(); });
  prefixed("analysis", [&] {
    if (!(analysis.n_g > 0.0)) throw ConfigError("n_g must be > 0");
    if (!(analysis.cut_max >= analysis.cut_min)) throw ConfigError("cut_max must be >= cut_min");
    if (!(analysis.reference_mean >= 0.0)) throw ConfigError("reference_mean must be >= 0");
  });
}

json default_metadata() {
  return {
      {"magnetic_field_gauss", 1.1},
      {"control_power_mw", {{"gate", 17.0}, {"target", 10.0}}},
      {"beam_waists_um", {{"signal", 8.0}, {"gate_control", 21.0}, {"target_control", 12.0}}},
      {"gate_control_wavelength_nm", 474.0},
      {"cycles_per_sample", 100},
      {"gate_n", 69},
      {"target_n", 67},
  };
}

mc::ExperimentConfig experiment_preset(const std::string& name) {
  if (name == "click_histogram") return mc::ExperimentConfig::click_histogram();
  if (name == "transistor_trace") return mc::ExperimentConfig::transistor_trace();
  if (name == "none") return mc::ExperimentConfig{};
  throw ConfigError("unknown experiment preset '" + name + "' (click_histogram, transistor_trace, none)");
}

RunConfig from_json(const json& doc) {
  RunConfig cfg;
  cfg.metadata = default_metadata();
  Section root(doc, "");

  {
    Section s = root.child("structure");
    std::string qd;
    s.read("quantum_defects", qd);
    cfg.structure.quantum_defects = qd;
    s.read("n_min", cfg.structure.n_min);
    s.read("n_max", cfg.structure.n_max);
    s.read("n", cfg.structure.n);
    s.read("channel", cfg.structure.channel);
    if (const json* ch = s.find("channels")) {
      if (!ch->is_array()) throw ConfigError(s.where("channels") + ": expected a list");
      cfg.structure.channels.clear();
      for (const auto& c : *ch) {
        if (!c.is_string()) throw ConfigError(s.where("channels") + ": expected channel names");
        try {
          cfg.structure.channels.push_back(structure::Channel::parse(c.get<std::string>()));
        } catch (const ConfigError& e) {
          throw ConfigError(s.where("channels") + ": " + e.what());
        }
      }
    }
    s.read("gamma_eit_mhz", cfg.structure.interaction.gamma_eit_mhz);
    s.read("angular_prefactor", cfg.structure.interaction.angular_prefactor);
    std::string branch = structure::to_string(cfg.structure.interaction.branch);
    s.read("branch", branch);
    if (branch == "c6") {
      cfg.structure.interaction.branch = structure::InteractionBranch::van_der_waals;
    } else if (branch == "c3") {
      cfg.structure.interaction.branch = structure::InteractionBranch::resonant_dipole;
    } else if (branch == "auto") {
      cfg.structure.interaction.branch = structure::InteractionBranch::automatic;
    } else {
      throw ConfigError(s.where("branch") + ": expected c3, c6 or auto");
    }
    s.finish();
  }
  {
    Section s = root.child("eit");
    s.read("gamma_e", cfg.eit.gamma_e);
    s.read("omega_c", cfg.eit.omega_c);
    s.read("gamma_r", cfg.eit.gamma_r);
    s.read("delta_c", cfg.eit.delta_c);
    s.read("od", cfg.eit.od);
    s.read("detuning_min_mhz", cfg.grid.min_mhz);
    s.read("detuning_max_mhz", cfg.grid.max_mhz);
    s.read("detuning_step_mhz", cfg.grid.step_mhz);
    s.finish();
  }
  {
    Section s = root.child("cloud");
    s.read("atom_number", cfg.cloud.atom_number);
    s.read("temperature_uk", cfg.cloud.temperature_uk);
    if (const json* f = s.find("trap_freqs_hz")) {
      if (!f->is_array() || f->size() != 3 || !std::all_of(f->begin(), f->end(), [](const json& v) { return v.is_number(); })) {
        throw ConfigError(s.where("trap_freqs_hz") + ": expected three numbers");
      }
      for (std::size_t i = 0; i < 3; ++i) cfg.cloud.trap_freqs_hz[i] = (*f)[i].get<double>();
    }
    s.read("wavelength_nm", cfg.cloud.wavelength_nm);
    s.read("beam_waist_um", cfg.cloud.beam_waist_um);
    s.read("cross_section_prefactor", cfg.cloud.cross_section_prefactor);
    s.read("mass_amu", cfg.cloud.mass_amu);
    s.finish();
  }
  {
    Section s = root.child("experiment");
    s.read("preset", cfg.experiment_preset);
    try {
      cfg.experiment = experiment_preset(cfg.experiment_preset);
    } catch (const ConfigError& e) {
      throw ConfigError(s.where("preset") + ": " + e.what());
    }
    auto& e = cfg.experiment;
    s.read("n_gate_photons", e.n_gate_photons);
    s.read("storage_mean", e.storage_mean);
    s.read("eta_det", e.eta_det);
    s.read("t0_transmission", e.t0_transmission);
    s.read("photon_rate_in", e.photon_rate_in);
    s.read("pulse_duration_us", e.pulse_duration_us);
    s.read("bin_width_us", e.bin_width_us);
    s.read("tau_blockade_ms", e.tau_blockade_ms);
    s.read("blockade_leak", e.blockade_leak);
    s.read("dark_time_us", e.dark_time_us);
    s.read("cycle_time_ms", e.cycle_time_ms);
    s.read("overdispersion", e.overdispersion);
    s.finish();
  }
  {
    Section s = root.child("analysis");
    s.read("n_g", cfg.analysis.n_g);
    s.read("n_cut", cfg.analysis.n_cut);
    s.read("cut_min", cfg.analysis.cut_min);
    s.read("cut_max", cfg.analysis.cut_max);
    s.read("decay_start_us", cfg.analysis.decay_start_us);
    s.read("reference_mean", cfg.analysis.reference_mean);
    s.finish();
  }
  if (const json* m = root.find("metadata")) {
    if (!m->is_object()) throw ConfigError("metadata must be an object");
    cfg.metadata.update(*m);
  }
  root.read("seed", cfg.seed);
  std::string out_dir = cfg.out_dir.string();
  root.read("out_dir", out_dir);
  cfg.out_dir = out_dir;
  root.finish();

  cfg.validate();
  return cfg;
}

json to_json(const RunConfig& cfg) {
  json channels = json::array();
  for (const auto& c : cfg.structure.channels) channels.push_back(c.label());
  const auto& e = cfg.experiment;
  return {
      {"structure",
       {{"quantum_defects", cfg.structure.quantum_defects.string()},
        {"n_min", cfg.structure.n_min},
        {"n_max", cfg.structure.n_max},
        {"channels", channels},
        {"n", cfg.structure.n},
        {"channel", cfg.structure.channel},
        {"gamma_eit_mhz", cfg.structure.interaction.gamma_eit_mhz},
        {"angular_prefactor", cfg.structure.interaction.angular_prefactor},
        {"branch", structure::to_string(cfg.structure.interaction.branch)}}},
      {"eit",
       {{"gamma_e", cfg.eit.gamma_e},
        {"omega_c", cfg.eit.omega_c},
        {"gamma_r", cfg.eit.gamma_r},
        {"delta_c", cfg.eit.delta_c},
        {"od", cfg.eit.od},
        {"detuning_min_mhz", cfg.grid.min_mhz},
        {"detuning_max_mhz", cfg.grid.max_mhz},
        {"detuning_step_mhz", cfg.grid.step_mhz}}},
      {"cloud",
       {{"atom_number", cfg.cloud.atom_number},
        {"temperature_uk", cfg.cloud.temperature_uk},
        {"trap_freqs_hz", cfg.cloud.trap_freqs_hz},
        {"wavelength_nm", cfg.cloud.wavelength_nm},
        {"beam_waist_um", cfg.cloud.beam_waist_um},
        {"cross_section_prefactor", cfg.cloud.cross_section_prefactor},
        {"mass_amu", cfg.cloud.mass_amu}}},
      {"experiment",
       {{"preset", cfg.experiment_preset},
        {"n_gate_photons", e.n_gate_photons},
        {"storage_mean", e.storage_mean},
        {"eta_det", e.eta_det},
        {"t0_transmission", e.t0_transmission},
        {"photon_rate_in", e.photon_rate_in},
        {"pulse_duration_us", e.pulse_duration_us},
        {"bin_width_us", e.bin_width_us},
        {"tau_blockade_ms", e.tau_blockade_ms},
        {"blockade_leak", e.blockade_leak},
        {"dark_time_us", e.dark_time_us},
        {"cycle_time_ms", e.cycle_time_ms},
        {"overdispersion", e.overdispersion}}},
      {"analysis",
       {{"n_g", cfg.analysis.n_g},
        {"n_cut", cfg.analysis.n_cut},
        {"cut_min", cfg.analysis.cut_min},
        {"cut_max", cfg.analysis.cut_max},
        {"decay_start_us", cfg.analysis.decay_start_us},
        {"reference_mean", cfg.analysis.reference_mean}}},
      {"metadata", cfg.metadata.is_null() ? default_metadata() : cfg.metadata},
      {"seed", cfg.seed},
      {"out_dir", cfg.out_dir.string()},
  };
}

RunConfig load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  try {
    return from_json(doc);
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::string config_hash(const RunConfig& cfg) {
  json doc = to_json(cfg);
  doc.erase("out_dir");
  const std::string text = doc.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace rydtrans::config
