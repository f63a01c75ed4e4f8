#include "rydtrans/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <vector>

#include "rydtrans/errors.hpp"

namespace rydtrans::io {

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<int> line_numbers;
};

std::string strip(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(strip(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

CsvTable read_csv(const std::filesystem::path& path, const std::vector<std::string>& expected) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  CsvTable t;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string s = strip(line);
    if (s.empty() || s[0] == '#') continue;
    auto cells = split(s);
    if (t.header.empty()) {
      t.header = cells;
      if (t.header != expected) {
        std::string want;
        for (const auto& h : expected) want += (want.empty() ? "" : ",") + h;
        throw ConfigError(path.string() + ": expected header '" + want + "'");
      }
      continue;
    }
    if (cells.size() != expected.size()) {
      throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                        std::to_string(expected.size()) + " columns");
    }
    t.rows.push_back(std::move(cells));
    t.line_numbers.push_back(line_no);
  }
  if (t.header.empty()) throw ConfigError(path.string() + ": empty file");
  return t;
}

double cell_number(const CsvTable& t, std::size_t row, std::size_t col, const std::filesystem::path& path) {
  const std::string& s = t.rows[row][col];
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw ConfigError(path.string() + ":" + std::to_string(t.line_numbers[row]) + ": bad number '" + s + "'");
  }
  return v;
}

std::int64_t cell_integer(const CsvTable& t, std::size_t row, std::size_t col, const std::filesystem::path& path) {
  const std::string& s = t.rows[row][col];
  std::int64_t v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw ConfigError(path.string() + ":" + std::to_string(t.line_numbers[row]) + ": bad integer '" + s + "'");
  }
  return v;
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

void write_scan_csv(std::ostream& out, const structure::ScanResult& scan) {
  out << "n,channel,delta_e_ghz\n";
  for (const auto& row : scan.rows) {
    out << row.n << ',' << row.channel.label() << ',' << format_number(row.delta_e_ghz) << '\n';
  }
}

json crossings_json(const structure::ScanResult& scan) {
  json out = json::array();
  for (const auto& c : scan.crossings) {
    out.push_back({{"n_low", c.n_low}, {"n_high", c.n_high}, {"channel", c.channel.label()}});
  }
  return out;
}

json interaction_json(int n, structure::Channel channel, const structure::InteractionParams& params,
                      const structure::InteractionModel& m) {
  const bool vdw = m.branch_used == structure::InteractionBranch::van_der_waals;
  return {
      {"n", n},
      {"channel", channel.label()},
      {"delta_e_ghz", m.delta_e_ghz},
      {"c3_ghz_um3", m.c3_ghz_um3},
      {"c6_ghz_um6", number_or_null(m.c6_ghz_um6 > 0.0 ? m.c6_ghz_um6 : NAN)},
      {"crossover_radius_um", number_or_null(m.crossover_radius_um)},
      {"gamma_eit_mhz", params.gamma_eit_mhz},
      {"angular_prefactor", params.angular_prefactor},
      {"branch_requested", structure::to_string(params.branch)},
      {"branch_used", structure::to_string(m.branch_used)},
      {"blockade_radius_um", m.blockade_radius_um},
      {"convention", vdw ? "r_b = (C6 / (h Gamma_EIT))^(1/6), C6 = C3^2 / |dE|"
                         : "r_b = (C3 / (h Gamma_EIT))^(1/3)"},
      {"dipole_model", "semiclassical <r> = 1.5 nc^2 a0, angular factors folded into angular_prefactor"},
  };
}

void write_spectrum_csv(std::ostream& out, const eit::Spectrum& spectrum) {
  out << "detuning_mhz,transmission\n";
  for (Eigen::Index i = 0; i < spectrum.detunings.size(); ++i) {
    out << format_number(spectrum.detunings[i]) << ',' << format_number(spectrum.transmissions[i]) << '\n';
  }
}

eit::Spectrum read_spectrum_csv(const std::filesystem::path& path) {
  const auto t = read_csv(path, {"detuning_mhz", "transmission"});
  eit::Spectrum s;
  s.detunings.resize(static_cast<Eigen::Index>(t.rows.size()));
  s.transmissions.resize(static_cast<Eigen::Index>(t.rows.size()));
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    s.detunings[static_cast<Eigen::Index>(i)] = cell_number(t, i, 0, path);
    s.transmissions[static_cast<Eigen::Index>(i)] = cell_number(t, i, 1, path);
  }
  try {
    s.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return s;
}

json spectrum_summary_json(const eit::EitParams& p, const eit::SpectrumResult& r) {
  return {
      {"od", p.od},
      {"omega_c_mhz", p.omega_c},
      {"gamma_r_mhz", p.gamma_r},
      {"gamma_e_mhz", p.gamma_e},
      {"delta_c_mhz", p.delta_c},
      {"fwhm_mhz", r.window.fwhm ? json(*r.window.fwhm) : json(nullptr)},
      {"t0", r.t0},
      {"peak_detuning_mhz", r.window.peak_detuning},
      {"peak_transmission", r.window.peak_transmission},
      {"grid_too_coarse", r.window.grid_too_coarse},
  };
}

json fit_report_json(const eit::SpectrumFit& fit) {
  return {
      {"od", fit.params.od},
      {"omega_c_mhz", fit.params.omega_c},
      {"gamma_r_mhz", fit.params.gamma_r},
      {"fwhm_mhz", fit.fwhm ? json(*fit.fwhm) : json(nullptr)},
      {"t0", fit.t0},
      {"residual", fit.residual},
  };
}

void write_trace_csv(std::ostream& out, const mc::Trace& trace) {
  out << "t_us,transmitted_photons_per_bin,stderr\n";
  for (std::size_t i = 0; i < trace.t_us.size(); ++i) {
    const double se = i < trace.stderr_.size() ? trace.stderr_[i] : 0.0;
    out << format_number(trace.t_us[i]) << ',' << format_number(trace.photons[i]) << ','
        << format_number(se) << '\n';
  }
}

mc::Trace read_trace_csv(const std::filesystem::path& path) {
  const auto t = read_csv(path, {"t_us", "transmitted_photons_per_bin", "stderr"});
  if (t.rows.empty()) throw ConfigError(path.string() + ": trace has no rows");
  mc::Trace tr;
  double edge = 0.0;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const double centre = cell_number(t, i, 0, path);
    if (centre <= edge) throw ConfigError(path.string() + ": bin centres must increase from t > 0");
    tr.t_us.push_back(centre);
    tr.bin_width_us.push_back(2.0 * (centre - edge));
    edge += tr.bin_width_us.back();
    tr.photons.push_back(cell_number(t, i, 1, path));
    tr.stderr_.push_back(cell_number(t, i, 2, path));
  }
  return tr;
}

void write_histogram_csv(std::ostream& out, const mc::ClickHistogram& hist) {
  out << "n_clicks,events\n";
  for (const auto& [k, c] : hist.counts()) out << k << ',' << c << '\n';
}

mc::ClickHistogram read_histogram_csv(const std::filesystem::path& path) {
  const auto t = read_csv(path, {"n_clicks", "events"});
  std::map<std::int64_t, std::int64_t> counts;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto k = cell_integer(t, i, 0, path);
    const auto c = cell_integer(t, i, 1, path);
    if (k < 0 || c < 0) throw ConfigError(path.string() + ": negative entry on line " + std::to_string(t.line_numbers[i]));
    counts[k] += c;
  }
  mc::ClickHistogram h(std::move(counts));
  if (h.n_shots() == 0) throw ConfigError(path.string() + ": histogram has no events");
  return h;
}

json empty_metrics() {
  json m = json::object();
  for (const char* key : {"ratio", "suppression", "gain", "tau_ms", "p0", "p0_range", "n_thr", "c0", "c1",
                          "fidelity", "eta_lower", "eta_poisson"}) {
    m[key] = nullptr;
  }
  return m;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace rydtrans::io
