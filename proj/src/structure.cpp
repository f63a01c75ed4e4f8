#include "rydtrans/structure.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include "rydtrans/errors.hpp"

#ifndef RYDTRANS_DATA_DIR
#define RYDTRANS_DATA_DIR "data"
#endif

namespace rydtrans::structure {

namespace {

constexpr char kOrbitalLetters[] = "SPDFGH";

// Hartree / h in GHz and the Bohr radius in um.
constexpr double kHartreeGhz = 6.579683920502e6;
constexpr double kBohrUm = 5.29177210903e-5;

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

double parse_number(std::string_view text, const std::string& where) {
  std::string buf(text);
  char* end = nullptr;
  const double v = std::strtod(buf.c_str(), &end);
  if (buf.empty() || end != buf.c_str() + buf.size() || !std::isfinite(v)) {
    throw ConfigError(where + ": expected a number, got '" + buf + "'");
  }
  return v;
}

}  // namespace

std::string Series::label() const {
  if (l < 0 || l >= static_cast<int>(sizeof(kOrbitalLetters) - 1)) {
    return "L" + std::to_string(l) + "_" + std::to_string(two_j) + "2";
  }
  return std::string(1, kOrbitalLetters[l]) + std::to_string(two_j) + "2";
}

Series Series::parse(std::string_view label) {
  const std::string text(label);
  if (label.size() < 3 || label.back() != '2') {
    throw ConfigError("bad series label '" + text + "' (expected e.g. S12, P32)");
  }
  const char letter = static_cast<char>(std::toupper(static_cast<unsigned char>(label.front())));
  const char* pos = std::strchr(kOrbitalLetters, letter);
  if (pos == nullptr || letter == '\0') throw ConfigError("bad orbital letter in '" + text + "'");
  const std::string_view digits = label.substr(1, label.size() - 2);
  if (digits.empty() || !std::all_of(digits.begin(), digits.end(), [](char c) {
        return std::isdigit(static_cast<unsigned char>(c));
      })) {
    throw ConfigError("bad J in series label '" + text + "'");
  }
  Series s{static_cast<int>(pos - kOrbitalLetters), std::stoi(std::string(digits))};
  if (s.two_j % 2 != 1 || std::abs(s.two_j - 2 * s.l) != 1) {
    throw ConfigError("J inconsistent with L in series label '" + text + "'");
  }
  return s;
}

QuantumDefectTable::QuantumDefectTable(std::map<Series, RitzCoefficients> entries,
                                       double rydberg_ghz)
    : entries_(std::move(entries)), rydberg_ghz_(rydberg_ghz) {
  if (!(rydberg_ghz_ > 0.0) || !std::isfinite(rydberg_ghz_)) {
    throw ConfigError("rydberg_ghz must be positive");
  }
  if (entries_.empty()) throw ConfigError("quantum defect table has no series");
}

QuantumDefectTable QuantumDefectTable::parse(std::string_view text) {
  std::map<Series, RitzCoefficients> entries;
  std::map<Series, int> seen;  // bit 0: delta0, bit 1: delta2
  std::optional<double> rydberg;

  std::istringstream in{std::string(text)};
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) continue;

    const std::string where = "line " + std::to_string(line_no);
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError(where + ": expected key = value");
    const std::string_view key = trim(line.substr(0, eq));
    const double value = parse_number(trim(line.substr(eq + 1)), where);

    if (key == "rydberg_ghz") {
      rydberg = value;
      continue;
    }
    constexpr std::string_view prefix = "series.";
    const auto dot = key.rfind('.');
    if (key.substr(0, prefix.size()) != prefix || dot <= prefix.size()) {
      throw ConfigError(where + ": unknown key '" + std::string(key) + "'");
    }
    const Series s = Series::parse(key.substr(prefix.size(), dot - prefix.size()));
    const std::string_view field = key.substr(dot + 1);
    if (field == "delta0") {
      entries[s].delta0 = value;
      seen[s] |= 1;
    } else if (field == "delta2") {
      entries[s].delta2 = value;
      seen[s] |= 2;
    } else {
      throw ConfigError(where + ": unknown field '" + std::string(field) + "'");
    }
  }
  if (!rydberg) throw ConfigError("quantum defect table is missing rydberg_ghz");
  for (const auto& [s, bits] : seen) {
    if (bits != 3) throw ConfigError("series " + s.label() + " needs both delta0 and delta2");
  }
  return QuantumDefectTable(std::move(entries), *rydberg);
}

QuantumDefectTable QuantumDefectTable::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open quantum defect file: " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return parse(buf.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::filesystem::path QuantumDefectTable::default_path() {
  if (const char* dir = std::getenv("RYDTRANS_DATA_DIR"); dir != nullptr && *dir != '\0') {
    return std::filesystem::path(dir) / "rb87_quantum_defects.txt";
  }
  return std::filesystem::path(RYDTRANS_DATA_DIR) / "rb87_quantum_defects.txt";
}

QuantumDefectTable QuantumDefectTable::rubidium87() { return load(default_path()); }

const RitzCoefficients& QuantumDefectTable::at(Series s) const {
  const auto it = entries_.find(s);
  if (it == entries_.end()) {
    throw DomainError("no quantum defects for series " + s.label());
  }
  return it->second;
}

RydbergLevel::RydbergLevel(int n_, Series s) : n(n_), series(s) {
  if (n < 5) throw DomainError("principal quantum number must be >= 5, got " + std::to_string(n));
  if (series.l < 0 || series.l >= n) {
    throw DomainError("orbital quantum number out of range for n=" + std::to_string(n));
  }
  if (series.two_j <= 0 || std::abs(series.two_j - 2 * series.l) != 1) {
    throw DomainError("J must be L +- 1/2");
  }
}

RydbergLevel::RydbergLevel(int n_, int l, double j)
    : RydbergLevel(n_, Series{l, static_cast<int>(std::lround(2.0 * j))}) {
  if (std::abs(2.0 * j - std::round(2.0 * j)) > 1e-12) throw DomainError("J must be half-integer");
}

std::string RydbergLevel::label() const {
  const std::string s = series.label();
  return std::to_string(n) + s.substr(0, s.size() - 2) + "/2";
}

double quantum_defect(const QuantumDefectTable& table, const RydbergLevel& level) {
  const auto& c = table.at(level.series);
  const double base = level.n - c.delta0;
  if (!(base > 0.0)) throw DomainError("n - delta0 <= 0 for " + level.label());
  return c.delta0 + c.delta2 / (base * base);
}

double effective_n(const QuantumDefectTable& table, const RydbergLevel& level) {
  const double n_eff = level.n - quantum_defect(table, level);
  if (!(n_eff > 0.0)) throw DomainError("nonphysical effective quantum number for " + level.label());
  return n_eff;
}

double level_energy(const QuantumDefectTable& table, const RydbergLevel& level) {
  const double n_eff = effective_n(table, level);
  return -table.rydberg_ghz() / (n_eff * n_eff);
}

std::string Channel::label() const {
  return "p" + std::to_string(two_j1) + "2p" + std::to_string(two_j2) + "2";
}

Channel Channel::parse(std::string_view label) {
  std::string lower(label);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  for (const Channel& c : all()) {
    if (c.label() == lower) return c;
  }
  throw ConfigError("unknown channel '" + std::string(label) + "' (expected p12p12, p12p32, p32p12, p32p32)");
}

std::vector<Channel> Channel::all() { return {{1, 1}, {1, 3}, {3, 1}, {3, 3}}; }

PairChannel pair_mismatch(const QuantumDefectTable& table,
                          const std::pair<RydbergLevel, RydbergLevel>& initial,
                          const std::pair<RydbergLevel, RydbergLevel>& final_pair) {
  const double e_final = level_energy(table, final_pair.first) + level_energy(table, final_pair.second);
  const double e_initial = level_energy(table, initial.first) + level_energy(table, initial.second);
  return {initial, final_pair, e_final - e_initial};
}

PairChannel pair_mismatch(const QuantumDefectTable& table, int n, Channel channel) {
  if (n < 7) throw DomainError("pair channel needs n >= 7, got " + std::to_string(n));
  const Series s12{0, 1};
  return pair_mismatch(table, {RydbergLevel(n, s12), RydbergLevel(n - 2, s12)},
                       {RydbergLevel(n - 1, Series{1, channel.two_j1}),
                        RydbergLevel(n - 2, Series{1, channel.two_j2})});
}

ScanResult foerster_scan(const QuantumDefectTable& table, int n_min, int n_max,
                         const std::vector<Channel>& channels) {
  if (channels.empty()) throw ConfigError("foerster scan needs at least one channel");
  if (n_min > n_max) {
    throw ConfigError("empty n range [" + std::to_string(n_min) + ", " + std::to_string(n_max) + "]");
  }
  ScanResult out;
  out.rows.reserve(channels.size() * static_cast<std::size_t>(n_max - n_min + 1));
  for (const Channel& ch : channels) {
    std::optional<double> prev;
    for (int n = n_min; n <= n_max; ++n) {
      const double de = pair_mismatch(table, n, ch).mismatch_ghz;
      out.rows.push_back({n, ch, de});
      if (prev && ((*prev < 0.0) != (de < 0.0))) out.crossings.push_back({n - 1, n, ch});
      prev = de;
    }
  }
  return out;
}

std::string to_string(InteractionBranch b) {
  switch (b) {
    case InteractionBranch::van_der_waals:
      return "c6";
    case InteractionBranch::resonant_dipole:
      return "c3";
    case InteractionBranch::automatic:
      return "auto";
  }
  return "?";
}

double radial_dipole_au(double n_eff_a, double n_eff_b) {
  const double nc = 0.5 * (n_eff_a + n_eff_b);
  return 1.5 * nc * nc;
}

double c3_from_dipoles(double dipole_a_au, double dipole_b_au, double prefactor) {
  // One atomic unit of C3 is E_h * a0^3.
  return prefactor * dipole_a_au * dipole_b_au * kHartreeGhz * kBohrUm * kBohrUm * kBohrUm;
}

double blockade_radius_c6(double c6_ghz_um6, double gamma_eit_mhz) {
  if (!(gamma_eit_mhz > 0.0)) throw DomainError("EIT linewidth must be positive");
  return std::pow(std::abs(c6_ghz_um6) / (gamma_eit_mhz * 1e-3), 1.0 / 6.0);
}

double blockade_radius_c3(double c3_ghz_um3, double gamma_eit_mhz) {
  if (!(gamma_eit_mhz > 0.0)) throw DomainError("EIT linewidth must be positive");
  return std::cbrt(std::abs(c3_ghz_um3) / (gamma_eit_mhz * 1e-3));
}

InteractionModel interaction_estimate(const QuantumDefectTable& table, int n, Channel channel,
                                      const InteractionParams& params) {
  const PairChannel pair = pair_mismatch(table, n, channel);
  const auto& [s_a, s_b] = pair.initial;
  const auto& [p_a, p_b] = pair.final_pair;

  // nS -> (n-1)P_J1 on one atom, (n-2)S -> (n-2)P_J2 on the other.
  const double d_a = radial_dipole_au(effective_n(table, s_a), effective_n(table, p_a));
  const double d_b = radial_dipole_au(effective_n(table, s_b), effective_n(table, p_b));

  InteractionModel m;
  m.delta_e_ghz = pair.mismatch_ghz;
  m.c3_ghz_um3 = c3_from_dipoles(d_a, d_b, params.angular_prefactor);
  const double abs_de = std::abs(m.delta_e_ghz);
  if (abs_de > 0.0) {
    m.c6_ghz_um6 = m.c3_ghz_um3 * m.c3_ghz_um3 / abs_de;
    m.crossover_radius_um = std::cbrt(m.c3_ghz_um3 / abs_de);
  } else {
    m.crossover_radius_um = std::numeric_limits<double>::infinity();
  }

  InteractionBranch branch = params.branch;
  if (branch == InteractionBranch::van_der_waals && abs_de == 0.0) {
    throw DomainError("pair state is exactly resonant (dE = 0); C6 undefined, use the C3 branch");
  }
  if (branch == InteractionBranch::automatic) {
    branch = InteractionBranch::resonant_dipole;
    if (abs_de > 0.0 &&
        blockade_radius_c6(m.c6_ghz_um6, params.gamma_eit_mhz) >= m.crossover_radius_um) {
      branch = InteractionBranch::van_der_waals;
    }
  }
  m.branch_used = branch;
  m.blockade_radius_um = branch == InteractionBranch::van_der_waals
                             ? blockade_radius_c6(m.c6_ghz_um6, params.gamma_eit_mhz)
                             : blockade_radius_c3(m.c3_ghz_um3, params.gamma_eit_mhz);
  return m;
}

Channel most_resonant_channel(const QuantumDefectTable& table, int n,
                              const std::vector<Channel>& channels) {
  if (channels.empty()) throw ConfigError("no channels given");
  return *std::min_element(channels.begin(), channels.end(), [&](Channel a, Channel b) {
    return std::abs(pair_mismatch(table, n, a).mismatch_ghz) <
           std::abs(pair_mismatch(table, n, b).mismatch_ghz);
  });
}

}  // namespace rydtrans::structure
