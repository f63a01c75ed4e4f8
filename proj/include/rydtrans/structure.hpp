#pragma once

// Rydberg level structure for alkali atoms: quantum defects, level energies,
// pair-state Förster mismatches and dipole-dipole interaction estimates.
// All energies are frequencies in GHz (E/h).

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace rydtrans::structure {

/// Fine-structure series, J stored as twice its value so it stays integral.
struct Series {
  int l = 0;
  int two_j = 1;

  auto operator<=>(const Series&) const = default;

  double j() const { return 0.5 * two_j; }
  /// "S12", "P32", "D52", ...
  std::string label() const;
  static Series parse(std::string_view label);
};

struct RitzCoefficients {
  double delta0 = 0.0;
  double delta2 = 0.0;
};

class QuantumDefectTable {
 public:
  QuantumDefectTable(std::map<Series, RitzCoefficients> entries, double rydberg_ghz);

  /// Parses the key=value text format (see data/rb87_quantum_defects.txt).
  static QuantumDefectTable parse(std::string_view text);
  static QuantumDefectTable load(const std::filesystem::path& path);
  /// The 87Rb table shipped in data/. $RYDTRANS_DATA_DIR overrides the
  /// install-time data directory.
  static QuantumDefectTable rubidium87();
  static std::filesystem::path default_path();

  const RitzCoefficients& at(Series s) const;
  bool contains(Series s) const { return entries_.count(s) != 0; }
  double rydberg_ghz() const { return rydberg_ghz_; }
  const std::map<Series, RitzCoefficients>& entries() const { return entries_; }

 private:
  std::map<Series, RitzCoefficients> entries_;
  double rydberg_ghz_;
};

struct RydbergLevel {
  int n = 0;
  Series series;

  RydbergLevel(int n, Series s);
  RydbergLevel(int n, int l, double j);

  std::string label() const;  // "69S1/2"
};

/// Rydberg-Ritz defect delta(n) = delta0 + delta2 / (n - delta0)^2.
double quantum_defect(const QuantumDefectTable& table, const RydbergLevel& level);

/// Effective principal quantum number n - delta(n).
double effective_n(const QuantumDefectTable& table, const RydbergLevel& level);

/// Binding energy -Ry / (n - delta)^2 in GHz.
double level_energy(const QuantumDefectTable& table, const RydbergLevel& level);

/// Fine-structure choice for the P-P pair: J of the (n-1)P and (n-2)P atoms.
struct Channel {
  int two_j1 = 1;
  int two_j2 = 1;

  auto operator<=>(const Channel&) const = default;

  std::string label() const;  // "p12p32"
  static Channel parse(std::string_view label);
  static std::vector<Channel> all();
};

struct PairChannel {
  std::pair<RydbergLevel, RydbergLevel> initial;
  std::pair<RydbergLevel, RydbergLevel> final_pair;
  double mismatch_ghz = 0.0;
};

/// Mismatch E(final) - E(initial) between two arbitrary pair states.
PairChannel pair_mismatch(const QuantumDefectTable& table,
                          const std::pair<RydbergLevel, RydbergLevel>& initial,
                          const std::pair<RydbergLevel, RydbergLevel>& final_pair);

/// |nS1/2,(n-2)S1/2> -> |(n-1)P_J1,(n-2)P_J2>.
PairChannel pair_mismatch(const QuantumDefectTable& table, int n, Channel channel);

struct ScanRow {
  int n = 0;
  Channel channel;
  double delta_e_ghz = 0.0;
};

struct Crossing {
  int n_low = 0;
  int n_high = 0;
  Channel channel;
};

struct ScanResult {
  std::vector<ScanRow> rows;  // ordered by channel, then n
  std::vector<Crossing> crossings;
};

/// Mismatch for every integer n in [n_min, n_max] and channel, plus every
/// adjacent (n, n+1) pair where the sign changes.
ScanResult foerster_scan(const QuantumDefectTable& table, int n_min, int n_max,
                         const std::vector<Channel>& channels);

enum class InteractionBranch { van_der_waals, resonant_dipole, automatic };

std::string to_string(InteractionBranch b);

struct InteractionParams {
  double gamma_eit_mhz = 1.9;      // EIT linewidth as a plain frequency
  double angular_prefactor = 1.0;  // stands in for the angular factors of C3
  InteractionBranch branch = InteractionBranch::automatic;
};

struct InteractionModel {
  double c3_ghz_um3 = 0.0;
  double c6_ghz_um6 = 0.0;  // 0 when exactly resonant
  double delta_e_ghz = 0.0;
  double blockade_radius_um = 0.0;
  double crossover_radius_um = 0.0;  // where C3/r^3 == |dE|
  InteractionBranch branch_used = InteractionBranch::automatic;
};

/// Semiclassical radial matrix element <n l| r |n' l+-1> ~ 1.5 nc^2 a0 in
/// units of a0, nc the mean effective quantum number.
double radial_dipole_au(double n_eff_a, double n_eff_b);

/// C3 in GHz um^3 from two transition dipoles given in e*a0.
double c3_from_dipoles(double dipole_a_au, double dipole_b_au, double prefactor = 1.0);

/// r_b = (C6 / Gamma)^(1/6).
double blockade_radius_c6(double c6_ghz_um6, double gamma_eit_mhz);
/// r_b = (C3 / Gamma)^(1/3).
double blockade_radius_c3(double c3_ghz_um3, double gamma_eit_mhz);

InteractionModel interaction_estimate(const QuantumDefectTable& table, int n, Channel channel,
                                      const InteractionParams& params);

/// Channel with the smallest |dE| at n.
Channel most_resonant_channel(const QuantumDefectTable& table, int n,
                              const std::vector<Channel>& channels = Channel::all());

}  // namespace rydtrans::structure
