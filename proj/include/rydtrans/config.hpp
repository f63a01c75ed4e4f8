#pragma once

// Run configuration: one JSON document with a section per module. Unknown
// keys are rejected and every module invariant is checked on load; errors
// carry the JSON path of the offending entry.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "rydtrans/eit.hpp"
#include "rydtrans/structure.hpp"
#include "rydtrans/transistor.hpp"

namespace rydtrans::config {

using nlohmann::json;

struct StructureOptions {
  std::filesystem::path quantum_defects;  // empty = shipped 87Rb table
  int n_min = 60;
  int n_max = 80;
  std::vector<structure::Channel> channels = structure::Channel::all();
  int n = 69;  // gate principal quantum number for the interaction estimate
  std::string channel = "auto";  // channel label, or "auto" for the most resonant one
  structure::InteractionParams interaction;
};

struct SpectrumGrid {
  double min_mhz = -20.0;
  double max_mhz = 20.0;
  double step_mhz = 0.02;
};

struct AnalysisOptions {
  double n_g = 1.0;
  double n_cut = 9.5;
  double cut_min = 7.5;
  double cut_max = 12.5;
  double decay_start_us = 0.0;
  double reference_mean = 0.0;  // 0 = take the reference from data
};

struct RunConfig {
  StructureOptions structure;
  eit::EitParams eit = eit::EitParams::operating_point();
  SpectrumGrid grid;
  eit::CloudParams cloud;
  std::string experiment_preset = "click_histogram";
  mc::ExperimentConfig experiment = mc::ExperimentConfig::click_histogram();
  AnalysisOptions analysis;
  json metadata;
  std::uint64_t seed = 1;
  std::filesystem::path out_dir = "out";

  /// Checks every section; throws ConfigError("<section>.<field> ...").
  void validate() const;
};

/// Provenance fields carried with every run; not used by the physics.
json default_metadata();

RunConfig from_json(const json& doc);
json to_json(const RunConfig& cfg);
RunConfig load(const std::filesystem::path& path);

mc::ExperimentConfig experiment_preset(const std::string& name);

/// FNV-1a 64 over the canonical (sorted-key, compact) JSON dump, hex. The
/// output directory is left out: it does not change what is computed.
std::string config_hash(const RunConfig& cfg);

}  // namespace rydtrans::config
