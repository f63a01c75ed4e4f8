#pragma once

// File formats: CSV tables (dot decimal separator regardless of locale,
// fixed column order) and JSON reports.

#include <filesystem>
#include <iosfwd>
#include <string>

#include <json.hpp>

#include "rydtrans/analysis.hpp"
#include "rydtrans/eit.hpp"
#include "rydtrans/structure.hpp"
#include "rydtrans/transistor.hpp"

namespace rydtrans::io {

using nlohmann::json;

/// Shortest round-trip decimal form, independent of the global locale.
std::string format_number(double v);

// foerster scan: n,channel,delta_e_ghz / [{n_low, n_high, channel}]
void write_scan_csv(std::ostream& out, const structure::ScanResult& scan);
json crossings_json(const structure::ScanResult& scan);
json interaction_json(int n, structure::Channel channel, const structure::InteractionParams& params,
                      const structure::InteractionModel& model);

// spectrum: detuning_mhz,transmission
void write_spectrum_csv(std::ostream& out, const eit::Spectrum& spectrum);
eit::Spectrum read_spectrum_csv(const std::filesystem::path& path);
json spectrum_summary_json(const eit::EitParams& params, const eit::SpectrumResult& result);
/// {od, omega_c_mhz, gamma_r_mhz, fwhm_mhz, t0, residual}
json fit_report_json(const eit::SpectrumFit& fit);

// trace: t_us,transmitted_photons_per_bin,stderr
void write_trace_csv(std::ostream& out, const mc::Trace& trace);
mc::Trace read_trace_csv(const std::filesystem::path& path);

// histogram: n_clicks,events
void write_histogram_csv(std::ostream& out, const mc::ClickHistogram& hist);
mc::ClickHistogram read_histogram_csv(const std::filesystem::path& path);

/// The full metrics record; entries that were not computed are null.
/// {ratio, suppression, gain, tau_ms, p0, p0_range, n_thr, c0, c1,
///  fidelity, eta_lower, eta_poisson}
json empty_metrics();

/// Writes `text` to `path`, creating parent directories.
void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace rydtrans::io
