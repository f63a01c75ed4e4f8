#include <doctest.h>

#include <clocale>
#include <filesystem>
#include <fstream>
#include <locale>
#include <sstream>

#include "rydtrans/config.hpp"
#include "rydtrans/errors.hpp"
#include "rydtrans/io.hpp"

using namespace rydtrans;
namespace fs = std::filesystem;

namespace {

fs::path tmp_dir(const std::string& name) {
  const fs::path p = fs::path(RYDTRANS_TEST_TMP) / "io" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

fs::path write_file(const fs::path& p, const std::string& text) {
  io::write_text(p, text);
  return p;
}

struct CommaDecimal : std::numpunct<char> {
  char do_decimal_point() const override { return ','; }
  char do_thousands_sep() const override { return '.'; }
  std::string do_grouping() const override { return "\3"; }
};

}  // namespace

TEST_CASE("numbers are written the same under any locale") {
  const std::string before = io::format_number(1234.5678);
  const auto old = std::locale::global(std::locale(std::locale::classic(), new CommaDecimal));
  CHECK(io::format_number(1234.5678) == before);
  CHECK(io::format_number(0.1) == "0.1");
  std::locale::global(old);
  CHECK(before == "1234.5678");
  for (double v : {0.0, -2.5e-300, 1.0 / 3.0, 6.02214076e23}) {
    CHECK(std::stod(io::format_number(v)) == v);
  }
}

TEST_CASE("spectrum csv round trip") {
  eit::Spectrum s{Eigen::VectorXd::LinSpaced(5, -2.0, 2.0), Eigen::VectorXd::LinSpaced(5, 0.1, 0.9)};
  std::ostringstream out;
  io::write_spectrum_csv(out, s);
  CHECK(out.str().rfind("detuning_mhz,transmission\n", 0) == 0);
  const auto p = write_file(tmp_dir("spectrum") / "s.csv", out.str());
  const auto back = io::read_spectrum_csv(p);
  CHECK(back.detunings == s.detunings);
  CHECK(back.transmissions == s.transmissions);

  CHECK_THROWS_AS(io::read_spectrum_csv(write_file(p, "freq,T\n0,1\n")), ConfigError);
  CHECK_THROWS_AS(io::read_spectrum_csv(write_file(p, "detuning_mhz,transmission\n0,1,2\n")), ConfigError);
  CHECK_THROWS_AS(io::read_spectrum_csv(write_file(p, "detuning_mhz,transmission\n0,x\n")), ConfigError);
  CHECK_THROWS_AS(io::read_spectrum_csv(tmp_dir("spectrum") / "missing.csv"), ConfigError);
}

TEST_CASE("trace csv round trip keeps bin widths") {
  mc::Trace t;
  t.t_us = {1.0, 3.0, 5.0, 6.5};
  t.bin_width_us = {2.0, 2.0, 2.0, 1.0};
  t.photons = {0.1, 0.2, 0.3, 0.15};
  t.stderr_ = {0.01, 0.01, 0.02, 0.01};
  std::ostringstream out;
  io::write_trace_csv(out, t);
  CHECK(out.str().rfind("t_us,transmitted_photons_per_bin,stderr\n", 0) == 0);
  const auto back = io::read_trace_csv(write_file(tmp_dir("trace") / "t.csv", out.str()));
  CHECK(back.t_us == t.t_us);
  CHECK(back.photons == t.photons);
  CHECK(back.stderr_ == t.stderr_);
  REQUIRE(back.bin_width_us.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) CHECK(back.bin_width_us[i] == doctest::Approx(t.bin_width_us[i]));
}

TEST_CASE("histogram csv round trip") {
  const mc::ClickHistogram h({{0, 10}, {2, 5}, {7, 1}});
  std::ostringstream out;
  io::write_histogram_csv(out, h);
  CHECK(out.str().rfind("n_clicks,events\n", 0) == 0);
  const auto p = write_file(tmp_dir("hist") / "h.csv", out.str());
  CHECK(io::read_histogram_csv(p).counts() == h.counts());
  CHECK_THROWS_AS(io::read_histogram_csv(write_file(p, "n_clicks,events\n1,-3\n")), ConfigError);
  CHECK_THROWS_AS(io::read_histogram_csv(write_file(p, "n_clicks,events\n1.5,3\n")), ConfigError);
}

TEST_CASE("metrics record has every key") {
  const auto m = io::empty_metrics();
  for (const char* key : {"ratio", "suppression", "gain", "tau_ms", "p0", "p0_range", "n_thr", "c0", "c1", "fidelity",
                          "eta_lower", "eta_poisson"}) {
    REQUIRE(m.contains(key));
    CHECK(m[key].is_null());
  }
  CHECK(m.size() == 12);
}

TEST_CASE("config defaults and round trip") {
  const auto cfg = config::from_json(io::json::object());
  CHECK(cfg.eit.od == doctest::Approx(5.0));
  CHECK(cfg.experiment.reference_mean_clicks() == doctest::Approx(8.62));
  CHECK(cfg.metadata["gate_n"] == 69);
  const auto again = config::from_json(config::to_json(cfg));
  CHECK(config::to_json(again) == config::to_json(cfg));
  CHECK(config::config_hash(again) == config::config_hash(cfg));
  auto changed = cfg;
  changed.seed = 2;
  CHECK(config::config_hash(changed) != config::config_hash(cfg));
}

TEST_CASE("config errors name the offending entry") {
  auto message_of = [](const char* text) -> std::string {
    try {
      config::from_json(io::json::parse(text));
    } catch (const ConfigError& e) {
      return e.what();
    }
    return "";
  };
  CHECK(message_of(R"({"eit": {"odd": 3}})").find("eit.odd") != std::string::npos);
  CHECK(message_of(R"({"eit": {"od": "five"}})").find("eit.od") != std::string::npos);
  CHECK(message_of(R"({"eit": {"od": -1}})").find("eit.od") != std::string::npos);
  CHECK(message_of(R"({"experiment": {"eta_det": 2}})").find("experiment.eta_det") != std::string::npos);
  CHECK(message_of(R"({"experiment": {"preset": "bogus"}})").find("experiment.preset") != std::string::npos);
  CHECK(message_of(R"({"structure": {"channels": ["p12p99"]}})").find("structure.channels") != std::string::npos);
  CHECK(message_of(R"({"structure": {"branch": "c9"}})").find("structure.branch") != std::string::npos);
  CHECK(message_of(R"({"cloud": {"trap_freqs_hz": [1, 2]}})").find("cloud.trap_freqs_hz") != std::string::npos);
  CHECK(message_of(R"({"mystery": 1})").find("mystery") != std::string::npos);
  CHECK(message_of(R"({"experiment": {"preset": "transistor_trace"}})").empty());
}

TEST_CASE("config files") {
  const auto dir = tmp_dir("config");
  const auto good = write_file(dir / "good.json", R"({"seed": 42, "experiment": {"preset": "none", "storage_mean": 0.5}})");
  const auto cfg = config::load(good);
  CHECK(cfg.seed == 42);
  CHECK(cfg.experiment.storage_mean == 0.5);
  CHECK(cfg.experiment_preset == "none");
  CHECK_THROWS_AS(config::load(write_file(dir / "bad.json", "{ not json")), ConfigError);
  CHECK_THROWS_AS(config::load(dir / "absent.json"), ConfigError);
}
