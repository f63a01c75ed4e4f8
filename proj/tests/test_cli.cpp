#include <doctest.h>

#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "rydtrans/cli.hpp"
#include "rydtrans/io.hpp"

using namespace rydtrans;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome run(std::vector<std::string> args) {
  args.insert(args.begin(), "rydtrans");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::path(RYDTRANS_TEST_TMP) / "cli" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

io::json read_json(const fs::path& p) { return io::json::parse(io::read_text(p)); }

std::size_t line_count(const fs::path& p) {
  const auto text = io::read_text(p);
  return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

}  // namespace

TEST_CASE("foerster subcommand") {
  const auto dir = scratch("foerster");
  const auto r = run({"foerster", "--n", "60:80", "--out-dir", dir.string()});
  REQUIRE(r.code == cli::kExitOk);
  CHECK(line_count(dir / "foerster_scan.csv") == 1 + 21 * 4);
  const auto crossings = read_json(dir / "foerster_crossings.json");
  CHECK(crossings.size() >= 2);
  const auto blockade = read_json(dir / "blockade.json");
  CHECK(blockade["blockade_radius_um"].get<double>() > 8.0);
  CHECK(blockade["blockade_radius_um"].get<double>() < 32.0);
  CHECK(blockade.contains("convention"));

  const auto single = scratch("foerster1");
  REQUIRE(run({"foerster", "--channels", "p12p12", "--out-dir", single.string(), "--quiet"}).code == 0);
  CHECK(line_count(single / "foerster_scan.csv") == 1 + 21);
  CHECK(read_json(single / "foerster_crossings.json").empty());

  CHECK(run({"foerster", "--channels", "p12p99", "--out-dir", dir.string()}).code == cli::kExitConfig);
  CHECK(run({"foerster", "--n", "80:60", "--out-dir", dir.string()}).code == cli::kExitConfig);
  CHECK(run({"foerster", "--qd-file", (dir / "none.txt").string(), "--out-dir", dir.string()}).code ==
        cli::kExitConfig);
  const auto c3 = run({"foerster", "--branch", "c3", "--out-dir", dir.string()});
  REQUIRE(c3.code == 0);
  CHECK(read_json(dir / "blockade.json")["branch_used"] == "c3");
}

TEST_CASE("eit subcommands") {
  const auto dir = scratch("eit");
  SUBCASE("od 0 gives unit transmission") {
    REQUIRE(run({"eit", "spectrum", "--od", "0", "--out-dir", dir.string()}).code == 0);
    const auto s = io::read_spectrum_csv(dir / "eit_spectrum.csv");
    CHECK((s.transmissions.array() == 1.0).all());
  }
  SUBCASE("operating point report and fit round trip") {
    REQUIRE(run({"eit", "spectrum", "--step", "0.05", "--out-dir", dir.string()}).code == 0);
    const auto summary = read_json(dir / "eit_spectrum.json");
    CHECK(summary["od"].get<double>() == doctest::Approx(5.0).epsilon(0.1));
    CHECK(summary["fwhm_mhz"].get<double>() == doctest::Approx(1.9).epsilon(0.1));
    const auto fit = run({"eit", "fit", "--input", (dir / "eit_spectrum.csv").string(), "--od", "3", "--omega-c",
                          "4", "--gamma-r", "0.8", "--out-dir", dir.string()});
    REQUIRE(fit.code == 0);
    const auto report = read_json(dir / "eit_fit.json");
    CHECK(report["od"].get<double>() == doctest::Approx(summary["od"].get<double>()).epsilon(1e-3));
    CHECK(report["omega_c_mhz"].get<double>() == doctest::Approx(summary["omega_c_mhz"].get<double>()).epsilon(1e-3));
    CHECK(report["gamma_r_mhz"].get<double>() == doctest::Approx(summary["gamma_r_mhz"].get<double>()).epsilon(1e-3));
    CHECK(report["fwhm_mhz"].get<double>() == doctest::Approx(1.9).epsilon(0.1));
  }
  SUBCASE("cloud") {
    REQUIRE(run({"eit", "cloud", "--out-dir", dir.string()}).code == 0);
    CHECK(read_json(dir / "cloud_od.json")["od_eff"].get<double>() == doctest::Approx(8.0).epsilon(0.3));
  }
  SUBCASE("errors") {
    const auto missing = (dir / "nope.csv").string();
    const auto r = run({"eit", "fit", "--input", missing, "--out-dir", dir.string()});
    CHECK(r.code == cli::kExitConfig);
    CHECK(r.err.find(missing) != std::string::npos);
    CHECK(run({"eit", "spectrum", "--od", "-1", "--out-dir", dir.string()}).code == cli::kExitConfig);
    CHECK(run({"eit", "spectrum", "--bogus", "--out-dir", dir.string()}).code == cli::kExitConfig);
    CHECK(run({"eit"}).code == cli::kExitConfig);
  }
}

TEST_CASE("simulate subcommand") {
  SUBCASE("same seed gives byte-identical files") {
    const auto a = scratch("sim_a");
    const auto b = scratch("sim_b");
    REQUIRE(run({"--seed", "7", "simulate", "--shots", "1", "--out-dir", a.string()}).code == 0);
    REQUIRE(run({"--seed", "7", "simulate", "--shots", "1", "--out-dir", b.string()}).code == 0);
    for (const char* f : {"gated_trace.csv", "gated_histogram.csv", "gated_manifest.json"}) {
      CHECK(io::read_text(a / f) == io::read_text(b / f));
    }
    REQUIRE(run({"simulate", "--seed", "9", "--shots", "3000", "--threads", "1", "--out-dir", a.string()}).code == 0);
    REQUIRE(run({"simulate", "--seed", "9", "--shots", "3000", "--threads", "5", "--out-dir", b.string()}).code == 0);
    for (const char* f : {"gated_trace.csv", "gated_histogram.csv", "gated_manifest.json"}) {
      CHECK(io::read_text(a / f) == io::read_text(b / f));
    }
    const auto manifest = read_json(a / "gated_manifest.json");
    CHECK(manifest["seed"] == 9);
    CHECK(manifest["shots"] == 3000);
    CHECK(manifest.contains("config_hash"));
  }
  SUBCASE("reference mean") {
    const auto d = scratch("sim_ref");
    REQUIRE(run({"simulate", "--gated", "false", "--shots", "50000", "--out-dir", d.string()}).code == 0);
    const auto h = io::read_histogram_csv(d / "reference_histogram.csv");
    CHECK(std::abs(h.mean() - 8.62) < 4.0 * std::sqrt(8.62 / 50000.0));
  }
  SUBCASE("bad arguments") {
    const auto d = scratch("sim_bad");
    CHECK(run({"simulate", "--shots", "0", "--out-dir", d.string()}).code == cli::kExitConfig);
    CHECK(run({"simulate", "--preset", "fig9", "--out-dir", d.string()}).code == cli::kExitConfig);
    CHECK(run({"simulate", "--gated", "maybe", "--out-dir", d.string()}).code == cli::kExitConfig);
    CHECK(run({"--config", (d / "absent.json").string(), "simulate"}).code == cli::kExitConfig);
  }
}

TEST_CASE("analyze subcommands") {
  SUBCASE("storage") {
    const auto d = scratch("an_storage");
    REQUIRE(run({"analyze", "storage", "--p0", "0.60", "--out-dir", d.string()}).code == 0);
    const auto m = read_json(d / "metrics.json");
    CHECK(std::abs(m["eta_poisson"].get<double>() - 0.5108) < 1e-4);
    CHECK(m["eta_lower"].get<double>() == doctest::Approx(0.4));
    CHECK(m["fidelity"].is_null());
  }
  SUBCASE("pipeline reproduces the configured p0") {
    const auto d = scratch("an_pipeline");
    // permanent blockade: the blocked branch stays below the cut
    io::write_text(d / "cfg.json",
                   R"({"experiment": {"preset": "click_histogram", "tau_blockade_ms": 1e6}})");
    const auto cfg = (d / "cfg.json").string();
    REQUIRE(run({"--config", cfg, "simulate", "--shots", "100000", "--out-dir", d.string()}).code == 0);
    REQUIRE(run({"--config", cfg, "simulate", "--shots", "100000", "--gated", "false", "--out-dir", d.string()})
                .code == 0);
    const auto gated = (d / "gated_histogram.csv").string();
    REQUIRE(run({"analyze", "bimodal", "--gated", gated, "--ref-mean", "8.62", "--out-dir", d.string()}).code == 0);
    const auto m = read_json(d / "metrics.json");
    const double p0 = m["p0"].get<double>();
    const double se = m["details"]["p0_stderr"].get<double>();
    // the Poisson(3.49) tail adds ~0.004 above the cut
    CHECK(std::abs(p0 - 0.6036) < 3.0 * se + 1e-3);
    CHECK(std::abs(p0 - 0.60) < 0.02);

    REQUIRE(run({"analyze", "fidelity", "--gated", gated, "--reference", (d / "reference_histogram.csv").string(),
                 "--out-dir", d.string()})
                .code == 0);
    const auto f = read_json(d / "metrics.json");
    CHECK(f["n_thr"].get<double>() == 5.5);
    CHECK(f["fidelity"].get<double>() == doctest::Approx(0.86).epsilon(0.02 / 0.86));
    CHECK(f["p0_range"].size() == 2);
  }
  SUBCASE("extinction and decay") {
    const auto d = scratch("an_trace");
    REQUIRE(run({"simulate", "--preset", "transistor_trace", "--shots", "20000", "--out-dir", d.string()}).code == 0);
    REQUIRE(run({"simulate", "--preset", "transistor_trace", "--shots", "20000", "--gated", "false", "--out-dir",
                 d.string()})
                .code == 0);
    const auto g = (d / "gated_trace.csv").string();
    const auto r = (d / "reference_trace.csv").string();
    REQUIRE(run({"analyze", "extinction", "--gated", g, "--reference", r, "--out-dir", d.string()}).code == 0);
    const auto m = read_json(d / "metrics.json");
    CHECK(m["suppression"].get<double>() == doctest::Approx(0.89).epsilon(0.03));
    CHECK(m["gain"].get<double>() == doctest::Approx(20.0).epsilon(0.1));
    REQUIRE(run({"analyze", "decay", "--gated", g, "--reference", r, "--out-dir", d.string()}).code == 0);
    CHECK(read_json(d / "metrics.json")["details"]["radiative_lifetime_ms"] == 0.14);
  }
  SUBCASE("errors map to exit codes") {
    const auto d = scratch("an_err");
    const auto missing = (d / "missing.csv").string();
    const auto r = run({"analyze", "extinction", "--gated", missing, "--reference", missing, "--out-dir", d.string()});
    CHECK(r.code == cli::kExitConfig);
    CHECK(r.err.find(missing) != std::string::npos);
    // too few populated bins above the cut is a numerical failure
    io::write_text(d / "h.csv", "n_clicks,events\n0,100\n1,50\n12,3\n");
    CHECK(run({"analyze", "bimodal", "--gated", (d / "h.csv").string(), "--ref-mean", "8.62", "--out-dir",
               d.string()})
              .code == cli::kExitNumerical);
    CHECK(run({"analyze", "storage", "--p0", "1.5", "--out-dir", d.string()}).code == cli::kExitConfig);
    CHECK(run({"analyze", "bimodal", "--gated", (d / "h.csv").string(), "--out-dir", d.string()}).code ==
          cli::kExitConfig);
    CHECK(run({"analyze"}).code == cli::kExitConfig);
  }
}

TEST_CASE("help and version") {
  CHECK(run({"--help"}).code == 0);
  const auto v = run({"--version"});
  CHECK(v.code == 0);
  CHECK(v.out.find(cli::kVersion) != std::string::npos);
}
