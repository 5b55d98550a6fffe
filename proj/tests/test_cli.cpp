#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int run(const std::string& args) {
  const std::string cmd = std::string(FPCAV_BINARY) + " --quiet " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string run_capture_stderr(const std::string& args, int& code) {
  const fs::path err = fs::temp_directory_path() / "fpcav_cli_stderr.txt";
  const std::string cmd = std::string(FPCAV_BINARY) + " --quiet " + args + " >/dev/null 2>" + err.string();
  const int status = std::system(cmd.c_str());
  code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream in(err);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path fresh_dir(const std::string& name) {
  const auto d = fs::temp_directory_path() / ("fpcav_cli_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json load_json(const fs::path& p) { return json::parse(slurp(p)); }

}  // namespace

TEST_CASE("usage errors exit with code 2") {
  const auto d = fresh_dir("usage");
  CHECK(run("") == 2);
  CHECK(run("bogus") == 2);
  CHECK(run("--out " + d.string() + " --set lock.foo=1 lock") == 2);
  CHECK(run("--out " + d.string() + " --preset nowhere.json deflection") == 2);
  CHECK(run("keys") == 0);

  std::ofstream(d / "bad.csv") << "x,power\n1,0.5\n2,zz\n3,0.4\n";
  int code = 0;
  const auto err = run_capture_stderr("--out " + d.string() + " fit " + (d / "bad.csv").string(), code);
  CHECK(code == 2);
  CHECK(err.find("line 3") != std::string::npos);
}

TEST_CASE("deflection command") {
  const auto d = fresh_dir("deflection");
  REQUIRE(run("--out " + d.string() + " deflection") == 0);
  const auto j = load_json(d / "deflection.json");
  // Pull-in at a third of the gap.
  CHECK(j["pull_in_deflection_m"].get<double>() == doctest::Approx(2e-6 / 3).epsilon(1e-9));
  CHECK(fs::exists(d / "deflection.csv"));
}

TEST_CASE("scan, fit and determinism") {
  const auto a = fresh_dir("scan_a");
  const auto b = fresh_dir("scan_b");
  REQUIRE(run("--out " + a.string() + " --seed 7 scan") == 0);
  REQUIRE(run("--out " + b.string() + " --seed 7 scan") == 0);

  const auto report = load_json(a / "array_report.json");
  REQUIRE(report["sites"].size() == 12);
  int traces = 0;
  for (const auto& s : report["sites"]) {
    CHECK(s["status"] == "tuned");
  }
  for (const auto& e : fs::directory_iterator(a)) {
    const auto name = e.path().filename().string();
    if (name.rfind("site_", 0) == 0 && e.path().extension() == ".csv") ++traces;
  }
  CHECK(traces == 12);

  for (const auto& e : fs::directory_iterator(a)) {
    CHECK(slurp(e.path()) == slurp(b / e.path().filename()));
  }

  // Different seed, different array.
  const auto c = fresh_dir("scan_c");
  REQUIRE(run("--out " + c.string() + " --seed 8 scan") == 0);
  CHECK(slurp(a / "array_report.json") != slurp(c / "array_report.json"));

  SUBCASE("linewidth-matched trace fits back to its model") {
    const auto lw = fresh_dir("scan_lw");
    REQUIRE(run("--out " + lw.string() + " --preset linewidth-matched scan") == 0);
    const auto side = load_json(lw / "linewidth.csv.json");
    REQUIRE(run("--out " + lw.string() + " fit " + (lw / "linewidth.csv").string()) == 0);
    const auto fit = load_json(lw / "linewidth.csv.fit.json");
    CHECK(fit["kappa_Hz"].get<double>() ==
          doctest::Approx(side["kappa_Hz"].get<double>()).epsilon(0.02));
    CHECK(fit["kappa_Hz"].get<double>() == doctest::Approx(14.97e9).epsilon(0.02));
    CHECK(run("--out " + lw.string() + " fit --peaks 3 " + (lw / "linewidth.csv").string()) == 3);
  }
}

TEST_CASE("lock command") {
  const auto d = fresh_dir("lock");
  REQUIRE(run("--out " + d.string() + " lock") == 0);
  const auto j = load_json(d / "lock_summary.json");
  CHECK(j["plateau_spacing_m"].get<double>() == doctest::Approx(15e-12).epsilon(0.05));
  CHECK(j["psd_peak_Hz"].get<double>() == doctest::Approx(223e3).epsilon(2e3 / 223e3));
  CHECK(j["full_noise_rms_m"].get<double>() > j["setpoint_noise_rms_m"].get<double>());

  const auto quiet = fresh_dir("lock_quiet");
  REQUIRE(run("--out " + quiet.string() +
              " --set lock.setpoint_position_rms=0 --set lock.power_fluctuation=0"
              " --set lock.temperature=0 --set lock.thermal_drift=0 lock") == 0);
  const auto q = load_json(quiet / "lock_summary.json");
  CHECK(q["full_noise_rms_m"].get<double>() < 1e-15);

  CHECK(run("--out " + d.string() + " --set lock.loop_bandwidth=150e3 lock") == 4);
}

TEST_CASE("figures command writes every dataset") {
  const auto d = fresh_dir("figures");
  REQUIRE(run("--out " + d.string() + " figures") == 0);
  for (const char* f : {"deflection.csv", "deflection.json", "optics.json", "scan_ramp.csv",
                        "array_report.json", "scan_stacked.csv", "linewidth.csv", "lock_steps.csv",
                        "lock_psd.csv", "lock_summary.json", "cqed.json", "parameters.json"}) {
    CHECK_MESSAGE(fs::exists(d / f), f);
  }
  CHECK(load_json(d / "cqed.json").is_object());
}
