#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fpcav/config.hpp"
#include "fpcav_app/commands.hpp"

namespace {

std::string default_out_dir() {
  const char* env = std::getenv("FPCAV_OUT");
  return env && *env ? env : ".";
}

}  // namespace

int main(int argc, char** argv) {
  using namespace fpcav;

  CLI::App app{"Fibre-coupled micro-mirror cavity array simulator"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string preset{config::kVisibilityMatched};
  std::vector<std::string> overrides;
  std::uint64_t seed = 1;
  std::string out_dir = default_out_dir();
  bool quiet = false;

  app.add_option("--preset", preset, "visibility-matched, linewidth-matched or a JSON file");
  app.add_option("--set", overrides, "Parameter override key=value (repeatable)")->take_all();
  app.add_option("--seed", seed, "Master random seed");
  app.add_option("--out", out_dir, "Output directory (default: $FPCAV_OUT or .)");
  app.add_flag("--quiet", quiet, "Suppress progress lines");

  auto* deflection = app.add_subcommand("deflection", "Static deflection and actuation gradient");
  auto* scan = app.add_subcommand("scan", "Voltage ramp, array tuning and linewidth traces");
  auto* fit = app.add_subcommand("fit", "Lorentzian fit of a trace CSV");
  std::string trace_path;
  std::size_t n_peaks = 1;
  fit->add_option("trace", trace_path, "Trace CSV (x,power)")->required();
  fit->add_option("--peaks", n_peaks, "Number of Lorentzian dips")->check(CLI::PositiveNumber);
  auto* lock = app.add_subcommand("lock", "Closed-loop length stabilisation run");
  auto* figures = app.add_subcommand("figures", "All figure datasets and the cavity-QED report");
  app.add_subcommand("keys", "List configurable parameter keys");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return app::kConfigError;
  }

  if (app.got_subcommand("keys")) {
    for (const auto& k : config::known_keys()) std::cout << k << '\n';
    return 0;
  }

  app::Context ctx;
  ctx.seed = seed;
  ctx.out_dir = out_dir;
  ctx.log = quiet ? nullptr : &std::cout;

  return app::run_guarded(std::cerr, [&]() -> int {
    config::RunConfig run;
    run.preset_name = preset;
    run.overrides = overrides;
    run.seed = seed;
    run.output_dir = out_dir;
    ctx.params = config::resolve(run);
    if (deflection->parsed()) return app::cmd_deflection(ctx);
    if (scan->parsed()) return app::cmd_scan(ctx);
    if (fit->parsed()) return app::cmd_fit(ctx, trace_path, n_peaks);
    if (lock->parsed()) return app::cmd_lock(ctx);
    if (figures->parsed()) return app::cmd_figures(ctx);
    return app::kConfigError;
  });
}
