#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>

#include "fpcav/config.hpp"

namespace fpcav::app {

enum ExitCode : int {
  kOk = 0,
  kConfigError = 2,
  kNoConvergence = 3,
  kUnstable = 4,
};

struct Context {
  config::Parameters params;
  std::uint64_t seed = 1;
  std::filesystem::path out_dir = ".";
  std::ostream* log = nullptr;  // short progress lines; null for silence
};

/// deflection.csv (V, deflection, gradient) up to pull-in and deflection.json.
int cmd_deflection(const Context& ctx);

/// Single-site voltage ramp, a tuned and aligned array row with per-site and
/// stacked traces, the frequency-domain linewidth trace and optics report.
int cmd_scan(const Context& ctx);

/// Lorentzian fit of a trace file; writes <trace>.fit.json into out_dir.
int cmd_fit(const Context& ctx, const std::filesystem::path& trace_path, std::size_t n_peaks);

/// Setpoint-step trace, noise runs, PSD and noise-statistics summary.
int cmd_lock(const Context& ctx);

/// Everything above plus the cavity-QED report and the resolved parameters.
int cmd_figures(const Context& ctx);

/// Maps library exceptions to exit codes and prints the diagnostic.
int run_guarded(std::ostream& err, const std::function<int()>& command);

}  // namespace fpcav::app
