#pragma once

// Rows of fibre-coupled micro-mirror cavities: fabrication jitter, tilt
// alignment of the fibre block, per-site tuning onto a common laser and
// voltage-ramp scans.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "fpcav/electromech.hpp"
#include "fpcav/optics.hpp"
#include "fpcav/trace.hpp"

namespace fpcav::arraysim {

struct ArrayLayout {
  int sites_per_row = 12;
  int rows = 4;
  double pitch = 250e-6;        // m, along a row
  double row_spacing = 1.75e-3; // m

  void validate() const;
  [[nodiscard]] int site_count() const { return sites_per_row * rows; }
};

/// How a core-position rms is read: per transverse axis, or as the rms of
/// the radial distance (per-axis sigma = rms / sqrt 2).
enum class JitterModel { per_axis, radial };

std::string_view to_string(JitterModel model);
JitterModel jitter_model_from_string(std::string_view name);

/// Nominal single-site design shared by every site of the array.
struct SiteDesign {
  optics::CavityGeometry geometry{};
  optics::FibreSpec fibre{};
  optics::MirrorSpec micro_mirror = optics::metal_mirror(optics::kVisibilityMatchedReflectivity);
  electromech::ActuatorModel actuator =
      electromech::make_actuator(electromech::CantileverGeometry{}, electromech::MaterialProps{});
  /// Cantilever-height variation between sites, rms (m).
  double length_disorder_rms = 50e-9;
  JitterModel jitter_model = JitterModel::per_axis;

  void validate() const;
};

struct SiteRealization {
  int index = 0;                   // row * sites_per_row + column
  int row = 0;
  int column = 0;
  optics::Vec2 core_offset{};      // m
  double height_offset = 0.0;      // m, mirror height disorder
  double nominal_length = 0.0;     // m, design length + height_offset
  bool functional = true;
  electromech::ActuatorModel actuator{};
  optics::CavityOptics optics{};   // at the current cavity length
};

/// Independent sites with Gaussian core offsets and height disorder and
/// Bernoulli functional flags. Every site draws from its own stream seeded
/// by (seed, index), so results do not depend on evaluation order.
std::vector<SiteRealization> sample_array(const ArrayLayout& layout, const SiteDesign& design,
                                          double jitter_rms, double yield_prob,
                                          std::uint64_t seed);

/// Sites of one row, in column order.
std::vector<SiteRealization> row_sites(const std::vector<SiteRealization>& sites, int row);

struct AlignmentState {
  double global_gap = 0.0;  // m, length at column 0 for a mirror with zero height offset
  double tilt = 0.0;        // rad, about the axis perpendicular to the row
};

struct AlignmentOptions {
  double tolerance = 3.7e-9;     // m
  double gap_step = 1e-9;        // m, positioner resolution
  double tilt_step = 1e-7;       // rad, goniometer resolution
  double max_tilt = 1e-2;        // rad
};

/// Cavity length of a site under a given alignment.
double aligned_length(const SiteRealization& site, const AlignmentState& alignment,
                      double pitch);

/// Sets gap and tilt so that the first and last sites of a row sit at
/// target_length. Throws InvalidArgument if either end site is dead,
/// Infeasible if the tilt exceeds the bound or the stage resolution cannot
/// meet the tolerance, UnstableCavity if any site leaves (0, R).
AlignmentState tilt_align(const std::vector<SiteRealization>& row, double target_length,
                          double pitch, const AlignmentOptions& options = {});

/// Copies of the sites with optics recomputed at their aligned lengths.
std::vector<SiteRealization> apply_alignment(const std::vector<SiteRealization>& row,
                                             const AlignmentState& alignment, double pitch);

enum class SiteStatus { tuned, dead, pull_in_limited };
std::string_view to_string(SiteStatus status);

struct SiteTune {
  int index = 0;
  SiteStatus status = SiteStatus::dead;
  double voltage = 0.0;             // V
  double deflection = 0.0;          // m
  double length = 0.0;              // m, tuned cavity length
  long long longitudinal_order = 0; // q in 2L = q lambda
  double residual_detuning = 0.0;   // Hz
  double visibility = 0.0;
};

struct TuneResult {
  std::vector<SiteTune> sites;
  int tuned = 0;
  int dead = 0;
  int pull_in_limited = 0;
  double visibility_min = 0.0;   // over tuned sites
  double visibility_mean = 0.0;
};

/// Voltage bringing the nearest fundamental resonance reachable by pulling
/// the mirror down (shortening the cavity) onto the laser. Coarse scan of
/// 1000 voltages up to pull-in, then bisection. Uses site.optics.geometry.length
/// as the undeflected cavity length. Throws DeadSite or PullInLimited.
SiteTune tune_site(const SiteRealization& site, double laser_frequency);

/// Resonance frequency of the fundamental mode of order q at deflection d.
double resonance_frequency(const SiteRealization& site, long long order, double deflection);

/// Aligns the row's optics, tunes each site and aggregates; per-site
/// failures are recorded in the status, not thrown.
TuneResult tune_all(const std::vector<SiteRealization>& row, const AlignmentState& alignment,
                    double pitch, double laser_frequency);

struct ScanOptions {
  bool higher_order_modes = true;
  double laser_frequency = 0.0;  // Hz; 0 selects the design wavelength
};

/// Reflected power against a linear voltage ramp, through static deflection,
/// cavity length and the reflection spectrum. Throws PullInExceeded when the
/// ramp reaches pull-in.
ReflectionTrace scan_site(const SiteRealization& site, double v_start, double v_end,
                          std::size_t n_points, const ScanOptions& options = {});

/// Yield statistics over Monte-Carlo seeds: mean and standard deviation of
/// the functional count per array.
struct YieldStats {
  double mean_functional = 0.0;
  double stddev_functional = 0.0;
  int seeds = 0;
  int sites = 0;
};

YieldStats yield_statistics(const ArrayLayout& layout, const SiteDesign& design,
                            double yield_prob, int n_seeds, std::uint64_t first_seed);

/// JSON report: alignment, per-site voltage, detuning, visibility, status and summary.
std::string array_report_json(const std::vector<SiteRealization>& row,
                              const AlignmentState& alignment, const TuneResult& result);

/// Traces stacked as `site,x,power,stacked`, with stacked = power + 0.1 * k
/// for the k-th trace.
void write_stacked_csv(const std::filesystem::path& path, const std::vector<int>& site_indices,
                       const std::vector<ReflectionTrace>& traces, double offset_step = 0.1);

}  // namespace fpcav::arraysim
