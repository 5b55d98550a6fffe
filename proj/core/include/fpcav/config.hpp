#pragma once

// Named parameter presets, `key=value` overrides and the builders that turn a
// flat parameter set into the model objects of each module.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fpcav/arraysim.hpp"
#include "fpcav/electromech.hpp"
#include "fpcav/lockloop.hpp"
#include "fpcav/optics.hpp"

namespace fpcav::config {

inline constexpr std::string_view kVisibilityMatched = "visibility-matched";
inline constexpr std::string_view kLinewidthMatched = "linewidth-matched";

struct Parameters {
  std::string preset{kVisibilityMatched};

  electromech::CantileverGeometry cantilever{};
  electromech::MaterialProps material{};
  double arm_mass_coefficient = electromech::kDefaultArmMassCoefficient;

  optics::CavityGeometry cavity{};
  double fibre_waist = 2.7e-6;
  double fibre_offset_x = 0.0;
  double fibre_offset_y = 0.0;
  optics::MirrorSpec fibre_mirror{};
  double micro_mirror_reflectivity = optics::kVisibilityMatchedReflectivity;

  struct Scan {
    double initial_detuning = 100e-9;  // m beyond a resonance at V = 0
    double max_deflection = 600e-9;    // m at the end of the single-site ramp
    int ramp_points = 4001;
    double site_window = 12e-9;        // m of deflection either side of resonance
    int site_points = 801;
    double linewidth_span = 6.0;       // half-span in units of kappa/2pi
    int linewidth_points = 2001;
    double noise_sigma = 0.002;        // normalised power
  } scan;

  struct Array {
    int sites_per_row = 12;
    int rows = 4;
    double pitch = 250e-6;
    double row_spacing = 1.75e-3;
    double jitter_rms = 500e-9;
    std::string jitter_model = "per_axis";
    double yield = 1.0;
    double length_disorder_rms = 50e-9;
    int row = 0;
  } array;

  struct Lock {
    double natural_frequency = 223e3;
    double quality_factor = 50.0;
    double bias_deflection = 200e-9;  // sets the actuator gain dL/dV
    double fringe_fwhm_length = 3.7e-9;
    double fringe_depth = 0.85;
    double loop_bandwidth = 100e3;
    double sample_rate = 1e6;
    double setpoint_position_rms = 1.1e-12;  // m equivalent
    double power_fluctuation = 0.005;
    double thermal_drift = 0.0;
    double temperature = 295.0;
    double noise_bandwidth = 1e3;
    double step_volts = 0.020;
    int n_steps = 4;
    double dwell = 20e-3;
    double noise_duration = 1.0;
    double psd_smoothing = 5e3;  // Hz, Gaussian running average
  } lock;

  struct Cqed {
    double atom_decay_rate = 2.0 * constants::pi * 3e6;  // rad/s, Rb D2 amplitude decay
    double micro_mirror_reflectivity = optics::kLinewidthMatchedReflectivity;
    double high_finesse = 6e4;
    double high_finesse_half_linewidth = 2.0 * constants::pi * 26e6;  // rad/s
    double nv_wavelength = 637e-9;
    double nv_branching = 0.04;
  } cqed;
};

std::vector<std::string> preset_names();

/// Built-in preset by name, or a JSON file whose (nested or dotted) keys are
/// applied on top of the visibility-matched preset. Throws ConfigError.
Parameters load_preset(std::string_view name_or_path);

/// Sets one dotted key from its textual value. Throws ConfigError naming the
/// key when it is unknown or the value does not parse.
void apply_override(Parameters& params, std::string_view key, std::string_view value);

/// Parses `key=value` and applies it.
void apply_assignment(Parameters& params, std::string_view assignment);

/// Every key and value, nested by the dotted path.
std::string to_json(const Parameters& params);

/// Dotted names of all configurable keys.
std::vector<std::string> known_keys();

struct RunConfig {
  std::string preset_name{kVisibilityMatched};
  std::vector<std::string> overrides;  // key=value
  std::uint64_t seed = 1;
  std::filesystem::path output_dir = ".";
};

Parameters resolve(const RunConfig& run);

electromech::ActuatorModel actuator(const Parameters& p);
optics::FibreSpec fibre(const Parameters& p);
optics::CavityOptics cavity_optics(const Parameters& p);
arraysim::ArrayLayout layout(const Parameters& p);
arraysim::SiteDesign site_design(const Parameters& p);
lockloop::PlantModel plant_model(const Parameters& p);
lockloop::NoiseSpec noise_spec(const Parameters& p, std::uint64_t seed);
lockloop::StepSchedule step_schedule(const Parameters& p);

struct CqedReport {
  double cavity_waist;       // m
  double overlap_squared;
  double visibility;
  double coupling;           // rad/s
  double half_linewidth;     // rad/s
  double cooperativity;
  double high_finesse_cooperativity;
  double nv_cavity_waist;    // m
  double nv_half_linewidth;  // rad/s
  double nv_cooperativity;
};

/// Figures of merit for the Rb D2 line with the measured linewidth, the
/// high-finesse projection and the NV zero-phonon-line projection.
CqedReport cqed_report(const Parameters& p);
std::string cqed_report_json(const CqedReport& report);

/// w_C, eta, r1^a, finesse, kappa/2pi, FSR and visibility of the preset cavity.
std::string optics_report_json(const optics::CavityOptics& optics);

}  // namespace fpcav::config
