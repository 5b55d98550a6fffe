#pragma once

// Discrete-time simulation of the side-of-fringe PID length lock: a single
// mechanical mode driven by the controller output, read out through the
// Lorentzian reflection fringe, with setpoint, laser-power, thermal-drift
// and thermomechanical noise.

#include <cstdint>
#include <numbers>
#include <vector>

namespace fpcav::lockloop {

/// Slope of a unit-depth Lorentzian dip at its inflection point, times the FWHM.
inline constexpr double kInflectionSlopeFactor = 3.0 * std::numbers::sqrt3 / 4.0;

/// Detector volts at off-resonant power such that `step_volts` of detector
/// signal corresponds to `step_length` of cavity length at the lock point.
constexpr double detector_scale_for(double step_volts, double step_length,
                                    double fringe_fwhm_length, double fringe_depth) {
  return step_volts * fringe_fwhm_length /
         (step_length * fringe_depth * kInflectionSlopeFactor);
}

inline constexpr double kAnchorStepVolts = 0.020;
inline constexpr double kAnchorStepLength = 15e-12;

struct PlantModel {
  double natural_frequency = 223e3;  // Hz
  double quality_factor = 50.0;
  double dc_gain = 3.0e-9;           // m of deflection per control volt
  double operating_length = 42.9e-6; // m
  double fringe_fwhm_length = 3.7e-9;
  double fringe_depth = 0.85;        // normalised dip depth seen by the detector
  double detector_full_scale =       // detector volts at off-resonant power
      detector_scale_for(kAnchorStepVolts, kAnchorStepLength, 3.7e-9, 0.85);
  double spring_constant = 2.30e3;   // N/m, sets the thermomechanical amplitude

  void validate() const;
};

/// Recomputes detector_full_scale from the 20 mV <-> 15 pm anchor (or any other).
double calibrate_detector_scale(const PlantModel& plant, double step_volts = kAnchorStepVolts,
                                double step_length = kAnchorStepLength);

struct PidConfig {
  double kp = 0.0;   // V per detector V
  double ki = 0.0;   // 1/s
  double kd = 0.0;   // s
  double loop_bandwidth = 100e3;  // Hz, also the derivative low-pass corner
  double setpoint = 0.0;          // detector V; 0 selects the operating point
  double sample_rate = 1e6;       // Hz
  // Second-order notch on the error signal; disabled when notch_frequency is 0.
  double notch_frequency = 0.0;
  double notch_quality = 50.0;
  double notch_damping = 0.5;

  void validate() const;
};

struct NoiseSpec {
  double setpoint_noise_rms = 0.0;     // detector V
  double power_fluctuation_rel = 0.005;
  double thermal_drift = 0.0;          // m / sqrt(s), Wiener process
  double temperature = 295.0;          // K, thermomechanical force noise; 0 disables
  double noise_bandwidth = 1e3;        // Hz, corner of setpoint and power noise
  std::uint64_t seed = 0;

  void validate() const;

  /// Every source switched off.
  static NoiseSpec none();
};

/// Setpoint noise that corresponds to `position_rms` at the lock point.
double setpoint_noise_for_position(const PlantModel& plant, double position_rms);

struct LockTrace {
  double sample_rate = 0.0;
  std::vector<double> t;
  std::vector<double> setpoint;
  std::vector<double> detector;
  std::vector<double> control;
  std::vector<double> length_error;

  [[nodiscard]] std::size_t size() const { return t.size(); }
};

struct StepSchedule {
  double step_volts = 0.020;
  int n_steps = 4;
  double dwell = 20e-3;  // s per plateau
};

/// Operating point offset from the dip centre: FWHM / (2 sqrt 3).
double operating_offset(const PlantModel& plant);

/// Normalised reflected power at `length_error` from the lock point.
double discriminator(double length_error, const PlantModel& plant);

/// d(power)/d(length) at the lock point, 1/m (normalised power).
double discriminator_slope(const PlantModel& plant);

/// Detector volts per metre at the lock point.
double detector_slope(const PlantModel& plant);

/// Detector voltage at the lock point (the default setpoint).
double operating_setpoint(const PlantModel& plant);

struct StabilityReport {
  double overshoot = 0.0;      // fractional
  double settling_time = 0.0;  // s, to within 2 %
  bool stable = false;
};

/// Small-signal setpoint step of the noiseless loop.
StabilityReport step_check(const PlantModel& plant, const PidConfig& pid, double duration = 2e-3);

/// Throws UnstableLoop unless step_check shows a bounded response with < 50 % overshoot.
void require_stable(const PlantModel& plant, const PidConfig& pid);

/// Integrator-dominant loop shaping with a notch on the mechanical resonance:
/// ki places the unity-gain crossover of the ideal integrator loop at the
/// target bandwidth, kp is the smallest gain reaching 60 deg phase margin on
/// the sampled loop (or the best available margin), kd = 0.
PidConfig tune_pid(const PlantModel& plant, double target_bandwidth, double sample_rate = 1e6);

/// Phase margin in degrees of the sampled loop (smallest over crossovers).
double phase_margin(const PlantModel& plant, const PidConfig& pid);

struct RunOptions {
  double initial_length_error = 0.0;  // m, static offset the loop must remove
  bool check_stability = true;
};

LockTrace simulate_step_response(const PlantModel& plant, const PidConfig& pid,
                                 const NoiseSpec& noise, const StepSchedule& schedule,
                                 const RunOptions& options = {});

LockTrace simulate_noise_run(const PlantModel& plant, const PidConfig& pid,
                             const NoiseSpec& noise, double duration,
                             const RunOptions& options = {});

struct PlateauStats {
  std::vector<double> means;  // m, mean length error per plateau
  std::vector<double> rms;    // m, rms about each plateau mean
  double mean_spacing = 0.0;  // m
  double pooled_rms = 0.0;    // m
};

/// Statistics over the second half of each plateau.
PlateauStats plateau_statistics(const LockTrace& trace, const StepSchedule& schedule);

/// RMS of the length error about its mean, skipping the first `discard` seconds.
double position_rms(const LockTrace& trace, double discard = 1e-3);

}  // namespace fpcav::lockloop
