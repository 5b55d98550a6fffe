#pragma once

// Lorentzian dip fitting and the measurement workflows built on it:
// linewidth from a (double) Lorentzian fit, cavity length from the free
// spectral range, mirror curvature from the transverse-mode spacing, and
// relinearisation of voltage-ramp scans.

#include <optional>
#include <random>
#include <span>
#include <vector>

#include "fpcav/electromech.hpp"
#include "fpcav/trace.hpp"

namespace fpcav::fitkit {

struct LorentzPeak {
  double center = 0.0;
  double half_width = 1.0;
  double depth = 0.0;
};

/// P(x) = baseline - sum_i depth_i / (1 + ((x - c_i) / w_i)^2)
struct LorentzianModel {
  double baseline = 1.0;
  std::vector<LorentzPeak> peaks;

  [[nodiscard]] double operator()(double x) const;

  /// half_width > 0 and 0 < depth <= baseline for every peak.
  void validate() const;
};

struct FitResult {
  LorentzianModel model;
  /// Standard errors laid out like the model (baseline, then per-peak fields).
  LorentzianModel standard_errors;
  double residual_rms = 0.0;
  double initial_residual_rms = 0.0;
  bool converged = false;
  int iterations = 0;
};

struct FitOptions {
  int max_iterations = 200;
  double relative_tolerance = 1e-10;
  double initial_damping = 1e-3;
};

/// A local minimum detected in a trace.
struct Dip {
  std::size_t index = 0;
  double center = 0.0;
  double depth = 0.0;
  double half_width = 0.0;
};

/// Dips below median - mad_factor * MAD, deepest first, each a local minimum
/// outside the half-width neighbourhood of every deeper dip.
std::vector<Dip> find_dips(const ReflectionTrace& trace, double mad_factor = 3.0);

/// Model seeded from the n deepest dips. Throws DegenerateTrace when fewer exist.
LorentzianModel initial_guess(const ReflectionTrace& trace, std::size_t n_peaks);

/// Levenberg-Marquardt fit with a finite-difference Jacobian. Non-convergence
/// is reported through FitResult::converged, not thrown.
FitResult fit_lorentzians(const ReflectionTrace& trace, std::size_t n_peaks,
                          const std::optional<LorentzianModel>& guess = std::nullopt,
                          const FitOptions& options = {});

/// Samples `model` at xs with additive Gaussian noise, clipped to [0, 1 + 3 sigma].
ReflectionTrace synthesize(const LorentzianModel& model, std::span<const double> xs,
                           double noise_sigma, std::mt19937_64& rng,
                           AbscissaKind kind = AbscissaKind::frequency);

/// L = c / (2 * fsr).
double length_from_fsr(double fsr_hz);

struct CurvatureResult {
  double radius_of_curvature = 0.0;
  double mode_spacing = 0.0;  // Hz, fundamental -> first transverse order
  FitResult fit;
};

struct CurvatureOptions {
  /// Dips shallower than this fraction of the deepest one are treated as undetected.
  double relative_detection_threshold = 0.1;
  std::size_t max_dips = 4;
};

/// Fits the fundamental and higher-order dips of a frequency-domain trace and
/// converts the first-order spacing into the mirror radius of curvature.
CurvatureResult curvature_workflow(const ReflectionTrace& trace, double length,
                                   const CurvatureOptions& options = {});

/// Maps a voltage-ramp trace onto cavity length L0 - deflection(V), reordered
/// to increasing length.
ReflectionTrace voltage_to_length_axis(const ReflectionTrace& trace,
                                       const electromech::ActuatorModel& model,
                                       double initial_length);

}  // namespace fpcav::fitkit
