#pragma once

// Mode-matched fibre/micro-mirror Fabry-Perot cavity: Gaussian mode
// quantities, the mode-filtered reflection lineshape and cavity-QED figures
// of merit.

#include <cmath>

namespace fpcav::optics {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  [[nodiscard]] double norm() const { return std::hypot(x, y); }
};

/// Power partition of one mirror: R + T + loss = 1.
struct MirrorSpec {
  double power_reflectivity = 0.987;
  double power_transmission = 0.012;
  double power_loss = 0.001;

  void validate() const;

  [[nodiscard]] double r() const { return std::sqrt(power_reflectivity); }
  [[nodiscard]] double t() const { return std::sqrt(power_transmission); }
};

/// Opaque metal mirror: no transmission, loss = 1 - R.
MirrorSpec metal_mirror(double power_reflectivity);

inline constexpr double kVisibilityMatchedReflectivity = 0.98;
inline constexpr double kLinewidthMatchedReflectivity = 0.96;

struct FibreSpec {
  double mode_waist = 2.7e-6;
  Vec2 core_offset{};
  MirrorSpec mirror{};

  void validate() const;
};

struct CavityGeometry {
  double length = 42.9e-6;
  double radius_of_curvature = 51e-6;
  double wavelength = 780e-9;

  /// Throws UnstableCavity unless 0 < length < radius_of_curvature.
  void validate() const;
};

/// A cavity together with every quantity derived from it.
struct CavityOptics {
  CavityGeometry geometry;
  FibreSpec fibre;
  MirrorSpec micro_mirror;

  double cavity_waist = 0.0;                  // w_C, m
  double overlap = 0.0;                       // eta_FC
  double effective_fibre_reflectivity = 0.0;  // r1^a, amplitude
  double finesse = 0.0;
  double half_linewidth = 0.0;  // kappa, rad/s
  double fsr = 0.0;             // Hz
};

CavityOptics make_optics(const CavityGeometry& geometry, const FibreSpec& fibre,
                         const MirrorSpec& micro_mirror);

/// 1/e^2 intensity radius at the planar (fibre) mirror.
double mode_waist(const CavityGeometry& geom);

/// Closed-form overlap of two normalised fundamental Gaussian modes.
double mode_overlap(double cavity_waist, double fibre_waist, double offset);
double mode_overlap(double cavity_waist, double fibre_waist, Vec2 offset);

/// 2-D quadrature of the same overlap integral; used to check mode_overlap.
double overlap_numeric(double cavity_waist, double fibre_waist, Vec2 offset);

/// Overlap of a displaced fundamental fibre mode with the 1-D Hermite-Gauss
/// mode of order n of the cavity (waist w_C) along one transverse axis.
double hermite_gauss_overlap_1d(int n, double cavity_waist, double fibre_waist, double offset);

/// Sum of squared overlaps over all HG_lm with l + m = order.
double mode_group_coupling(int order, double cavity_waist, double fibre_waist, Vec2 offset);

double effective_fibre_reflectivity(const MirrorSpec& fibre_mirror, double overlap);

struct ReflectionTerms {
  double filtered_reflection;  // mode-filtered direct reflection amplitude
  double fibre_amplitude;      // fibre mirror amplitude reflectivity
  double mirror_amplitude;     // micro-mirror amplitude reflectivity
  double fibre_transmission;   // fibre mirror power transmission
  double overlap_squared;
};

ReflectionTerms reflection_terms(const CavityOptics& optics);

/// 1 - |r1a - r2 t1^2 eta^2 / (1 - r1 r2)|^2, clamped to [0, 1].
double visibility(const ReflectionTerms& terms);
double visibility(const CavityOptics& optics);

/// Fundamental-mode reflected power versus round-trip phase.
double reflection_spectrum(const ReflectionTerms& terms, double round_trip_phase);
double reflection_spectrum(const CavityOptics& optics, double round_trip_phase);

/// c / (2L) in Hz.
double free_spectral_range(double length);

struct Linewidth {
  double finesse;
  double half_linewidth;  // kappa, rad/s
};

/// F = pi sqrt(r1 r2) / (1 - r1 r2); kappa = pi * FSR / F.
Linewidth linewidth_and_finesse(double fibre_amplitude, double mirror_amplitude, double length);

/// Length-domain fringe FWHM, lambda / (2F).
double fringe_fwhm_length(double wavelength, double finesse);

/// Transverse mode spacing delta_nu = c (l+m) arctan(sqrt(R/L - 1)) / (2 pi L), in Hz.
double transverse_mode_spacing(const CavityGeometry& geom, int l, int m);

/// Inverse of transverse_mode_spacing for the mirror curvature.
double curvature_from_mode_spacing(double spacing_hz, double length, int order);

/// Vacuum coupling g = sqrt(3 c lambda^2 gamma / (pi^2 w_C^2 L)), rad/s.
double cqed_coupling(double cavity_waist, double length, double wavelength, double decay_rate);

/// C = branching * g^2 / (2 kappa gamma).
double cooperativity(double coupling, double half_linewidth, double decay_rate,
                     double branching = 1.0);

}  // namespace fpcav::optics
