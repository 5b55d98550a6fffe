#pragma once

// Lumped-parameter model of the electrostatically actuated cantilever
// micro-mirror: a rigid square pad on two fixed-guided arms, pulled towards
// the handle layer across the buried-oxide gap.

#include <utility>

#include "fpcav/constants.hpp"

namespace fpcav::electromech {

/// Cantilever dimensions in metres.
struct CantileverGeometry {
  double pad_side = 50e-6;
  double pad_thickness = 50e-6;
  double arm_length = 250e-6;
  double arm_width = 10e-6;
  double arm_thickness = 22e-6;
  double underetch_length = 32e-6;
  double underetch_width = 130e-6;
  double oxide_gap = 2e-6;

  /// Throws InvalidArgument on a non-positive length or oxide_gap >= arm_thickness.
  void validate() const;
};

/// Single-crystal silicon by default.
struct MaterialProps {
  double youngs_modulus = 169e9;  // Pa
  double density = 2329.0;        // kg/m^3

  void validate() const;
};

struct ActuatorModel {
  double spring_constant = 0.0;  // N/m
  double effective_mass = 0.0;   // kg
  double electrode_area = 0.0;   // m^2
  double gap = 0.0;              // m
  double vacuum_permittivity = constants::vacuum_permittivity;

  void validate() const;
};

struct PullIn {
  double voltage;     // V
  double deflection;  // m
};

/// Standard distributed-mass correction for a fixed-guided arm.
inline constexpr double kDefaultArmMassCoefficient = 0.4;

double electrode_area(const CantileverGeometry& geom);

/// Two fixed-guided beams in parallel, k = 2 E w t^3 / L^3.
double spring_constant(const CantileverGeometry& geom, const MaterialProps& mat);

/// Pad mass plus arm_mass_coefficient times the mass of both arms.
double effective_mass(const CantileverGeometry& geom, const MaterialProps& mat,
                      double arm_mass_coefficient = kDefaultArmMassCoefficient);

ActuatorModel make_actuator(const CantileverGeometry& geom, const MaterialProps& mat,
                            double arm_mass_coefficient = kDefaultArmMassCoefficient);

/// Parallel-plate force at a fixed gap, F = eps0 A V^2 / (2 gap^2).
double electrostatic_force(double voltage, double gap, double area);

PullIn pull_in(const ActuatorModel& model);

/// Stable root of k d = eps0 A V^2 / (2 (gap - d)^2) on [0, gap/3).
/// Throws PullInExceeded for |V| >= pull-in voltage.
double static_deflection(double voltage, const ActuatorModel& model);

/// Inverse of static_deflection on the stable branch (closed form).
double voltage_for_deflection(double deflection, const ActuatorModel& model);

/// dV/d(deflection) in V/m on the stable branch; +inf at V = 0.
double actuation_gradient(double voltage, const ActuatorModel& model);

/// Convenience: actuation gradient evaluated at a given deflection.
double actuation_gradient_at_deflection(double deflection, const ActuatorModel& model);

double resonance_frequency(const ActuatorModel& model);
double resonance_frequency(const CantileverGeometry& geom, const MaterialProps& mat,
                           double arm_mass_coefficient = kDefaultArmMassCoefficient);

/// V/m -> uV/pm.
constexpr double to_microvolt_per_picometre(double volts_per_metre) {
  return volts_per_metre * 1e6 * 1e-12;
}

}  // namespace fpcav::electromech
