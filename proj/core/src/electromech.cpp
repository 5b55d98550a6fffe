#include "fpcav/electromech.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "fpcav/errors.hpp"

namespace fpcav::electromech {
namespace {

void require_positive(double value, const char* name) {
  if (!(value > 0.0) || !std::isfinite(value)) {
    throw InvalidArgument(std::string(name) + " must be strictly positive");
  }
}

}  // namespace

void CantileverGeometry::validate() const {
  require_positive(pad_side, "pad_side");
  require_positive(pad_thickness, "pad_thickness");
  require_positive(arm_length, "arm_length");
  require_positive(arm_width, "arm_width");
  require_positive(arm_thickness, "arm_thickness");
  require_positive(underetch_length, "underetch_length");
  require_positive(underetch_width, "underetch_width");
  require_positive(oxide_gap, "oxide_gap");
  if (oxide_gap >= arm_thickness) {
    throw InvalidArgument("oxide_gap must be smaller than arm_thickness");
  }
}

void MaterialProps::validate() const {
  require_positive(youngs_modulus, "youngs_modulus");
  require_positive(density, "density");
}

void ActuatorModel::validate() const {
  require_positive(spring_constant, "spring_constant");
  require_positive(effective_mass, "effective_mass");
  require_positive(electrode_area, "electrode_area");
  require_positive(gap, "gap");
  require_positive(vacuum_permittivity, "vacuum_permittivity");
}

double electrode_area(const CantileverGeometry& geom) {
  geom.validate();
  return geom.pad_side * geom.pad_side + 2.0 * geom.arm_length * geom.arm_width +
         geom.underetch_length * geom.underetch_width;
}

double spring_constant(const CantileverGeometry& geom, const MaterialProps& mat) {
  geom.validate();
  mat.validate();
  const double t = geom.arm_thickness;
  const double l = geom.arm_length;
  return 2.0 * mat.youngs_modulus * geom.arm_width * t * t * t / (l * l * l);
}

double effective_mass(const CantileverGeometry& geom, const MaterialProps& mat,
                      double arm_mass_coefficient) {
  geom.validate();
  mat.validate();
  if (arm_mass_coefficient < 0.0) {
    throw InvalidArgument("arm_mass_coefficient must be non-negative");
  }
  const double pad = mat.density * geom.pad_side * geom.pad_side * geom.pad_thickness;
  const double arms =
      2.0 * mat.density * geom.arm_length * geom.arm_width * geom.arm_thickness;
  return pad + arm_mass_coefficient * arms;
}

ActuatorModel make_actuator(const CantileverGeometry& geom, const MaterialProps& mat,
                            double arm_mass_coefficient) {
  ActuatorModel model;
  model.spring_constant = spring_constant(geom, mat);
  model.effective_mass = effective_mass(geom, mat, arm_mass_coefficient);
  model.electrode_area = electrode_area(geom);
  model.gap = geom.oxide_gap;
  return model;
}

double electrostatic_force(double voltage, double gap, double area) {
  require_positive(gap, "gap");
  return constants::vacuum_permittivity * area * voltage * voltage / (2.0 * gap * gap);
}

PullIn pull_in(const ActuatorModel& model) {
  model.validate();
  const double g = model.gap;
  const double v = std::sqrt(8.0 * model.spring_constant * g * g * g /
                             (27.0 * model.vacuum_permittivity * model.electrode_area));
  return {v, g / 3.0};
}

double static_deflection(double voltage, const ActuatorModel& model) {
  const PullIn pi = pull_in(model);
  const double v = std::abs(voltage);
  if (v >= pi.voltage) {
    throw PullInExceeded("bias " + std::to_string(voltage) +
                         " V is at or beyond the pull-in voltage " +
                         std::to_string(pi.voltage) + " V");
  }
  if (v == 0.0) return 0.0;

  const double k = model.spring_constant;
  const double half_eps_a_v2 = 0.5 * model.vacuum_permittivity * model.electrode_area * v * v;
  const double g = model.gap;
  // Net restoring force; negative below the stable root, positive above it on [0, g/3].
  auto balance = [&](double d) { return k * d - half_eps_a_v2 / ((g - d) * (g - d)); };

  double lo = 0.0;
  double hi = pi.deflection;
  // Bisect to the resolution of double precision; the interval is far below
  // the 1e-15 m contract long before this terminates.
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (balance(mid) < 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return std::abs(balance(lo)) <= std::abs(balance(hi)) ? lo : hi;
}

double voltage_for_deflection(double deflection, const ActuatorModel& model) {
  const PullIn pi = pull_in(model);
  if (deflection < 0.0 || deflection >= pi.deflection) {
    throw PullInExceeded("deflection outside the stable branch [0, gap/3)");
  }
  const double g = model.gap;
  return std::sqrt(2.0 * model.spring_constant * deflection * (g - deflection) *
                   (g - deflection) / (model.vacuum_permittivity * model.electrode_area));
}

double actuation_gradient(double voltage, const ActuatorModel& model) {
  const double v = std::abs(voltage);
  const double d = static_deflection(v, model);
  if (v == 0.0) return std::numeric_limits<double>::infinity();
  // Implicit differentiation of F(d, V) = k d - eps0 A V^2 / (2 (g - d)^2) = 0.
  const double eps_a = model.vacuum_permittivity * model.electrode_area;
  const double s = model.gap - d;
  const double dfdd = model.spring_constant - eps_a * v * v / (s * s * s);
  const double dfdv = -eps_a * v / (s * s);
  return -dfdd / dfdv;
}

double actuation_gradient_at_deflection(double deflection, const ActuatorModel& model) {
  return actuation_gradient(voltage_for_deflection(deflection, model), model);
}

double resonance_frequency(const ActuatorModel& model) {
  model.validate();
  return std::sqrt(model.spring_constant / model.effective_mass) / constants::two_pi;
}

double resonance_frequency(const CantileverGeometry& geom, const MaterialProps& mat,
                           double arm_mass_coefficient) {
  return resonance_frequency(make_actuator(geom, mat, arm_mass_coefficient));
}

}  // namespace fpcav::electromech
