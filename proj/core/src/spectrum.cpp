#include "fpcav/spectrum.hpp"

#include <algorithm>
#include <cmath>

#include "fpcav/constants.hpp"
#include "fpcav/errors.hpp"

namespace fpcav::optics {

CavitySpectrum::CavitySpectrum(const CavityOptics& optics, SpectrumOptions options)
    : optics_(optics), terms_(reflection_terms(optics)), round_trip_(terms_.fibre_amplitude * terms_.mirror_amplitude) {
  if (options.max_order < 0) throw InvalidArgument("max_order must be non-negative");
  const double fundamental_depth = 1.0 - reflection_spectrum(terms_, 0.0);
  depths_.assign(1, fundamental_depth);
  if (!options.higher_order_modes) return;
  const double fundamental_coupling = terms_.overlap_squared;
  for (int n = 1; n <= options.max_order; ++n) {
    const double group_coupling = mode_group_coupling(n, optics.cavity_waist, optics.fibre.mode_waist,
                                          optics.fibre.core_offset);
    depths_.push_back(fundamental_coupling > 0.0 ? fundamental_depth * group_coupling / fundamental_coupling : 0.0);
  }
}

double CavitySpectrum::laser_frequency() const {
  return constants::speed_of_light / optics_.geometry.wavelength;
}

double CavitySpectrum::group_depth(int order) const {
  if (order < 0 || static_cast<std::size_t>(order) >= depths_.size()) return 0.0;
  return depths_[static_cast<std::size_t>(order)];
}

double CavitySpectrum::reflection(double length, double frequency) const {
  const double phase = 2.0 * constants::two_pi * length * frequency / constants::speed_of_light;
  double p = reflection_spectrum(terms_, phase);
  if (depths_.size() > 1) {
    const double r = optics_.geometry.radius_of_curvature;
    if (!(length > 0.0 && length < r)) {
      throw UnstableCavity("cavity length outside (0, R) during spectrum evaluation");
    }
    const double gouy = std::atan(std::sqrt(r / length - 1.0));
    const double norm = (1.0 - round_trip_) * (1.0 - round_trip_);
    for (std::size_t n = 1; n < depths_.size(); ++n) {
      const double shifted = phase - 2.0 * static_cast<double>(n) * gouy;
      const double airy = norm / (1.0 + round_trip_ * round_trip_ - 2.0 * round_trip_ * std::cos(shifted));
      p -= depths_[n] * airy;
    }
  }
  return std::clamp(p, 0.0, 1.0);
}

double CavitySpectrum::at_length(double length) const {
  return reflection(length, laser_frequency());
}

double CavitySpectrum::at_frequency(double frequency) const {
  return reflection(optics_.geometry.length, frequency);
}

}  // namespace fpcav::optics
