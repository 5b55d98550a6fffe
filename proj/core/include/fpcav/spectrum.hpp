#pragma once

#include <vector>

#include "fpcav/optics.hpp"

namespace fpcav::optics {

struct SpectrumOptions {
  bool higher_order_modes = true;
  int max_order = 6;  // highest l+m group rendered
};

/// Reflected power of a fibre-coupled cavity including the weak dips of
/// higher-order transverse mode groups.
///
/// The fundamental follows the mode-filtered Airy form of reflection_spectrum.
/// Each group l+m = N >= 1 adds an Airy-shaped dip of the same width, shifted
/// by N times the transverse mode spacing, whose depth is the fundamental dip
/// depth scaled by K_N / eta^2 (K_N: summed squared HG overlaps of the
/// displaced fibre mode with the group).
class CavitySpectrum {
 public:
  explicit CavitySpectrum(const CavityOptics& optics, SpectrumOptions options = {});

  /// Reflected power for cavity length (m) and optical frequency (Hz).
  [[nodiscard]] double reflection(double length, double frequency) const;

  /// Laser held at the geometry wavelength.
  [[nodiscard]] double at_length(double length) const;

  /// Cavity held at the geometry length.
  [[nodiscard]] double at_frequency(double frequency) const;

  [[nodiscard]] const CavityOptics& optics() const { return optics_; }
  [[nodiscard]] double laser_frequency() const;

  /// Depth of the dip of transverse group `order` (0 = fundamental).
  [[nodiscard]] double group_depth(int order) const;

 private:
  CavityOptics optics_;
  ReflectionTerms terms_;
  double round_trip_;
  std::vector<double> depths_;  // index N >= 1
};

}  // namespace fpcav::optics
