#include <cmath>

#include "doctest.h"
#include "fpcav/errors.hpp"
#include "fpcav/spectrum.hpp"
#include "oracles.hpp"

using namespace fpcav;
using namespace fpcav::optics;

namespace {

CavityOptics offset_optics(double ox, double oy) {
  FibreSpec f;
  f.core_offset = {ox, oy};
  return make_optics(CavityGeometry{}, f, metal_mirror(kVisibilityMatchedReflectivity));
}

double resonance_near(const CavityOptics& o, double probe_frequency) {
  return std::round(probe_frequency / o.fsr) * o.fsr;
}

}  // namespace

TEST_CASE("fundamental-only spectrum is the Airy lineshape") {
  const auto o = offset_optics(0.3e-6, 0.0);
  const CavitySpectrum s(o, {false, 0});
  const double comb_line = resonance_near(o, s.laser_frequency());
  for (double df : {0.0, 1e9, -5e9, 3e10, 7e11}) {
    const double phase = 4.0 * oracle::pi * o.geometry.length * (comb_line + df) / oracle::c;
    CHECK(s.at_frequency(comb_line + df) == doctest::Approx(reflection_spectrum(o, phase)).epsilon(1e-9));
  }
  CHECK(s.at_frequency(comb_line) == doctest::Approx(1.0 - visibility(o)).epsilon(1e-6));
}

TEST_CASE("higher-order group depths follow the fibre offset") {
  const auto centred = offset_optics(0.0, 0.0);
  const CavitySpectrum s0(centred);
  CHECK(s0.group_depth(1) == doctest::Approx(0.0).scale(1e-20));
  CHECK(s0.group_depth(3) == doctest::Approx(0.0).scale(1e-20));
  CHECK(s0.group_depth(2) > 0.0);

  const auto shifted = offset_optics(1e-6, 0.0);
  const CavitySpectrum s1(shifted);
  CHECK(s1.group_depth(1) > 0.1 * s1.group_depth(0));
  const double k1 = mode_group_coupling(1, shifted.cavity_waist, shifted.fibre.mode_waist,
                                        shifted.fibre.core_offset);
  CHECK(s1.group_depth(1) / s1.group_depth(0) ==
        doctest::Approx(k1 / (shifted.overlap * shifted.overlap)).epsilon(1e-12));
}

TEST_CASE("higher-order dips sit at multiples of the transverse mode spacing") {
  const auto o = offset_optics(1e-6, 0.5e-6);
  const CavitySpectrum s(o);
  const double comb_line = resonance_near(o, s.laser_frequency());
  const double spacing = transverse_mode_spacing(o.geometry, 1, 0);
  for (int n = 1; n <= 2; ++n) {
    double best = 2.0, at = 0.0;
    const double c = comb_line + n * spacing;
    for (int k = -4000; k <= 4000; ++k) {
      const double probe_frequency = c + k * 5e6;
      const double p = s.at_frequency(probe_frequency);
      if (p < best) {
        best = p;
        at = probe_frequency;
      }
    }
    CHECK(std::abs(at - c) < 0.5e9);
  }
}

TEST_CASE("spectrum stays in [0, 1] and rejects unstable lengths") {
  const auto o = offset_optics(1.2e-6, -0.7e-6);
  const CavitySpectrum s(o);
  for (int k = 0; k < 5000; ++k) {
    const double p = s.at_length(42.0e-6 + k * 0.37e-9);
    CHECK(p >= 0.0);
    CHECK(p <= 1.0);
  }
  CHECK_THROWS_AS((void)s.reflection(60e-6, s.laser_frequency()), UnstableCavity);
}
