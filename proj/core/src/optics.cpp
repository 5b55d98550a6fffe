#include "fpcav/optics.hpp"

#include <algorithm>
#include <complex>
#include <string>
#include <vector>

#include "fpcav/constants.hpp"
#include "fpcav/errors.hpp"

namespace fpcav::optics {
namespace {

using constants::pi;
using constants::speed_of_light;

void require_positive(double value, const char* name) {
  if (!(value > 0.0) || !std::isfinite(value)) {
    throw InvalidArgument(std::string(name) + " must be strictly positive");
  }
}

}  // namespace

void MirrorSpec::validate() const {
  if (!(power_reflectivity > 0.0 && power_reflectivity < 1.0)) {
    throw InvalidArgument("power_reflectivity must lie in (0, 1)");
  }
  if (!(power_transmission >= 0.0 && power_transmission < 1.0)) {
    throw InvalidArgument("power_transmission must lie in [0, 1)");
  }
  if (!(power_loss >= 0.0 && power_loss < 1.0)) {
    throw InvalidArgument("power_loss must lie in [0, 1)");
  }
  if (std::abs(power_reflectivity + power_transmission + power_loss - 1.0) > 1e-12) {
    throw InvalidArgument("mirror reflectivity, transmission and loss must sum to 1");
  }
}

MirrorSpec metal_mirror(double power_reflectivity) {
  MirrorSpec m{power_reflectivity, 0.0, 1.0 - power_reflectivity};
  m.validate();
  return m;
}

void FibreSpec::validate() const {
  require_positive(mode_waist, "mode_waist");
  mirror.validate();
}

void CavityGeometry::validate() const {
  require_positive(wavelength, "wavelength");
  if (!(length > 0.0) || !(length < radius_of_curvature)) {
    throw UnstableCavity("cavity requires 0 < length < radius_of_curvature (L = " +
                         std::to_string(length) + ", R = " +
                         std::to_string(radius_of_curvature) + ")");
  }
}

double mode_waist(const CavityGeometry& geom) {
  geom.validate();
  const double l = geom.length;
  const double r = geom.radius_of_curvature;
  return std::sqrt(geom.wavelength / pi * std::sqrt(l * r - l * l));
}

double mode_overlap(double cavity_waist, double fibre_waist, double offset) {
  require_positive(cavity_waist, "cavity_waist");
  require_positive(fibre_waist, "fibre_waist");
  const double s = cavity_waist * cavity_waist + fibre_waist * fibre_waist;
  return 2.0 * cavity_waist * fibre_waist / s * std::exp(-offset * offset / s);
}

double mode_overlap(double cavity_waist, double fibre_waist, Vec2 offset) {
  return mode_overlap(cavity_waist, fibre_waist, offset.norm());
}

double overlap_numeric(double cavity_waist, double fibre_waist, Vec2 offset) {
  require_positive(cavity_waist, "cavity_waist");
  require_positive(fibre_waist, "fibre_waist");
  const double w_max = std::max(cavity_waist, fibre_waist);
  const double h = std::min(cavity_waist, fibre_waist) / 10.0;

  // Trapezoid rule on a uniform grid; for these rapidly decaying integrands
  // the truncation window dominates the error (exp(-72) at 6 waists).
  auto axis = [&](double shift) {
    const double lo = std::min(0.0, shift) - 6.0 * w_max;
    const double hi = std::max(0.0, shift) + 6.0 * w_max;
    const auto n = static_cast<std::size_t>(std::ceil((hi - lo) / h)) + 1;
    std::vector<double> xs(n);
    const double step = (hi - lo) / static_cast<double>(n - 1);
    for (std::size_t i = 0; i < n; ++i) xs[i] = lo + step * static_cast<double>(i);
    return std::pair{xs, step};
  };
  const auto [xs, hx] = axis(offset.x);
  const auto [ys, hy] = axis(offset.y);

  const double norm_c = std::sqrt(2.0 / pi) / cavity_waist;
  const double norm_f = std::sqrt(2.0 / pi) / fibre_waist;
  const double inv_wc2 = 1.0 / (cavity_waist * cavity_waist);
  const double inv_wf2 = 1.0 / (fibre_waist * fibre_waist);

  double sum = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double wx = (i == 0 || i + 1 == xs.size()) ? 0.5 : 1.0;
    const double x = xs[i];
    const double dx = x - offset.x;
    const double ex = x * x * inv_wc2 + dx * dx * inv_wf2;
    double row = 0.0;
    for (std::size_t j = 0; j < ys.size(); ++j) {
      const double wy = (j == 0 || j + 1 == ys.size()) ? 0.5 : 1.0;
      const double y = ys[j];
      const double dy = y - offset.y;
      row += wy * std::exp(-(ex + y * y * inv_wc2 + dy * dy * inv_wf2));
    }
    sum += wx * row;
  }
  return norm_c * norm_f * sum * hx * hy;
}

double hermite_gauss_overlap_1d(int n, double cavity_waist, double fibre_waist, double offset) {
  if (n < 0) throw InvalidArgument("mode index must be non-negative");
  require_positive(cavity_waist, "cavity_waist");
  require_positive(fibre_waist, "fibre_waist");
  const double wc2 = cavity_waist * cavity_waist;
  const double wf2 = fibre_waist * fibre_waist;
  // Generating function of H_n turns the overlap into exp(alpha t^2 + beta t);
  // its Taylor coefficients obey a three-term recurrence. b_k carries the
  // 1/sqrt(2^k k!) normalisation of the HG mode.
  const double a = 1.0 / wc2 + 1.0 / wf2;
  const double alpha = 2.0 / (wc2 * a) - 1.0;
  const double beta = 2.0 * std::sqrt(2.0) * offset / (cavity_waist * wf2 * a);
  const double gaussian = std::exp(-offset * offset / (wc2 + wf2));

  double b_prev = 0.0;
  double b = 1.0;
  for (int k = 0; k < n; ++k) {
    const double kk = static_cast<double>(k);
    const double next = beta * b / std::sqrt(2.0 * (kk + 1.0)) +
                        alpha * std::sqrt(kk / (kk + 1.0)) * b_prev;
    b_prev = b;
    b = next;
  }
  const double c0 = std::sqrt(2.0 * cavity_waist * fibre_waist / (wc2 + wf2));
  return c0 * gaussian * b;
}

double mode_group_coupling(int order, double cavity_waist, double fibre_waist, Vec2 offset) {
  if (order < 0) throw InvalidArgument("mode order must be non-negative");
  double sum = 0.0;
  for (int l = 0; l <= order; ++l) {
    const double cx = hermite_gauss_overlap_1d(l, cavity_waist, fibre_waist, offset.x);
    const double cy = hermite_gauss_overlap_1d(order - l, cavity_waist, fibre_waist, offset.y);
    sum += cx * cx * cy * cy;
  }
  return sum;
}

double effective_fibre_reflectivity(const MirrorSpec& fibre_mirror, double overlap) {
  fibre_mirror.validate();
  if (!(overlap >= 0.0 && overlap <= 1.0)) {
    throw InvalidArgument("overlap must lie in [0, 1]");
  }
  return std::sqrt(fibre_mirror.power_reflectivity +
                   fibre_mirror.power_transmission * (1.0 - overlap * overlap));
}

CavityOptics make_optics(const CavityGeometry& geometry, const FibreSpec& fibre,
                         const MirrorSpec& micro_mirror) {
  geometry.validate();
  fibre.validate();
  micro_mirror.validate();
  CavityOptics o;
  o.geometry = geometry;
  o.fibre = fibre;
  o.micro_mirror = micro_mirror;
  o.cavity_waist = mode_waist(geometry);
  o.overlap = mode_overlap(o.cavity_waist, fibre.mode_waist, fibre.core_offset);
  o.effective_fibre_reflectivity = effective_fibre_reflectivity(fibre.mirror, o.overlap);
  const Linewidth lw = linewidth_and_finesse(fibre.mirror.r(), micro_mirror.r(), geometry.length);
  o.finesse = lw.finesse;
  o.half_linewidth = lw.half_linewidth;
  o.fsr = free_spectral_range(geometry.length);
  return o;
}

ReflectionTerms reflection_terms(const CavityOptics& optics) {
  return {optics.effective_fibre_reflectivity, optics.fibre.mirror.r(), optics.micro_mirror.r(),
          optics.fibre.mirror.power_transmission, optics.overlap * optics.overlap};
}

double reflection_spectrum(const ReflectionTerms& t, double round_trip_phase) {
  using cd = std::complex<double>;
  const cd e = std::polar(1.0, round_trip_phase);
  const cd amp = t.filtered_reflection - t.mirror_amplitude * t.fibre_transmission * t.overlap_squared * e / (1.0 - t.fibre_amplitude * t.mirror_amplitude * e);
  return std::clamp(std::norm(amp), 0.0, 1.0);
}

double reflection_spectrum(const CavityOptics& optics, double round_trip_phase) {
  return reflection_spectrum(reflection_terms(optics), round_trip_phase);
}

double visibility(const ReflectionTerms& terms) {
  return std::clamp(1.0 - reflection_spectrum(terms, 0.0), 0.0, 1.0);
}

double visibility(const CavityOptics& optics) { return visibility(reflection_terms(optics)); }

double free_spectral_range(double length) {
  require_positive(length, "length");
  return speed_of_light / (2.0 * length);
}

Linewidth linewidth_and_finesse(double fibre_amplitude, double mirror_amplitude, double length) {
  const double round_trip = fibre_amplitude * mirror_amplitude;
  if (!(round_trip > 0.0 && round_trip < 1.0)) {
    throw InvalidArgument("round-trip amplitude r1*r2 must lie in (0, 1)");
  }
  const double finesse = pi * std::sqrt(round_trip) / (1.0 - round_trip);
  const double fwhm_hz = free_spectral_range(length) / finesse;
  return {finesse, pi * fwhm_hz};
}

double fringe_fwhm_length(double wavelength, double finesse) {
  require_positive(finesse, "finesse");
  return wavelength / (2.0 * finesse);
}

double transverse_mode_spacing(const CavityGeometry& geom, int l, int m) {
  geom.validate();
  if (l < 0 || m < 0) throw InvalidArgument("mode indices must be non-negative");
  const double len = geom.length;
  const double angle = std::atan(std::sqrt(geom.radius_of_curvature / len - 1.0));
  return speed_of_light * static_cast<double>(l + m) * angle / (constants::two_pi * len);
}

double curvature_from_mode_spacing(double spacing_hz, double length, int order) {
  require_positive(length, "length");
  if (order < 1) throw OutOfRange("mode order must be at least 1");
  const double angle =
      constants::two_pi * spacing_hz * length / (speed_of_light * static_cast<double>(order));
  if (!(angle > 0.0 && angle < pi / 2.0)) {
    throw OutOfRange("mode spacing " + std::to_string(spacing_hz) +
                     " Hz is outside the range of a stable plano-concave cavity");
  }
  const double t = std::tan(angle);
  return length * (1.0 + t * t);
}

double cqed_coupling(double cavity_waist, double length, double wavelength, double decay_rate) {
  require_positive(cavity_waist, "cavity_waist");
  require_positive(length, "length");
  require_positive(wavelength, "wavelength");
  require_positive(decay_rate, "decay_rate");
  return std::sqrt(3.0 * speed_of_light * wavelength * wavelength * decay_rate /
                   (pi * pi * cavity_waist * cavity_waist * length));
}

double cooperativity(double coupling, double half_linewidth, double decay_rate, double branching) {
  require_positive(coupling, "coupling");
  require_positive(half_linewidth, "half_linewidth");
  require_positive(decay_rate, "decay_rate");
  if (!(branching > 0.0 && branching <= 1.0)) {
    throw InvalidArgument("branching ratio must lie in (0, 1]");
  }
  return branching * coupling * coupling / (2.0 * half_linewidth * decay_rate);
}

}  // namespace fpcav::optics
