#pragma once

// Reference calculations written independently of the library: different
// formulations, brute-force sums and numerical quadrature.

#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <vector>

namespace fpcav::oracle {

inline constexpr double c = 299792458.0;
inline constexpr double eps0 = 8.8541878128e-12;
inline constexpr double pi = std::numbers::pi;

// Hand-entered default cantilever, SI units.
inline double default_area() { return 50e-6 * 50e-6 + 2 * 250e-6 * 10e-6 + 32e-6 * 130e-6; }

// Fixed-guided Euler-Bernoulli beam: k = 12 E I / L^3 with I = w t^3 / 12, two in parallel.
inline double guided_beam_stiffness(double e, double w, double t, double l) {
  const double inertia = w * t * t * t / 12.0;
  return 2.0 * 12.0 * e * inertia / (l * l * l);
}

// Newton iteration on k d (g - d)^2 - eps0 A V^2 / 2 = 0 from d = 0.
inline double deflection_newton(double v, double k, double area, double gap) {
  const double f0 = eps0 * area * v * v / 2.0;
  double d = 0.0;
  for (int i = 0; i < 200; ++i) {
    const double f = k * d * (gap - d) * (gap - d) - f0;
    const double df = k * ((gap - d) * (gap - d) - 2.0 * d * (gap - d));
    const double step = f / df;
    d -= step;
    if (std::abs(step) < 1e-18) break;
  }
  return d;
}

// Gaussian beam of a plano-concave resonator from its Rayleigh range.
inline double rayleigh_range(double length, double radius) {
  return std::sqrt(length * (radius - length));
}

inline double waist_from_rayleigh(double z_r, double wavelength) {
  return std::sqrt(wavelength * z_r / pi);
}

// 2-D composite Simpson quadrature of the normalised fundamental-mode overlap.
inline double overlap_simpson(double w1, double w2, double ox, double oy, int n = 600) {
  const double half = 7.0 * std::max(w1, w2) + std::hypot(ox, oy);
  const double h = 2.0 * half / n;
  auto mode = [](double x, double y, double w) {
    return std::sqrt(2.0 / (pi * w * w)) * std::exp(-(x * x + y * y) / (w * w));
  };
  auto weight = [n](int i) { return (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0); };
  double sum = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double x = -half + i * h;
    for (int j = 0; j <= n; ++j) {
      const double y = -half + j * h;
      sum += weight(i) * weight(j) * mode(x, y, w1) * mode(x - ox, y - oy, w2);
    }
  }
  return sum * h * h / 9.0;
}

// Normalised 1-D Hermite-Gauss function of order n, intensity waist w.
inline double hermite_gauss(int n, double x, double w) {
  const double u = std::sqrt(2.0) * x / w;
  // Orthonormal Hermite functions by their three-term recurrence.
  double h0 = std::pow(pi, -0.25) * std::exp(-u * u / 2.0);
  if (n == 0) return h0 * std::pow(2.0 / (w * w), 0.25);
  double h1 = std::sqrt(2.0) * u * h0;
  for (int k = 2; k <= n; ++k) {
    const double h2 = std::sqrt(2.0 / k) * u * h1 - std::sqrt((k - 1.0) / k) * h0;
    h0 = h1;
    h1 = h2;
  }
  return h1 * std::pow(2.0 / (w * w), 0.25);
}

inline double hg_overlap_quadrature(int n, double wc, double wf, double offset, int points = 20000) {
  const double half = 10.0 * std::max(wc, wf) + std::abs(offset);
  const double h = 2.0 * half / points;
  double sum = 0.0;
  for (int i = 0; i <= points; ++i) {
    const double x = -half + i * h;
    const double wgt = (i == 0 || i == points) ? 0.5 : 1.0;
    sum += wgt * hermite_gauss(n, x, wc) * hermite_gauss(0, x - offset, wf);
  }
  return sum * h;
}

// Reflected field as a brute-force sum over round trips.
inline double reflection_by_round_trips(double direct, double fibre_amp, double mirror_amp, double transmission,
                                        double overlap_sq, double phase, int trips = 20000) {
  std::complex<double> field = direct;
  std::complex<double> circ = -transmission * overlap_sq * mirror_amp * std::polar(1.0, phase);
  for (int k = 0; k < trips; ++k) {
    field += circ;
    circ *= fibre_amp * mirror_amp * std::polar(1.0, phase);
  }
  return std::norm(field);
}

// FWHM in phase of the Airy dip 1/(1 + (2F/pi)^2 sin^2(phi/2)), found by bisection.
inline double airy_fwhm_phase(double round_trip) {
  const double coeff = 4.0 * round_trip / ((1.0 - round_trip) * (1.0 - round_trip));
  auto airy = [&](double phi) { return 1.0 / (1.0 + coeff * std::sin(phi / 2.0) * std::sin(phi / 2.0)); };
  double lo = 0.0, hi = pi;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (airy(mid) > 0.5 ? lo : hi) = mid;
  }
  return 2.0 * lo;
}

// Transverse-mode offset per order from the one-way Gouy phase of the
// plano-concave cavity, folded into the half free spectral range above the
// fundamental.
inline double mode_spacing_from_gouy(double length, double radius) {
  const double gouy = std::atan(length / rayleigh_range(length, radius));
  const double fsr = c / (2.0 * length);
  return fsr * (0.5 - gouy / pi);
}

// Central-difference derivative.
inline double derivative(const std::function<double(double)>& f, double x, double h) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

inline double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline double variance(const std::vector<double>& v) {
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size());
}

}  // namespace fpcav::oracle
