#include "fpcav/psd.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>

#include "fpcav/errors.hpp"

namespace fpcav::lockloop {
namespace {

struct PlanDeleter {
  void operator()(fftw_plan_s* p) const { fftw_destroy_plan(p); }
};

using ComplexBuffer = std::unique_ptr<fftw_complex[], decltype(&fftw_free)>;

ComplexBuffer complex_buffer(std::size_t n) {
  return {static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n)), &fftw_free};
}

// Linear (not circular) convolution of y with a centred kernel, same length as y.
std::vector<double> convolve_same(const std::vector<double>& y, const std::vector<double>& kernel) {
  const std::size_t half = kernel.size() / 2;
  std::size_t m = 1;
  while (m < y.size() + kernel.size()) m *= 2;
  const std::size_t m_out = m / 2 + 1;

  std::vector<double> a(m, 0.0);
  std::vector<double> b(m, 0.0);
  std::copy(y.begin(), y.end(), a.begin());
  std::copy(kernel.begin(), kernel.end(), b.begin());
  auto fa = complex_buffer(m_out);
  auto fb = complex_buffer(m_out);
  {
    std::unique_ptr<fftw_plan_s, PlanDeleter> pa(
        fftw_plan_dft_r2c_1d(static_cast<int>(m), a.data(), fa.get(), FFTW_ESTIMATE));
    std::unique_ptr<fftw_plan_s, PlanDeleter> pb(
        fftw_plan_dft_r2c_1d(static_cast<int>(m), b.data(), fb.get(), FFTW_ESTIMATE));
    fftw_execute(pa.get());
    fftw_execute(pb.get());
  }
  for (std::size_t k = 0; k < m_out; ++k) {
    const double re = fa[k][0] * fb[k][0] - fa[k][1] * fb[k][1];
    const double im = fa[k][0] * fb[k][1] + fa[k][1] * fb[k][0];
    fa[k][0] = re / static_cast<double>(m);
    fa[k][1] = im / static_cast<double>(m);
  }
  std::unique_ptr<fftw_plan_s, PlanDeleter> back(
      fftw_plan_dft_c2r_1d(static_cast<int>(m), fa.get(), a.data(), FFTW_ESTIMATE));
  fftw_execute(back.get());
  return {a.begin() + static_cast<std::ptrdiff_t>(half),
          a.begin() + static_cast<std::ptrdiff_t>(half + y.size())};
}

// Gaussian running average, renormalised where the kernel overhangs the ends.
std::vector<double> gaussian_smooth(const std::vector<double>& y, double sigma_bins) {
  if (sigma_bins <= 0.0) return y;
  const auto half = static_cast<std::ptrdiff_t>(std::ceil(4.0 * sigma_bins));
  std::vector<double> kernel(static_cast<std::size_t>(2 * half + 1));
  for (std::ptrdiff_t k = -half; k <= half; ++k) {
    const double z = static_cast<double>(k) / sigma_bins;
    kernel[static_cast<std::size_t>(k + half)] = std::exp(-0.5 * z * z);
  }
  auto out = convolve_same(y, kernel);
  const auto weight = convolve_same(std::vector<double>(y.size(), 1.0), kernel);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::max(out[i] / weight[i], 0.0);
  return out;
}

}  // namespace

PowerSpectrum power_spectrum(std::span<const double> signal, double sample_rate,
                             double smoothing_sigma) {
  if (signal.size() < 1024) throw TooShort("power spectrum needs at least 1024 samples");
  if (!(sample_rate > 0.0)) throw InvalidArgument("sample_rate must be positive");
  if (smoothing_sigma < 0.0) throw InvalidArgument("smoothing_sigma must be non-negative");

  std::size_t n = 1;
  while (n * 2 <= signal.size()) n *= 2;

  const double mean = std::accumulate(signal.begin(), signal.begin() + static_cast<std::ptrdiff_t>(n), 0.0) /
                      static_cast<double>(n);
  std::vector<double> in(n);
  for (std::size_t i = 0; i < n; ++i) in[i] = signal[i] - mean;

  const std::size_t n_out = n / 2 + 1;
  auto out = complex_buffer(n_out);
  std::unique_ptr<fftw_plan_s, PlanDeleter> plan(
      fftw_plan_dft_r2c_1d(static_cast<int>(n), in.data(), out.get(), FFTW_ESTIMATE));
  fftw_execute(plan.get());

  PowerSpectrum s;
  s.bin_width = sample_rate / static_cast<double>(n);
  s.frequency.resize(n_out);
  s.psd.resize(n_out);
  const double norm = 1.0 / (static_cast<double>(n) * sample_rate);
  for (std::size_t k = 0; k < n_out; ++k) {
    const double re = out[k][0];
    const double im = out[k][1];
    const bool edge = k == 0 || k == n_out - 1;
    s.frequency[k] = static_cast<double>(k) * s.bin_width;
    s.psd[k] = (edge ? 1.0 : 2.0) * (re * re + im * im) * norm;
  }
  s.psd = gaussian_smooth(s.psd, smoothing_sigma / s.bin_width);
  return s;
}

double integrated_power(const PowerSpectrum& spectrum) {
  return std::accumulate(spectrum.psd.begin(), spectrum.psd.end(), 0.0) * spectrum.bin_width;
}

double peak_frequency(const PowerSpectrum& spectrum, double lo, double hi) {
  double best = -1.0;
  double at = 0.0;
  for (std::size_t k = 0; k < spectrum.psd.size(); ++k) {
    const double f = spectrum.frequency[k];
    if (f < lo || f > hi) continue;
    if (spectrum.psd[k] > best) {
      best = spectrum.psd[k];
      at = f;
    }
  }
  if (best < 0.0) throw OutOfRange("no spectral bins inside the requested band");
  return at;
}

double psd_at(const PowerSpectrum& spectrum, double frequency) {
  if (spectrum.psd.empty()) throw InvalidArgument("empty spectrum");
  const double idx = std::round(frequency / spectrum.bin_width);
  if (idx < 0.0 || idx >= static_cast<double>(spectrum.psd.size())) {
    throw OutOfRange("frequency outside the spectrum");
  }
  return spectrum.psd[static_cast<std::size_t>(idx)];
}

}  // namespace fpcav::lockloop
