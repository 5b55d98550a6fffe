#pragma once

#include <span>
#include <vector>

namespace fpcav::lockloop {

struct PowerSpectrum {
  std::vector<double> frequency;  // Hz
  std::vector<double> psd;        // units^2 / Hz, one-sided
  double bin_width = 0.0;         // Hz
};

/// One-sided periodogram of the mean-removed signal, truncated to the largest
/// power-of-two length. Optional Gaussian running average over frequency with
/// standard deviation `smoothing_sigma` (Hz). Throws TooShort below 1024 samples.
PowerSpectrum power_spectrum(std::span<const double> signal, double sample_rate,
                             double smoothing_sigma = 0.0);

/// Sum of psd * bin_width.
double integrated_power(const PowerSpectrum& spectrum);

/// Frequency of the largest PSD value within [lo, hi].
double peak_frequency(const PowerSpectrum& spectrum, double lo, double hi);

/// PSD value at the bin nearest `frequency`.
double psd_at(const PowerSpectrum& spectrum, double frequency);

}  // namespace fpcav::lockloop
