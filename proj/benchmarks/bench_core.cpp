#include <benchmark/benchmark.h>

#include <cmath>
#include <random>
#include <vector>

#include "fpcav/arraysim.hpp"
#include "fpcav/config.hpp"
#include "fpcav/electromech.hpp"
#include "fpcav/fitkit.hpp"
#include "fpcav/lockloop.hpp"
#include "fpcav/optics.hpp"
#include "fpcav/psd.hpp"
#include "fpcav/spectrum.hpp"

using namespace fpcav;

static void BM_StaticDeflection(benchmark::State& state) {
  const auto act = electromech::make_actuator({}, {});
  const double v_max = 0.99 * electromech::pull_in(act).voltage;
  double v = 0.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(electromech::static_deflection(v, act));
    v = v > v_max ? 0.0 : v + 0.37;
  }
}
BENCHMARK(BM_StaticDeflection);

static void BM_SpectrumWithHigherOrders(benchmark::State& state) {
  optics::FibreSpec f;
  f.core_offset = {1e-6, 0.0};
  const auto o = optics::make_optics({}, f, optics::metal_mirror(0.98));
  const optics::CavitySpectrum s(o);
  double l = 42.5e-6;
  for (auto _ : state) {
    benchmark::DoNotOptimize(s.at_length(l));
    l = l > 43.3e-6 ? 42.5e-6 : l + 1e-11;
  }
}
BENCHMARK(BM_SpectrumWithHigherOrders);

static void BM_DoubleLorentzianFit(benchmark::State& state) {
  const fitkit::LorentzianModel truth{1.0, {{-3.0, 1.0, 0.5}, {4.0, 1.5, 0.3}}};
  std::vector<double> xs(static_cast<std::size_t>(state.range(0)));
  for (std::size_t i = 0; i < xs.size(); ++i) xs[i] = -15.0 + 30.0 * i / (xs.size() - 1);
  std::mt19937_64 rng(3);
  const auto trace = fitkit::synthesize(truth, xs, 0.005, rng);
  for (auto _ : state) benchmark::DoNotOptimize(fitkit::fit_lorentzians(trace, 2));
}
BENCHMARK(BM_DoubleLorentzianFit)->Arg(600)->Arg(4000);

static void BM_TuneRow(benchmark::State& state) {
  const auto p = config::load_preset(config::kVisibilityMatched);
  const auto lay = config::layout(p);
  const auto row = arraysim::row_sites(
      arraysim::sample_array(lay, config::site_design(p), p.array.jitter_rms, 1.0, 1), 0);
  const auto a = arraysim::tilt_align(row, p.cavity.length, lay.pitch);
  const double laser = 299792458.0 / p.cavity.wavelength;
  for (auto _ : state) benchmark::DoNotOptimize(arraysim::tune_all(row, a, lay.pitch, laser));
}
BENCHMARK(BM_TuneRow)->Unit(benchmark::kMillisecond);

static void BM_LockNoiseRun(benchmark::State& state) {
  const auto p = config::load_preset(config::kVisibilityMatched);
  const auto plant = config::plant_model(p);
  const auto pid = lockloop::tune_pid(plant, p.lock.loop_bandwidth, p.lock.sample_rate);
  const auto noise = config::noise_spec(p, 1);
  for (auto _ : state) benchmark::DoNotOptimize(lockloop::simulate_noise_run(plant, pid, noise, 0.1));
}
BENCHMARK(BM_LockNoiseRun)->Unit(benchmark::kMillisecond);

static void BM_PowerSpectrum(benchmark::State& state) {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> n;
  std::vector<double> x(1u << 20);
  for (auto& v : x) v = n(rng);
  for (auto _ : state) benchmark::DoNotOptimize(lockloop::power_spectrum(x, 1e6, 5e3));
}
BENCHMARK(BM_PowerSpectrum)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
