#include <cmath>

#include "doctest.h"
#include "fpcav/errors.hpp"
#include "fpcav/lockloop.hpp"
#include "generators.hpp"
#include "oracles.hpp"

using namespace fpcav;
using namespace fpcav::lockloop;

namespace {

const PlantModel& plant() {
  static const PlantModel p{};
  return p;
}

const PidConfig& tuned() {
  static const PidConfig pid = tune_pid(plant(), 100e3);
  return pid;
}

NoiseSpec setpoint_only(double position_rms, std::uint64_t seed) {
  NoiseSpec n = NoiseSpec::none();
  n.setpoint_noise_rms = setpoint_noise_for_position(plant(), position_rms);
  n.seed = seed;
  return n;
}

}  // namespace

TEST_CASE("discriminator operating point is the steepest point") {
  const auto& p = plant();
  auto f = [&](double e) { return discriminator(e, p); };
  const double slope = oracle::derivative(f, 0.0, 1e-13);
  CHECK(discriminator_slope(p) == doctest::Approx(slope).epsilon(0.005));
  for (double e : {-0.3e-9, -0.1e-9, 0.1e-9, 0.4e-9}) {
    CHECK(std::abs(oracle::derivative(f, e, 1e-13)) < slope);
  }
  CHECK(operating_offset(p) == doctest::Approx(3.7e-9 / (2.0 * std::sqrt(3.0))));
  CHECK_THROWS_AS(discriminator(6.0 * p.fringe_fwhm_length, p), OutOfRange);
}

TEST_CASE("detector scale reproduces the 20 mV to 15 pm anchor") {
  const auto& p = plant();
  CHECK(0.020 / detector_slope(p) == doctest::Approx(15e-12).epsilon(1e-12));
  CHECK(calibrate_detector_scale(p) == doctest::Approx(p.detector_full_scale).epsilon(1e-12));
  PlantModel other = p;
  other.fringe_fwhm_length = 3.3e-9;
  other.detector_full_scale = calibrate_detector_scale(other);
  CHECK(0.020 / detector_slope(other) == doctest::Approx(15e-12).epsilon(1e-12));
}

TEST_CASE("parameter validation") {
  PlantModel p;
  p.quality_factor = 0.0;
  CHECK_THROWS_AS(p.validate(), InvalidArgument);
  PidConfig pid;
  pid.sample_rate = 500e3;
  CHECK_THROWS_AS(pid.validate(), InvalidArgument);
  NoiseSpec n;
  n.power_fluctuation_rel = -0.1;
  CHECK_THROWS_AS(n.validate(), InvalidArgument);
}

TEST_CASE("tuning rule") {
  const auto& pid = tuned();
  CHECK(pid.kd == 0.0);
  CHECK(pid.ki > 0.0);
  const auto rep = step_check(plant(), pid);
  CHECK(rep.stable);
  CHECK(rep.overshoot < 0.5);
  CHECK(rep.settling_time < 100e-6);
  CHECK(phase_margin(plant(), pid) > 45.0);

  const auto half = tune_pid(plant(), 50e3);
  CHECK(half.ki == doctest::Approx(0.5 * pid.ki).epsilon(1e-12));
  CHECK_THROWS_AS(tune_pid(plant(), 120e3), Infeasible);
}

TEST_CASE("untuned gains are rejected as unstable") {
  PidConfig wild = tuned();
  wild.notch_frequency = 0.0;
  wild.ki *= 3.0;
  CHECK_FALSE(step_check(plant(), wild).stable);
  CHECK_THROWS_AS(simulate_noise_run(plant(), wild, NoiseSpec::none(), 1e-3), UnstableLoop);
}

TEST_CASE("noiseless loop regulates in-window initial errors") {
  testing::Gen gen(41);
  const double x_op = operating_offset(plant());
  for (int i = 0; i < 20; ++i) {
    RunOptions opt;
    opt.initial_length_error = gen.uniform(-0.9 * x_op, 3.0 * plant().fringe_fwhm_length);
    const auto tr = simulate_noise_run(plant(), tuned(), NoiseSpec::none(), 3e-3, opt);
    CHECK(std::abs(tr.length_error.back()) < 1e-15);
  }
  const auto flat = simulate_noise_run(plant(), tuned(), NoiseSpec::none(), 2e-3);
  for (double d : flat.detector) CHECK(d == doctest::Approx(operating_setpoint(plant())).epsilon(1e-15));
}

TEST_CASE("step response plateaus") {
  const StepSchedule sched{0.020, 4, 5e-3};
  const auto tr = simulate_step_response(plant(), tuned(), NoiseSpec::none(), sched);
  CHECK(tr.size() == 25000);
  const auto st = plateau_statistics(tr, sched);
  REQUIRE(st.means.size() == 5);
  // Exact linear response would give 15 pm; the Lorentzian curvature shifts it slightly.
  CHECK(st.mean_spacing == doctest::Approx(15e-12).epsilon(0.05));

  double spacing[3];
  int k = 0;
  for (double mv : {0.010, 0.020, 0.040}) {
    const StepSchedule s{mv, 2, 5e-3};
    spacing[k++] = plateau_statistics(simulate_step_response(plant(), tuned(), NoiseSpec::none(), s), s)
                       .mean_spacing;
  }
  CHECK(spacing[0] / 0.010 == doctest::Approx(spacing[1] / 0.020).epsilon(0.02));
  CHECK(spacing[2] / 0.040 == doctest::Approx(spacing[1] / 0.020).epsilon(0.02));
}

TEST_CASE("position noise scales with setpoint noise") {
  const double a = position_rms(simulate_noise_run(plant(), tuned(), setpoint_only(1e-12, 5), 0.2));
  const double b = position_rms(simulate_noise_run(plant(), tuned(), setpoint_only(2e-12, 5), 0.2));
  CHECK(b / a == doctest::Approx(2.0).epsilon(0.1));
  CHECK(a == doctest::Approx(1e-12).epsilon(0.3));
}

TEST_CASE("open-loop thermal motion has the equipartition variance") {
  PidConfig off = tuned();
  off.kp = off.ki = 0.0;
  NoiseSpec n = NoiseSpec::none();
  n.temperature = 295.0;
  n.seed = 9;
  RunOptions opt;
  opt.check_stability = false;
  const auto tr = simulate_noise_run(plant(), off, n, 0.5, opt);
  const double expected = 1.380649e-23 * 295.0 / plant().spring_constant;
  CHECK(oracle::variance(tr.length_error) == doctest::Approx(expected).epsilon(0.05));
}

TEST_CASE("thermal drift is absorbed by the control signal") {
  NoiseSpec n = NoiseSpec::none();
  n.thermal_drift = 1e-9;  // m / sqrt(s)
  n.seed = 4;
  const auto tr = simulate_noise_run(plant(), tuned(), n, 0.5);
  const double err = position_rms(tr);
  std::vector<double> moved(tr.control);
  for (double& u : moved) u *= plant().dc_gain;
  CHECK(std::sqrt(oracle::variance(moved)) > 100.0 * err);
  // A random walk of diffusion D behind an integrator crossing over at w_c
  // leaves a residual of about sqrt(D / (2 w_c)).
  const double residual = std::sqrt(1e-18 / (2.0 * 2.0 * oracle::pi * 100e3));
  CHECK(err < 2.0 * residual);
  CHECK(err > 0.5 * residual);
}

TEST_CASE("loop leaves the discriminator window") {
  NoiseSpec n = NoiseSpec::none();
  n.thermal_drift = 1e-3;
  RunOptions opt;
  opt.initial_length_error = 0.0;
  CHECK_THROWS_AS(simulate_noise_run(plant(), tuned(), n, 0.05, opt), LockLost);
}

TEST_CASE("runs are reproducible for a fixed seed") {
  NoiseSpec n;
  n.setpoint_noise_rms = 1e-3;
  n.seed = 77;
  const auto a = simulate_noise_run(plant(), tuned(), n, 0.01);
  const auto b = simulate_noise_run(plant(), tuned(), n, 0.01);
  CHECK(a.length_error == b.length_error);
  CHECK(a.detector == b.detector);
  n.seed = 78;
  const auto c = simulate_noise_run(plant(), tuned(), n, 0.01);
  CHECK(a.detector != c.detector);
}
