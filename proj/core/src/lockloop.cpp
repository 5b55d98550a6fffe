#include "fpcav/lockloop.hpp"

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>
#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <random>
#include <string>

#include "fpcav/constants.hpp"
#include "fpcav/errors.hpp"

namespace fpcav::lockloop {
namespace {

using constants::two_pi;

void require_positive(double value, const char* name) {
  if (!(value > 0.0) || !std::isfinite(value)) {
    throw InvalidArgument(std::string(name) + " must be strictly positive");
  }
}

void require_non_negative(double value, const char* name) {
  if (!(value >= 0.0) || !std::isfinite(value)) {
    throw InvalidArgument(std::string(name) + " must be non-negative");
  }
}

// Zero-order-hold discretisation of x'' + (w0/Q) x' + w0^2 x = w0^2 input.
struct DiscretePlant {
  Eigen::Matrix2d a;
  Eigen::Vector2d b;
};

DiscretePlant discretise(const PlantModel& plant, double dt) {
  const double w0 = two_pi * plant.natural_frequency;
  Eigen::Matrix3d m = Eigen::Matrix3d::Zero();
  m(0, 1) = 1.0;
  m(1, 0) = -w0 * w0;
  m(1, 1) = -w0 / plant.quality_factor;
  m(1, 2) = w0 * w0;
  const Eigen::Matrix3d e = (m * dt).exp();
  return {e.topLeftCorner<2, 2>(), e.topRightCorner<2, 1>()};
}

// Stationary variance of the displacement for unit-variance white input held
// over each sample: P = A P A^T + b b^T.
double unit_input_variance(const DiscretePlant& d) {
  const Eigen::Matrix4d kron = [&] {
    Eigen::Matrix4d k;
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) k.block<2, 2>(2 * i, 2 * j) = d.a(i, j) * d.a;
    return k;
  }();
  const Eigen::Matrix2d q = d.b * d.b.transpose();
  Eigen::Vector4d vq(q(0, 0), q(1, 0), q(0, 1), q(1, 1));
  const Eigen::Vector4d vp = (Eigen::Matrix4d::Identity() - kron).partialPivLu().solve(vq);
  return vp[0];
}

// Biquad notch from the prewarped bilinear transform of
// (s^2 + (w0/Q) s + w0^2) / (s^2 + 2 zeta w0 s + w0^2).
struct Biquad {
  double n0 = 1.0, n1 = 0.0, n2 = 0.0;
  double d1 = 0.0, d2 = 0.0;
  double x1 = 0.0, x2 = 0.0, y1 = 0.0, y2 = 0.0;

  double step(double x) {
    const double y = n0 * x + n1 * x1 + n2 * x2 - d1 * y1 - d2 * y2;
    x2 = x1;
    x1 = x;
    y2 = y1;
    y1 = y;
    return y;
  }

  [[nodiscard]] std::complex<double> response(double omega, double dt) const {
    const std::complex<double> zi = std::polar(1.0, -omega * dt);
    return (n0 + n1 * zi + n2 * zi * zi) / (1.0 + d1 * zi + d2 * zi * zi);
  }
};

Biquad make_notch(const PidConfig& pid) {
  Biquad f;
  if (pid.notch_frequency <= 0.0) return f;
  const double dt = 1.0 / pid.sample_rate;
  const double w0 = two_pi * pid.notch_frequency;
  const double k = w0 / std::tan(w0 * dt / 2.0);
  const double b1 = w0 / pid.notch_quality;
  const double a1 = 2.0 * pid.notch_damping * w0;
  const double w2 = w0 * w0;
  const double den0 = k * k + a1 * k + w2;
  f.n0 = (k * k + b1 * k + w2) / den0;
  f.n1 = (2.0 * w2 - 2.0 * k * k) / den0;
  f.n2 = (k * k - b1 * k + w2) / den0;
  f.d1 = (2.0 * w2 - 2.0 * k * k) / den0;
  f.d2 = (k * k - a1 * k + w2) / den0;
  return f;
}

std::complex<double> plant_response(const DiscretePlant& d, double omega, double dt) {
  const std::complex<double> z = std::polar(1.0, omega * dt);
  const Eigen::Matrix2cd m = z * Eigen::Matrix2cd::Identity() - d.a.cast<std::complex<double>>();
  const Eigen::Vector2cd x = m.partialPivLu().solve(d.b.cast<std::complex<double>>());
  return x[0];
}

std::complex<double> pid_response(const PidConfig& pid, double omega) {
  const double dt = 1.0 / pid.sample_rate;
  const std::complex<double> zi = std::polar(1.0, -omega * dt);
  const std::complex<double> integ = pid.ki * dt / (1.0 - zi);
  const double a = std::exp(-two_pi * pid.loop_bandwidth * dt);
  const std::complex<double> deriv = pid.kd * (1.0 - zi) / dt * (1.0 - a) / (1.0 - a * zi);
  return pid.kp + integ + deriv;
}

std::mt19937_64 seeded_engine(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{seed, stream};
  return std::mt19937_64(seq);
}

class OrnsteinUhlenbeck {
 public:
  OrnsteinUhlenbeck(double rms, double corner, double dt, std::uint64_t seed, std::uint64_t stream)
      : rms_(rms), decay_(std::exp(-two_pi * corner * dt)), rng_(seeded_engine(seed, stream)) {
    value_ = rms_ * normal_(rng_);
  }

  double next() {
    const double out = value_;
    value_ = decay_ * value_ + rms_ * std::sqrt(1.0 - decay_ * decay_) * normal_(rng_);
    return out;
  }

 private:
  double rms_;
  double decay_;
  std::mt19937_64 rng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  double value_ = 0.0;
};

LockTrace run_loop(const PlantModel& plant, const PidConfig& pid, const NoiseSpec& noise,
                   std::size_t n_samples, const std::function<double(double)>& setpoint_of_t,
                   double initial_length_error) {
  const double dt = 1.0 / pid.sample_rate;
  const DiscretePlant d = discretise(plant, dt);
  Biquad notch = make_notch(pid);

  const double thermal_input_rms =
      noise.temperature > 0.0
          ? std::sqrt(constants::boltzmann * noise.temperature / plant.spring_constant /
                      unit_input_variance(d))
          : 0.0;

  OrnsteinUhlenbeck setpoint_noise(noise.setpoint_noise_rms, noise.noise_bandwidth, dt, noise.seed, 1);
  OrnsteinUhlenbeck power_noise(noise.power_fluctuation_rel, noise.noise_bandwidth, dt, noise.seed, 2);
  std::mt19937_64 drift_rng = seeded_engine(noise.seed, 3);
  std::mt19937_64 force_rng = seeded_engine(noise.seed, 4);
  std::normal_distribution<double> normal(0.0, 1.0);

  const double window = 5.0 * plant.fringe_fwhm_length;
  const double drift_step = noise.thermal_drift * std::sqrt(dt);
  const double deriv_decay = std::exp(-two_pi * pid.loop_bandwidth * dt);

  LockTrace tr;
  tr.sample_rate = pid.sample_rate;
  tr.t.resize(n_samples);
  tr.setpoint.resize(n_samples);
  tr.detector.resize(n_samples);
  tr.control.resize(n_samples);
  tr.length_error.resize(n_samples);

  Eigen::Vector2d state = Eigen::Vector2d::Zero();
  double drift = initial_length_error;
  double u = 0.0;
  double v_prev = 0.0;
  double deriv = 0.0;

  for (std::size_t n = 0; n < n_samples; ++n) {
    const double t = static_cast<double>(n) * dt;
    const double length_error = drift - state[0];
    if (!(std::abs(length_error) <= window)) {
      throw LockLost("length error " + std::to_string(length_error) +
                     " m left the discriminator window at t = " + std::to_string(t) + " s");
    }
    const double sp = setpoint_of_t(t) + setpoint_noise.next();
    const double power_factor = 1.0 + power_noise.next();
    const double det = plant.detector_full_scale * power_factor * discriminator(length_error, plant);

    const double v = notch.step(det - sp);
    const double deriv_new = deriv_decay * deriv + (1.0 - deriv_decay) * (v - v_prev) / dt;
    u += pid.kp * (v - v_prev) + pid.ki * dt * v + pid.kd * (deriv_new - deriv);
    deriv = deriv_new;
    v_prev = v;

    tr.t[n] = t;
    tr.setpoint[n] = sp;
    tr.detector[n] = det;
    tr.control[n] = u;
    tr.length_error[n] = length_error;

    const double thermal = thermal_input_rms * normal(force_rng);
    state = d.a * state + d.b * (plant.dc_gain * u + thermal);
    drift += drift_step * normal(drift_rng);
  }
  return tr;
}

double base_setpoint(const PlantModel& plant, const PidConfig& pid) {
  return pid.setpoint != 0.0 ? pid.setpoint : operating_setpoint(plant);
}

std::size_t samples_for(double duration, double rate) {
  return static_cast<std::size_t>(std::llround(duration * rate));
}

}  // namespace

void PlantModel::validate() const {
  require_positive(natural_frequency, "natural_frequency");
  require_positive(quality_factor, "quality_factor");
  require_positive(dc_gain, "dc_gain");
  require_positive(operating_length, "operating_length");
  require_positive(fringe_fwhm_length, "fringe_fwhm_length");
  require_positive(detector_full_scale, "detector_full_scale");
  require_positive(spring_constant, "spring_constant");
  if (!(fringe_depth > 0.0 && fringe_depth <= 1.0)) {
    throw InvalidArgument("fringe_depth must lie in (0, 1]");
  }
}

double calibrate_detector_scale(const PlantModel& plant, double step_volts, double step_length) {
  require_positive(step_volts, "step_volts");
  require_positive(step_length, "step_length");
  return detector_scale_for(step_volts, step_length, plant.fringe_fwhm_length, plant.fringe_depth);
}

void PidConfig::validate() const {
  require_non_negative(kp, "kp");
  require_non_negative(ki, "ki");
  require_non_negative(kd, "kd");
  require_positive(loop_bandwidth, "loop_bandwidth");
  require_positive(sample_rate, "sample_rate");
  if (sample_rate < 10.0 * loop_bandwidth) {
    throw InvalidArgument("sample_rate must be at least 10 x loop_bandwidth");
  }
  require_non_negative(notch_frequency, "notch_frequency");
  if (notch_frequency > 0.0) {
    require_positive(notch_quality, "notch_quality");
    require_positive(notch_damping, "notch_damping");
    if (notch_frequency >= sample_rate / 2.0) {
      throw InvalidArgument("notch_frequency must lie below the Nyquist frequency");
    }
  }
}

void NoiseSpec::validate() const {
  require_non_negative(setpoint_noise_rms, "setpoint_noise_rms");
  require_non_negative(power_fluctuation_rel, "power_fluctuation_rel");
  require_non_negative(thermal_drift, "thermal_drift");
  require_non_negative(temperature, "temperature");
  require_positive(noise_bandwidth, "noise_bandwidth");
}

NoiseSpec NoiseSpec::none() {
  NoiseSpec n;
  n.setpoint_noise_rms = 0.0;
  n.power_fluctuation_rel = 0.0;
  n.thermal_drift = 0.0;
  n.temperature = 0.0;
  return n;
}

double setpoint_noise_for_position(const PlantModel& plant, double position_rms) {
  return position_rms * detector_slope(plant);
}

double operating_offset(const PlantModel& plant) {
  return plant.fringe_fwhm_length / (2.0 * std::numbers::sqrt3);
}

double discriminator(double length_error, const PlantModel& plant) {
  if (!(std::abs(length_error) < 5.0 * plant.fringe_fwhm_length)) {
    throw OutOfRange("length error outside the discriminator validity window");
  }
  const double z = 2.0 * (operating_offset(plant) + length_error) / plant.fringe_fwhm_length;
  return 1.0 - plant.fringe_depth / (1.0 + z * z);
}

double discriminator_slope(const PlantModel& plant) {
  return plant.fringe_depth * kInflectionSlopeFactor / plant.fringe_fwhm_length;
}

double detector_slope(const PlantModel& plant) {
  return plant.detector_full_scale * discriminator_slope(plant);
}

double operating_setpoint(const PlantModel& plant) {
  return plant.detector_full_scale * discriminator(0.0, plant);
}

StabilityReport step_check(const PlantModel& plant, const PidConfig& pid, double duration) {
  plant.validate();
  pid.validate();
  const double base = operating_setpoint(plant);
  // Small enough to stay linear: 1e-3 of a fringe width.
  const double step = detector_slope(plant) * plant.fringe_fwhm_length * 1e-3;
  StabilityReport rep;
  LockTrace tr;
  try {
    tr = run_loop(plant, pid, NoiseSpec::none(), samples_for(duration, pid.sample_rate),
                  [&](double) { return base + step; }, 0.0);
  } catch (const LockLost&) {
    return rep;
  }
  double peak = 0.0;
  double last_outside = 0.0;
  for (std::size_t n = 0; n < tr.size(); ++n) {
    const double y = (tr.detector[n] - base) / step;
    if (!std::isfinite(y)) return rep;
    peak = std::max(peak, y);
    if (std::abs(y - 1.0) > 0.02) last_outside = tr.t[n];
  }
  const double final_dev = std::abs((tr.detector.back() - base) / step - 1.0);
  rep.overshoot = std::max(0.0, peak - 1.0);
  rep.settling_time = last_outside;
  rep.stable = final_dev < 0.02 && last_outside < 0.9 * duration;
  return rep;
}

void require_stable(const PlantModel& plant, const PidConfig& pid) {
  const StabilityReport rep = step_check(plant, pid);
  if (!rep.stable || rep.overshoot >= 0.5) {
    throw UnstableLoop("closed loop fails the small-signal step check (overshoot " +
                       std::to_string(rep.overshoot * 100.0) + " %)");
  }
}

double phase_margin(const PlantModel& plant, const PidConfig& pid) {
  const double dt = 1.0 / pid.sample_rate;
  const DiscretePlant d = discretise(plant, dt);
  const Biquad notch = make_notch(pid);
  const double loop_scale = detector_slope(plant) * plant.dc_gain;

  constexpr int kPoints = 4000;
  const double f_lo = 10.0;
  const double f_hi = 0.4999 * pid.sample_rate;
  double margin = 360.0;
  double prev_phase = 0.0;
  double prev_mag = 0.0;
  double unwrapped = 0.0;
  for (int i = 0; i < kPoints; ++i) {
    const double f = f_lo * std::pow(f_hi / f_lo, static_cast<double>(i) / (kPoints - 1));
    const double w = two_pi * f;
    const std::complex<double> l =
        loop_scale * pid_response(pid, w) * notch.response(w, dt) * plant_response(d, w, dt);
    const double phase = std::arg(l);
    if (i == 0) {
      unwrapped = phase;
    } else {
      double delta = phase - prev_phase;
      while (delta > constants::pi) delta -= two_pi;
      while (delta < -constants::pi) delta += two_pi;
      unwrapped += delta;
    }
    const double mag = std::abs(l);
    if (i > 0 && (prev_mag - 1.0) * (mag - 1.0) <= 0.0 && prev_mag != mag) {
      margin = std::min(margin, 180.0 + unwrapped * 180.0 / constants::pi);
    }
    prev_phase = phase;
    prev_mag = mag;
  }
  return margin;
}

PidConfig tune_pid(const PlantModel& plant, double target_bandwidth, double sample_rate) {
  plant.validate();
  require_positive(target_bandwidth, "target_bandwidth");
  if (target_bandwidth >= plant.natural_frequency / 2.0) {
    throw Infeasible("target bandwidth must stay below half the mechanical resonance");
  }
  PidConfig pid;
  pid.sample_rate = sample_rate;
  pid.loop_bandwidth = target_bandwidth;
  pid.notch_frequency = plant.natural_frequency;
  pid.notch_quality = plant.quality_factor;
  pid.notch_damping = 0.5;
  pid.validate();

  const double loop_scale = detector_slope(plant) * plant.dc_gain;
  pid.ki = two_pi * target_bandwidth / loop_scale;

  // Proportional gain: the smallest value on a grid reaching 60 deg, otherwise
  // the best margin found. The grid spans up to proportional dominance at the
  // crossover.
  constexpr double kTargetMargin = 60.0;
  constexpr int kGrid = 200;
  const double kp_max = 2.0 * pid.ki / (two_pi * target_bandwidth);
  double best_kp = 0.0;
  double best_margin = -1e9;
  bool reached = false;
  for (int i = 0; i <= kGrid; ++i) {
    PidConfig trial = pid;
    trial.kp = kp_max * static_cast<double>(i) / kGrid;
    const double pm = phase_margin(plant, trial);
    if (pm >= kTargetMargin) {
      best_kp = trial.kp;
      reached = true;
      break;
    }
    if (pm > best_margin) {
      best_margin = pm;
      best_kp = trial.kp;
    }
  }
  (void)reached;
  pid.kp = best_kp;
  pid.kd = 0.0;

  const StabilityReport rep = step_check(plant, pid);
  if (!rep.stable || rep.overshoot >= 0.5) {
    throw Infeasible("no stable PI gains found for the requested bandwidth");
  }
  return pid;
}

LockTrace simulate_step_response(const PlantModel& plant, const PidConfig& pid,
                                 const NoiseSpec& noise, const StepSchedule& schedule,
                                 const RunOptions& options) {
  plant.validate();
  pid.validate();
  noise.validate();
  if (schedule.n_steps < 0 || !(schedule.dwell > 0.0)) {
    throw InvalidArgument("step schedule needs n_steps >= 0 and dwell > 0");
  }
  if (options.check_stability) require_stable(plant, pid);
  const double base = base_setpoint(plant, pid);
  const double total = schedule.dwell * (schedule.n_steps + 1);
  auto sp = [&](double t) {
    const int k = std::min(schedule.n_steps, static_cast<int>(std::floor(t / schedule.dwell)));
    return base + schedule.step_volts * k;
  };
  return run_loop(plant, pid, noise, samples_for(total, pid.sample_rate), sp,
                  options.initial_length_error);
}

LockTrace simulate_noise_run(const PlantModel& plant, const PidConfig& pid,
                             const NoiseSpec& noise, double duration,
                             const RunOptions& options) {
  plant.validate();
  pid.validate();
  noise.validate();
  require_positive(duration, "duration");
  if (options.check_stability) require_stable(plant, pid);
  const double base = base_setpoint(plant, pid);
  return run_loop(plant, pid, noise, samples_for(duration, pid.sample_rate),
                  [&](double) { return base; }, options.initial_length_error);
}

PlateauStats plateau_statistics(const LockTrace& trace, const StepSchedule& schedule) {
  PlateauStats st;
  const double dt = 1.0 / trace.sample_rate;
  const auto per = static_cast<std::size_t>(std::llround(schedule.dwell / dt));
  double pooled = 0.0;
  std::size_t pooled_n = 0;
  for (int k = 0; k <= schedule.n_steps; ++k) {
    const std::size_t begin = static_cast<std::size_t>(k) * per + per / 2;
    const std::size_t end = std::min(trace.size(), static_cast<std::size_t>(k + 1) * per);
    if (begin >= end) break;
    double mean = 0.0;
    for (std::size_t i = begin; i < end; ++i) mean += trace.length_error[i];
    mean /= static_cast<double>(end - begin);
    double ss = 0.0;
    for (std::size_t i = begin; i < end; ++i) {
      const double e = trace.length_error[i] - mean;
      ss += e * e;
    }
    st.means.push_back(mean);
    st.rms.push_back(std::sqrt(ss / static_cast<double>(end - begin)));
    pooled += ss;
    pooled_n += end - begin;
  }
  if (st.means.size() > 1) {
    st.mean_spacing = (st.means.back() - st.means.front()) / static_cast<double>(st.means.size() - 1);
  }
  st.pooled_rms = pooled_n > 0 ? std::sqrt(pooled / static_cast<double>(pooled_n)) : 0.0;
  return st;
}

double position_rms(const LockTrace& trace, double discard) {
  const auto skip = static_cast<std::size_t>(std::llround(discard * trace.sample_rate));
  if (skip >= trace.size()) throw TooShort("trace shorter than the discarded settling interval");
  double mean = 0.0;
  for (std::size_t i = skip; i < trace.size(); ++i) mean += trace.length_error[i];
  const auto n = static_cast<double>(trace.size() - skip);
  mean /= n;
  double ss = 0.0;
  for (std::size_t i = skip; i < trace.size(); ++i) {
    const double e = trace.length_error[i] - mean;
    ss += e * e;
  }
  return std::sqrt(ss / n);
}

}  // namespace fpcav::lockloop
