#include "fpcav/fitkit.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "fpcav/constants.hpp"
#include "fpcav/errors.hpp"
#include "fpcav/optics.hpp"

namespace fpcav::fitkit {
namespace {

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  double m = *mid;
  if (v.size() % 2 == 0) {
    m = 0.5 * (m + *std::max_element(v.begin(), mid));
  }
  return m;
}

// Parameter vector layout: [baseline, c_0, w_0, d_0, c_1, w_1, d_1, ...],
// all in the normalised abscissa u = (x - shift) / scale.
double model_value(const Eigen::VectorXd& p, double u) {
  double v = p[0];
  const Eigen::Index n = (p.size() - 1) / 3;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double c = p[1 + 3 * i];
    const double w = p[2 + 3 * i];
    const double d = p[3 + 3 * i];
    const double z = (u - c) / w;
    v -= d / (1.0 + z * z);
  }
  return v;
}

void residuals(const Eigen::VectorXd& p, const std::vector<double>& u,
               const std::vector<double>& y, Eigen::VectorXd& r) {
  for (std::size_t k = 0; k < u.size(); ++k) {
    r[static_cast<Eigen::Index>(k)] = model_value(p, u[k]) - y[k];
  }
}

}  // namespace

double LorentzianModel::operator()(double x) const {
  double v = baseline;
  for (const auto& pk : peaks) {
    const double z = (x - pk.center) / pk.half_width;
    v -= pk.depth / (1.0 + z * z);
  }
  return v;
}

void LorentzianModel::validate() const {
  for (const auto& pk : peaks) {
    if (!(pk.half_width > 0.0)) throw InvalidArgument("Lorentzian half_width must be positive");
    if (!(pk.depth > 0.0 && pk.depth <= baseline)) {
      throw InvalidArgument("Lorentzian depth must lie in (0, baseline]");
    }
  }
}

std::vector<Dip> find_dips(const ReflectionTrace& trace, double mad_factor) {
  const std::size_t n = trace.size();
  std::vector<Dip> dips;
  if (n < 3) return dips;
  const auto& p = trace.power;
  const double base = median(p);
  std::vector<double> dev(n);
  for (std::size_t i = 0; i < n; ++i) dev[i] = std::abs(p[i] - base);
  const double mad = median(dev);
  // The floor keeps rounding-level ripples of noiseless traces out.
  const double threshold = base - mad_factor * mad - 1e-9;

  constexpr std::size_t kRadius = 2;
  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < n; ++i) {
    if (!(p[i] < threshold)) continue;
    const std::size_t lo = i >= kRadius ? i - kRadius : 0;
    const std::size_t hi = std::min(n - 1, i + kRadius);
    bool is_min = true;
    for (std::size_t j = lo; j <= hi && is_min; ++j) {
      if (j != i && (p[j] < p[i] || (p[j] == p[i] && j < i))) is_min = false;
    }
    if (is_min) candidates.push_back(i);
  }
  std::sort(candidates.begin(), candidates.end(),
            [&](std::size_t a, std::size_t b) { return p[a] < p[b]; });

  for (std::size_t i : candidates) {
    const double x0 = trace.x[i];
    bool shadowed = false;
    for (const auto& d : dips) {
      if (std::abs(x0 - d.center) < 2.0 * d.half_width) {
        shadowed = true;
        break;
      }
    }
    if (shadowed) continue;
    const double depth = base - p[i];
    const double half_level = base - 0.5 * depth;
    std::size_t l = i;
    while (l > 0 && p[l] < half_level) --l;
    std::size_t r = i;
    while (r + 1 < n && p[r] < half_level) ++r;
    double hw = 0.5 * (trace.x[r] - trace.x[l]);
    const double spacing =
        (trace.x[std::min(n - 1, i + 1)] - trace.x[i > 0 ? i - 1 : 0]) / 2.0;
    hw = std::max(hw, spacing);
    dips.push_back({i, x0, depth, hw});
  }
  return dips;
}

LorentzianModel initial_guess(const ReflectionTrace& trace, std::size_t n_peaks) {
  const auto dips = find_dips(trace);
  if (dips.size() < n_peaks) {
    throw DegenerateTrace("trace shows " + std::to_string(dips.size()) +
                          " resolvable dips but " + std::to_string(n_peaks) + " were requested");
  }
  LorentzianModel m;
  m.baseline = median(trace.power);
  for (std::size_t k = 0; k < n_peaks; ++k) {
    m.peaks.push_back({dips[k].center, dips[k].half_width, dips[k].depth});
  }
  std::sort(m.peaks.begin(), m.peaks.end(),
            [](const LorentzPeak& a, const LorentzPeak& b) { return a.center < b.center; });
  return m;
}

FitResult fit_lorentzians(const ReflectionTrace& trace, std::size_t n_peaks,
                          const std::optional<LorentzianModel>& guess,
                          const FitOptions& options) {
  if (n_peaks < 1) throw InvalidArgument("n_peaks must be at least 1");
  trace.validate();
  const std::size_t n_params = 3 * n_peaks + 1;
  if (trace.size() < 5 * n_params) {
    throw DegenerateTrace("trace has " + std::to_string(trace.size()) +
                          " samples; at least " + std::to_string(5 * n_params) + " required");
  }
  LorentzianModel start = guess ? *guess : initial_guess(trace, n_peaks);
  if (start.peaks.size() != n_peaks) {
    throw InvalidArgument("initial guess has the wrong number of peaks");
  }

  // Affine normalisation of the abscissa keeps the normal equations well scaled
  // and makes the fit covariant under rescaling of x.
  const double x_lo = trace.x.front();
  const double x_hi = trace.x.back();
  const double shift = 0.5 * (x_lo + x_hi);
  const double scale = x_hi > x_lo ? 0.5 * (x_hi - x_lo) : 1.0;
  std::vector<double> u(trace.size());
  for (std::size_t k = 0; k < u.size(); ++k) u[k] = (trace.x[k] - shift) / scale;

  const auto np = static_cast<Eigen::Index>(n_params);
  const auto nr = static_cast<Eigen::Index>(trace.size());
  Eigen::VectorXd p(np);
  p[0] = start.baseline;
  for (std::size_t i = 0; i < n_peaks; ++i) {
    const auto b = static_cast<Eigen::Index>(1 + 3 * i);
    p[b] = (start.peaks[i].center - shift) / scale;
    p[b + 1] = start.peaks[i].half_width / scale;
    p[b + 2] = start.peaks[i].depth;
  }

  Eigen::VectorXd r(nr);
  Eigen::VectorXd r_trial(nr);
  Eigen::MatrixXd jac(nr, np);
  Eigen::VectorXd rp(nr);
  Eigen::VectorXd rm(nr);

  residuals(p, u, trace.power, r);
  double cost = 0.5 * r.squaredNorm();
  const double initial_cost = cost;
  double lambda = options.initial_damping;
  bool converged = false;
  int iter = 0;

  auto jacobian = [&](const Eigen::VectorXd& at) {
    Eigen::VectorXd q = at;
    for (Eigen::Index j = 0; j < np; ++j) {
      const double h = 1e-6 * std::max(std::abs(at[j]), 1e-3);
      q[j] = at[j] + h;
      residuals(q, u, trace.power, rp);
      q[j] = at[j] - h;
      residuals(q, u, trace.power, rm);
      q[j] = at[j];
      jac.col(j) = (rp - rm) / (2.0 * h);
    }
  };

  while (iter < options.max_iterations && !converged) {
    ++iter;
    if (cost == 0.0) {
      converged = true;
      break;
    }
    jacobian(p);
    const Eigen::MatrixXd jtj = jac.transpose() * jac;
    const Eigen::VectorXd g = jac.transpose() * r;
    bool accepted = false;
    while (!accepted) {
      Eigen::MatrixXd a = jtj;
      for (Eigen::Index j = 0; j < np; ++j) a(j, j) += lambda * std::max(jtj(j, j), 1e-30);
      const Eigen::VectorXd step = a.ldlt().solve(-g);
      Eigen::VectorXd trial = p + step;
      residuals(trial, u, trace.power, r_trial);
      const double trial_cost = 0.5 * r_trial.squaredNorm();
      if (std::isfinite(trial_cost) && trial_cost < cost) {
        const double rel = (cost - trial_cost) / cost;
        p = trial;
        r = r_trial;
        cost = trial_cost;
        lambda = std::max(lambda / 10.0, 1e-15);
        accepted = true;
        if (rel < options.relative_tolerance) converged = true;
      } else {
        lambda *= 10.0;
        if (lambda > 1e12) {
          // No descent direction left at working precision: a stationary point.
          converged = true;
          break;
        }
      }
    }
  }

  FitResult result;
  result.converged = converged;
  result.iterations = iter;
  result.residual_rms = std::sqrt(2.0 * cost / static_cast<double>(nr));
  result.initial_residual_rms = std::sqrt(2.0 * initial_cost / static_cast<double>(nr));

  jacobian(p);
  const Eigen::MatrixXd jtj = jac.transpose() * jac;
  const double dof = static_cast<double>(nr - np);
  const double variance = dof > 0.0 ? 2.0 * cost / dof : 0.0;
  Eigen::MatrixXd cov = jtj.completeOrthogonalDecomposition().pseudoInverse() * variance;

  result.model.baseline = p[0];
  result.standard_errors.baseline = std::sqrt(std::max(cov(0, 0), 0.0));
  for (std::size_t i = 0; i < n_peaks; ++i) {
    const auto b = static_cast<Eigen::Index>(1 + 3 * i);
    result.model.peaks.push_back({p[b] * scale + shift, std::abs(p[b + 1]) * scale, p[b + 2]});
    result.standard_errors.peaks.push_back({std::sqrt(std::max(cov(b, b), 0.0)) * scale,
                                            std::sqrt(std::max(cov(b + 1, b + 1), 0.0)) * scale,
                                            std::sqrt(std::max(cov(b + 2, b + 2), 0.0))});
  }
  // Report peaks in abscissa order, keeping errors aligned.
  std::vector<std::size_t> order(n_peaks);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return result.model.peaks[a].center < result.model.peaks[b].center;
  });
  FitResult sorted = result;
  for (std::size_t k = 0; k < n_peaks; ++k) {
    sorted.model.peaks[k] = result.model.peaks[order[k]];
    sorted.standard_errors.peaks[k] = result.standard_errors.peaks[order[k]];
  }
  return sorted;
}

ReflectionTrace synthesize(const LorentzianModel& model, std::span<const double> xs,
                           double noise_sigma, std::mt19937_64& rng, AbscissaKind kind) {
  if (noise_sigma < 0.0) throw InvalidArgument("noise_sigma must be non-negative");
  ReflectionTrace t;
  t.kind = kind;
  t.noise_sigma = noise_sigma;
  t.x.assign(xs.begin(), xs.end());
  t.power.reserve(xs.size());
  std::normal_distribution<double> noise(0.0, 1.0);
  const double upper = 1.0 + 3.0 * noise_sigma;
  for (double x : xs) {
    double v = model(x);
    if (noise_sigma > 0.0) v += noise_sigma * noise(rng);
    t.power.push_back(std::clamp(v, 0.0, upper));
  }
  return t;
}

double length_from_fsr(double fsr_hz) {
  if (!(fsr_hz > 0.0)) throw InvalidArgument("free spectral range must be positive");
  return constants::speed_of_light / (2.0 * fsr_hz);
}

CurvatureResult curvature_workflow(const ReflectionTrace& trace, double length,
                                   const CurvatureOptions& options) {
  if (trace.kind != AbscissaKind::frequency) {
    throw InvalidArgument("curvature workflow needs a frequency-domain trace");
  }
  auto dips = find_dips(trace);
  if (dips.empty()) throw DegenerateTrace("trace shows no resonance dip");
  const double deepest = dips.front().depth;
  std::erase_if(dips, [&](const Dip& d) {
    return d.depth < options.relative_detection_threshold * deepest;
  });
  if (dips.size() < 2) {
    throw MissingHigherOrder("no higher-order transverse mode dip above the detection threshold");
  }
  if (dips.size() > options.max_dips) dips.resize(options.max_dips);

  LorentzianModel guess;
  std::vector<double> level(trace.power);
  guess.baseline = [&] {
    const auto mid = level.begin() + static_cast<std::ptrdiff_t>(level.size() / 2);
    std::nth_element(level.begin(), mid, level.end());
    return *mid;
  }();
  for (const auto& d : dips) guess.peaks.push_back({d.center, d.half_width, d.depth});

  CurvatureResult out;
  out.fit = fit_lorentzians(trace, guess.peaks.size(), guess);
  const auto& peaks = out.fit.model.peaks;
  auto by_depth = [](const LorentzPeak& a, const LorentzPeak& b) { return a.depth < b.depth; };
  const auto fundamental = std::max_element(peaks.begin(), peaks.end(), by_depth);
  const LorentzPeak* first_order = nullptr;
  for (const auto& pk : peaks) {
    if (&pk == &*fundamental) continue;
    if (first_order == nullptr || pk.depth > first_order->depth) first_order = &pk;
  }
  double spacing = first_order->center - fundamental->center;
  if (spacing <= 0.0) spacing += optics::free_spectral_range(length);
  out.mode_spacing = spacing;
  out.radius_of_curvature = optics::curvature_from_mode_spacing(spacing, length, 1);
  return out;
}

ReflectionTrace voltage_to_length_axis(const ReflectionTrace& trace,
                                       const electromech::ActuatorModel& model,
                                       double initial_length) {
  if (trace.kind != AbscissaKind::voltage) {
    throw InvalidArgument("relinearisation needs a voltage-domain trace");
  }
  ReflectionTrace out;
  out.kind = AbscissaKind::length;
  out.noise_sigma = trace.noise_sigma;
  const std::size_t n = trace.size();
  out.x.resize(n);
  out.power.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double d = electromech::static_deflection(trace.x[i], model);
    out.x[n - 1 - i] = initial_length - d;
    out.power[n - 1 - i] = trace.power[i];
  }
  return out;
}

}  // namespace fpcav::fitkit
