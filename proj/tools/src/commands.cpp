#include "fpcav_app/commands.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <random>
#include <sstream>

#include "fpcav/arraysim.hpp"
#include "fpcav/errors.hpp"
#include "fpcav/fitkit.hpp"
#include "fpcav/io.hpp"
#include "fpcav/psd.hpp"
#include "fpcav/spectrum.hpp"
#include "json.hpp"

namespace fpcav::app {
namespace {

using nlohmann::ordered_json;
using io::format_double;

constexpr int kDeflectionPoints = 400;

void note(const Context& ctx, const std::string& line) {
  if (ctx.log) *ctx.log << line << '\n';
}

void write_json(const std::filesystem::path& path, const ordered_json& j) {
  io::write_file_atomic(path, j.dump(2) + "\n");
}

ordered_json parameters_json(const Context& ctx) {
  ordered_json j = ordered_json::parse(config::to_json(ctx.params));
  j["seed"] = ctx.seed;
  return j;
}

std::string site_file(int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "site_%02d.csv", index);
  return buf;
}

// Undeflected length placing the nearest resonance `detuning` of deflection away.
double ramp_start_length(const config::Parameters& p) {
  const double half = p.cavity.wavelength / 2.0;
  return std::round(p.cavity.length / half) * half + p.scan.initial_detuning;
}

}  // namespace

int cmd_deflection(const Context& ctx) {
  const auto act = config::actuator(ctx.params);
  const auto pull = electromech::pull_in(act);

  std::ostringstream csv;
  csv << "voltage_V,deflection_m,gradient_uV_per_pm\n";
  double min_gradient_390 = INFINITY;
  for (int i = 0; i < kDeflectionPoints; ++i) {
    const double d = pull.deflection * static_cast<double>(i) / kDeflectionPoints;
    const double v = electromech::voltage_for_deflection(d, act);
    const double grad = electromech::to_microvolt_per_picometre(
        electromech::actuation_gradient_at_deflection(d, act));
    if (d <= 390e-9) min_gradient_390 = std::min(min_gradient_390, grad);
    csv << format_double(v) << ',' << format_double(d) << ',' << format_double(grad) << '\n';
  }
  io::write_file_atomic(ctx.out_dir / "deflection.csv", csv.str());

  ordered_json j;
  j["pull_in_voltage_V"] = pull.voltage;
  j["pull_in_deflection_m"] = pull.deflection;
  j["spring_constant_N_per_m"] = act.spring_constant;
  j["effective_mass_kg"] = act.effective_mass;
  j["electrode_area_m2"] = act.electrode_area;
  j["resonance_frequency_Hz"] = electromech::resonance_frequency(act);
  j["min_gradient_uV_per_pm_below_390nm"] = min_gradient_390;
  j["parameters"] = parameters_json(ctx);
  write_json(ctx.out_dir / "deflection.json", j);
  note(ctx, "deflection: pull-in " + format_double(pull.deflection * 1e9) + " nm at " +
                format_double(pull.voltage) + " V");
  return kOk;
}

int cmd_scan(const Context& ctx) {
  const config::Parameters& p = ctx.params;
  const auto nominal = config::cavity_optics(p);
  io::write_file_atomic(ctx.out_dir / "optics.json", config::optics_report_json(nominal));

  // Single-site ramp through two resonances.
  {
    arraysim::SiteRealization site;
    site.actuator = config::actuator(p);
    optics::CavityGeometry g = p.cavity;
    g.length = ramp_start_length(p);
    site.nominal_length = g.length;
    site.optics = optics::make_optics(g, config::fibre(p), nominal.micro_mirror);
    site.core_offset = config::fibre(p).core_offset;
    const double v_end = electromech::voltage_for_deflection(p.scan.max_deflection, site.actuator);
    const auto tr = arraysim::scan_site(site, 0.0, v_end, static_cast<std::size_t>(p.scan.ramp_points));
    write_trace_csv(ctx.out_dir / "scan_ramp.csv", tr);
    ordered_json extra{{"initial_length_m", g.length}, {"seed", ctx.seed}};
    write_trace_sidecar(ctx.out_dir / "scan_ramp.csv", tr, extra.dump());
  }

  // Array row: sample, align on the outermost functional sites, tune, scan.
  const auto lay = config::layout(p);
  const auto all = arraysim::sample_array(lay, config::site_design(p), p.array.jitter_rms,
                                          p.array.yield, ctx.seed);
  const auto row = arraysim::row_sites(all, p.array.row);
  const auto first = std::find_if(row.begin(), row.end(), [](const auto& s) { return s.functional; });
  const auto last = std::find_if(row.rbegin(), row.rend(), [](const auto& s) { return s.functional; });
  if (first == row.end() || first == last.base() - 1) {
    throw Infeasible("fewer than two functional sites in the row; cannot align");
  }
  const std::vector<arraysim::SiteRealization> ends(first, last.base());
  const auto alignment = arraysim::tilt_align(ends, p.cavity.length, lay.pitch);
  const double laser = constants::speed_of_light / p.cavity.wavelength;
  const auto result = arraysim::tune_all(row, alignment, lay.pitch, laser);
  io::write_file_atomic(ctx.out_dir / "array_report.json",
                        arraysim::array_report_json(row, alignment, result));

  const auto aligned = arraysim::apply_alignment(row, alignment, lay.pitch);
  std::vector<int> indices;
  std::vector<ReflectionTrace> traces;
  for (std::size_t i = 0; i < aligned.size(); ++i) {
    const auto& t = result.sites[i];
    if (t.status != arraysim::SiteStatus::tuned) continue;
    const auto& site = aligned[i];
    const double pull = electromech::pull_in(site.actuator).deflection;
    const double d_lo = std::max(0.0, t.deflection - p.scan.site_window);
    const double d_hi = std::min(0.95 * pull, t.deflection + p.scan.site_window);
    const double v_lo = electromech::voltage_for_deflection(d_lo, site.actuator);
    const double v_hi = electromech::voltage_for_deflection(d_hi, site.actuator);
    auto tr = arraysim::scan_site(site, v_lo, v_hi, static_cast<std::size_t>(p.scan.site_points),
                                  {true, laser});
    const auto path = ctx.out_dir / site_file(site.index);
    write_trace_csv(path, tr);
    ordered_json extra{{"site", site.index}, {"tuned_voltage_V", t.voltage}, {"seed", ctx.seed}};
    write_trace_sidecar(path, tr, extra.dump());
    indices.push_back(site.index);
    traces.push_back(std::move(tr));
  }
  arraysim::write_stacked_csv(ctx.out_dir / "scan_stacked.csv", indices, traces);

  // Frequency-domain linewidth trace around the resonance nearest the laser.
  {
    const optics::CavitySpectrum spectrum(nominal);
    const double fsr = nominal.fsr;
    const double center = std::round(laser / fsr) * fsr;
    const double half_span = p.scan.linewidth_span * nominal.half_linewidth / constants::two_pi;
    std::vector<double> xs(static_cast<std::size_t>(p.scan.linewidth_points));
    ReflectionTrace tr;
    tr.kind = AbscissaKind::frequency;
    tr.noise_sigma = p.scan.noise_sigma;
    std::seed_seq seq{ctx.seed, std::uint64_t{0x11}};
    std::mt19937_64 rng(seq);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const double df = -half_span + 2.0 * half_span * static_cast<double>(i) / (xs.size() - 1);
      const double clean = spectrum.at_frequency(center + df);
      const double noisy = std::clamp(clean + tr.noise_sigma * normal(rng), 0.0,
                                      1.0 + 3.0 * tr.noise_sigma);
      tr.x.push_back(df);
      tr.power.push_back(noisy);
    }
    write_trace_csv(ctx.out_dir / "linewidth.csv", tr);
    ordered_json extra{{"center_frequency_Hz", center},
                       {"kappa_Hz", nominal.half_linewidth / constants::two_pi},
                       {"seed", ctx.seed}};
    write_trace_sidecar(ctx.out_dir / "linewidth.csv", tr, extra.dump());
  }

  note(ctx, "scan: " + std::to_string(result.tuned) + " tuned, " + std::to_string(result.dead) +
                " dead, " + std::to_string(result.pull_in_limited) + " pull-in limited; min visibility " +
                format_double(result.visibility_min));
  return kOk;
}

int cmd_fit(const Context& ctx, const std::filesystem::path& trace_path, std::size_t n_peaks) {
  const ReflectionTrace trace = load_trace(trace_path);
  const auto fit = fitkit::fit_lorentzians(trace, n_peaks);

  ordered_json j;
  j["trace"] = trace_path.filename().string();
  j["abscissa_kind"] = std::string(to_string(trace.kind));
  j["converged"] = fit.converged;
  j["iterations"] = fit.iterations;
  j["residual_rms"] = fit.residual_rms;
  j["baseline"] = fit.model.baseline;
  j["baseline_error"] = fit.standard_errors.baseline;
  ordered_json peaks = ordered_json::array();
  for (std::size_t i = 0; i < fit.model.peaks.size(); ++i) {
    const auto& pk = fit.model.peaks[i];
    const auto& se = fit.standard_errors.peaks[i];
    peaks.push_back({{"center", pk.center},
                     {"center_error", se.center},
                     {"half_width", pk.half_width},
                     {"half_width_error", se.half_width},
                     {"depth", pk.depth},
                     {"depth_error", se.depth}});
  }
  j["peaks"] = std::move(peaks);
  if (trace.kind == AbscissaKind::frequency && !fit.model.peaks.empty()) {
    // Half width at half maximum in Hz is kappa / 2 pi.
    j["kappa_Hz"] = fit.model.peaks.front().half_width;
  }
  std::filesystem::path out = ctx.out_dir / trace_path.filename();
  out += ".fit.json";
  write_json(out, j);
  if (ctx.log) *ctx.log << j.dump(2) << '\n';
  return fit.converged ? kOk : kNoConvergence;
}

int cmd_lock(const Context& ctx) {
  const config::Parameters& p = ctx.params;
  const auto plant = config::plant_model(p);
  lockloop::PidConfig pid;
  try {
    pid = lockloop::tune_pid(plant, p.lock.loop_bandwidth, p.lock.sample_rate);
  } catch (const Infeasible& e) {
    throw UnstableLoop(std::string("no stable controller: ") + e.what());
  }
  const auto noise = config::noise_spec(p, ctx.seed);
  const auto schedule = config::step_schedule(p);

  const auto steps = lockloop::simulate_step_response(plant, pid, noise, schedule);
  const auto plateaus = lockloop::plateau_statistics(steps, schedule);
  {
    std::ostringstream csv;
    csv << "t,setpoint,detector,control,length_error\n";
    for (std::size_t i = 0; i < steps.size(); ++i) {
      csv << format_double(steps.t[i]) << ',' << format_double(steps.setpoint[i]) << ','
          << format_double(steps.detector[i]) << ',' << format_double(steps.control[i]) << ','
          << format_double(steps.length_error[i]) << '\n';
    }
    io::write_file_atomic(ctx.out_dir / "lock_steps.csv", csv.str());
  }

  auto setpoint_only = noise;
  setpoint_only.power_fluctuation_rel = 0.0;
  setpoint_only.temperature = 0.0;
  setpoint_only.thermal_drift = 0.0;
  const auto quiet = lockloop::simulate_noise_run(plant, pid, setpoint_only, p.lock.noise_duration);
  const auto full = lockloop::simulate_noise_run(plant, pid, noise, p.lock.noise_duration);
  const auto psd = lockloop::power_spectrum(full.detector, pid.sample_rate, p.lock.psd_smoothing);
  {
    std::ostringstream csv;
    csv << "f_Hz,psd\n";
    for (std::size_t k = 0; k < psd.psd.size(); ++k) {
      csv << format_double(psd.frequency[k]) << ',' << format_double(psd.psd[k]) << '\n';
    }
    io::write_file_atomic(ctx.out_dir / "lock_psd.csv", csv.str());
  }

  ordered_json j;
  j["plateau_spacing_m"] = plateaus.mean_spacing;
  j["plateau_means_m"] = plateaus.means;
  j["plateau_rms_m"] = plateaus.pooled_rms;
  j["setpoint_noise_rms_m"] = lockloop::position_rms(quiet);
  j["full_noise_rms_m"] = lockloop::position_rms(full);
  j["psd_peak_Hz"] = lockloop::peak_frequency(psd, 0.5 * plant.natural_frequency,
                                              std::min(1.5 * plant.natural_frequency,
                                                       0.5 * pid.sample_rate));
  j["controller"] = {{"kp", pid.kp},
                     {"ki", pid.ki},
                     {"kd", pid.kd},
                     {"notch_frequency_Hz", pid.notch_frequency},
                     {"phase_margin_deg", lockloop::phase_margin(plant, pid)}};
  j["plant"] = {{"dc_gain_m_per_V", plant.dc_gain},
                {"detector_full_scale_V", plant.detector_full_scale},
                {"detector_slope_V_per_m", lockloop::detector_slope(plant)}};
  j["parameters"] = parameters_json(ctx);
  write_json(ctx.out_dir / "lock_summary.json", j);
  write_json(ctx.out_dir / "lock_steps.csv.json", parameters_json(ctx));
  note(ctx, "lock: spacing " + format_double(plateaus.mean_spacing * 1e12) + " pm, rms " +
                format_double(lockloop::position_rms(full) * 1e12) + " pm");
  return kOk;
}

int cmd_figures(const Context& ctx) {
  for (auto* cmd : {&cmd_deflection, &cmd_scan, &cmd_lock}) {
    if (const int rc = cmd(ctx); rc != kOk) return rc;
  }
  io::write_file_atomic(ctx.out_dir / "cqed.json",
                        config::cqed_report_json(config::cqed_report(ctx.params)));
  io::write_file_atomic(ctx.out_dir / "parameters.json", parameters_json(ctx).dump(2) + "\n");
  note(ctx, "figures: written to " + ctx.out_dir.string());
  return kOk;
}

int run_guarded(std::ostream& err, const std::function<int()>& command) {
  try {
    return command();
  } catch (const ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kConfigError;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kConfigError;
  } catch (const DegenerateTrace& e) {
    err << "error: degenerate trace: " << e.what() << '\n';
    return kNoConvergence;
  } catch (const UnstableLoop& e) {
    err << "error: unstable loop: " << e.what() << '\n';
    return kUnstable;
  } catch (const LockLost& e) {
    err << "error: lock lost: " << e.what() << '\n';
    return kUnstable;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace fpcav::app
