#include "fpcav/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <type_traits>

#include "fpcav/errors.hpp"
#include "json.hpp"

namespace fpcav::config {
namespace {

using nlohmann::ordered_json;

// Calls f(key, field) for every configurable field, in report order.
template <class P, class F>
void visit(P& p, F&& f) {
  f("cantilever.pad_side", p.cantilever.pad_side);
  f("cantilever.pad_thickness", p.cantilever.pad_thickness);
  f("cantilever.arm_length", p.cantilever.arm_length);
  f("cantilever.arm_width", p.cantilever.arm_width);
  f("cantilever.arm_thickness", p.cantilever.arm_thickness);
  f("cantilever.underetch_length", p.cantilever.underetch_length);
  f("cantilever.underetch_width", p.cantilever.underetch_width);
  f("cantilever.oxide_gap", p.cantilever.oxide_gap);
  f("material.youngs_modulus", p.material.youngs_modulus);
  f("material.density", p.material.density);
  f("material.arm_mass_coefficient", p.arm_mass_coefficient);

  f("cavity.length", p.cavity.length);
  f("cavity.radius_of_curvature", p.cavity.radius_of_curvature);
  f("cavity.wavelength", p.cavity.wavelength);
  f("fibre.mode_waist", p.fibre_waist);
  f("fibre.core_offset_x", p.fibre_offset_x);
  f("fibre.core_offset_y", p.fibre_offset_y);
  f("fibre.reflectivity", p.fibre_mirror.power_reflectivity);
  f("fibre.transmission", p.fibre_mirror.power_transmission);
  f("fibre.loss", p.fibre_mirror.power_loss);
  f("micro_mirror.reflectivity", p.micro_mirror_reflectivity);

  f("scan.initial_detuning", p.scan.initial_detuning);
  f("scan.max_deflection", p.scan.max_deflection);
  f("scan.ramp_points", p.scan.ramp_points);
  f("scan.site_window", p.scan.site_window);
  f("scan.site_points", p.scan.site_points);
  f("scan.linewidth_span", p.scan.linewidth_span);
  f("scan.linewidth_points", p.scan.linewidth_points);
  f("scan.noise_sigma", p.scan.noise_sigma);

  f("array.sites_per_row", p.array.sites_per_row);
  f("array.rows", p.array.rows);
  f("array.pitch", p.array.pitch);
  f("array.row_spacing", p.array.row_spacing);
  f("array.jitter_rms", p.array.jitter_rms);
  f("array.jitter_model", p.array.jitter_model);
  f("array.yield", p.array.yield);
  f("array.length_disorder_rms", p.array.length_disorder_rms);
  f("array.row", p.array.row);

  f("lock.natural_frequency", p.lock.natural_frequency);
  f("lock.quality_factor", p.lock.quality_factor);
  f("lock.bias_deflection", p.lock.bias_deflection);
  f("lock.fringe_fwhm_length", p.lock.fringe_fwhm_length);
  f("lock.fringe_depth", p.lock.fringe_depth);
  f("lock.loop_bandwidth", p.lock.loop_bandwidth);
  f("lock.sample_rate", p.lock.sample_rate);
  f("lock.setpoint_position_rms", p.lock.setpoint_position_rms);
  f("lock.power_fluctuation", p.lock.power_fluctuation);
  f("lock.thermal_drift", p.lock.thermal_drift);
  f("lock.temperature", p.lock.temperature);
  f("lock.noise_bandwidth", p.lock.noise_bandwidth);
  f("lock.step_volts", p.lock.step_volts);
  f("lock.n_steps", p.lock.n_steps);
  f("lock.dwell", p.lock.dwell);
  f("lock.noise_duration", p.lock.noise_duration);
  f("lock.psd_smoothing", p.lock.psd_smoothing);

  f("cqed.atom_decay_rate", p.cqed.atom_decay_rate);
  f("cqed.micro_mirror_reflectivity", p.cqed.micro_mirror_reflectivity);
  f("cqed.high_finesse", p.cqed.high_finesse);
  f("cqed.high_finesse_half_linewidth", p.cqed.high_finesse_half_linewidth);
  f("cqed.nv_wavelength", p.cqed.nv_wavelength);
  f("cqed.nv_branching", p.cqed.nv_branching);
}

template <class T>
T parse_number(std::string_view key, std::string_view text) {
  T value{};
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc{} || ptr != end) {
    throw ConfigError("invalid value '" + std::string(text) + "' for key '" + std::string(key) + "'");
  }
  return value;
}

void set_from_json(Parameters& p, const std::string& key, const ordered_json& value) {
  bool found = false;
  visit(p, [&](std::string_view k, auto& field) {
    if (k != key) return;
    found = true;
    using T = std::remove_cvref_t<decltype(field)>;
    try {
      if constexpr (std::is_same_v<T, std::string>) {
        field = value.get<std::string>();
      } else if constexpr (std::is_same_v<T, int>) {
        if (!value.is_number_integer()) throw ConfigError("");
        field = value.get<int>();
      } else {
        if (!value.is_number()) throw ConfigError("");
        field = value.get<double>();
      }
    } catch (const std::exception&) {
      throw ConfigError("invalid value for key '" + key + "'");
    }
  });
  if (!found) throw ConfigError("unknown configuration key '" + key + "'");
}

void apply_json(Parameters& p, const ordered_json& j, const std::string& prefix) {
  if (!j.is_object()) throw ConfigError("preset file must contain a JSON object");
  for (const auto& [k, v] : j.items()) {
    const std::string key = prefix.empty() ? k : prefix + "." + k;
    if (key == "preset") continue;
    if (v.is_object()) {
      apply_json(p, v, key);
    } else {
      set_from_json(p, key, v);
    }
  }
}

void validate(const Parameters& p) {
  try {
    p.cantilever.validate();
    p.material.validate();
    cavity_optics(p);
    site_design(p).validate();
    layout(p).validate();
    plant_model(p).validate();
    noise_spec(p, 0).validate();
    arraysim::jitter_model_from_string(p.array.jitter_model);
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(std::string("invalid parameters: ") + e.what());
  }
  if (p.scan.ramp_points < 2 || p.scan.site_points < 2 || p.scan.linewidth_points < 2) {
    throw ConfigError("scan point counts must be >= 2");
  }
  if (p.array.row < 0 || p.array.row >= p.array.rows) throw ConfigError("array.row out of range");
  if (p.lock.n_steps < 0) throw ConfigError("lock.n_steps must be >= 0");
}

}  // namespace

std::vector<std::string> preset_names() {
  return {std::string(kVisibilityMatched), std::string(kLinewidthMatched)};
}

Parameters load_preset(std::string_view name_or_path) {
  Parameters p;
  if (name_or_path == kVisibilityMatched) return p;
  if (name_or_path == kLinewidthMatched) {
    p.preset = std::string(kLinewidthMatched);
    p.micro_mirror_reflectivity = optics::kLinewidthMatchedReflectivity;
    return p;
  }
  const std::filesystem::path path{std::string(name_or_path)};
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("unknown preset '" + std::string(name_or_path) +
                      "' (not a built-in name or readable file)");
  }
  ordered_json j;
  try {
    j = ordered_json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("cannot parse preset file " + path.string() + ": " + e.what());
  }
  apply_json(p, j, "");
  p.preset = path.string();
  validate(p);
  return p;
}

void apply_override(Parameters& params, std::string_view key, std::string_view value) {
  bool found = false;
  visit(params, [&](std::string_view k, auto& field) {
    if (k != key) return;
    found = true;
    using T = std::remove_cvref_t<decltype(field)>;
    if constexpr (std::is_same_v<T, std::string>) {
      field = std::string(value);
    } else {
      field = parse_number<T>(key, value);
    }
  });
  if (!found) throw ConfigError("unknown configuration key '" + std::string(key) + "'");
}

void apply_assignment(Parameters& params, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw ConfigError("override '" + std::string(assignment) + "' is not of the form key=value");
  }
  apply_override(params, assignment.substr(0, eq), assignment.substr(eq + 1));
}

std::string to_json(const Parameters& params) {
  ordered_json j;
  j["preset"] = params.preset;
  visit(params, [&](std::string_view key, const auto& field) {
    const auto dot = key.find('.');
    j[std::string(key.substr(0, dot))][std::string(key.substr(dot + 1))] = field;
  });
  return j.dump(2) + "\n";
}

std::vector<std::string> known_keys() {
  std::vector<std::string> keys;
  Parameters p;
  visit(p, [&](std::string_view key, auto&) { keys.emplace_back(key); });
  return keys;
}

Parameters resolve(const RunConfig& run) {
  Parameters p = load_preset(run.preset_name);
  for (const auto& o : run.overrides) apply_assignment(p, o);
  validate(p);
  return p;
}

electromech::ActuatorModel actuator(const Parameters& p) {
  return electromech::make_actuator(p.cantilever, p.material, p.arm_mass_coefficient);
}

optics::FibreSpec fibre(const Parameters& p) {
  optics::FibreSpec f;
  f.mode_waist = p.fibre_waist;
  f.core_offset = {p.fibre_offset_x, p.fibre_offset_y};
  f.mirror = p.fibre_mirror;
  return f;
}

optics::CavityOptics cavity_optics(const Parameters& p) {
  return optics::make_optics(p.cavity, fibre(p), optics::metal_mirror(p.micro_mirror_reflectivity));
}

arraysim::ArrayLayout layout(const Parameters& p) {
  return {p.array.sites_per_row, p.array.rows, p.array.pitch, p.array.row_spacing};
}

arraysim::SiteDesign site_design(const Parameters& p) {
  arraysim::SiteDesign d;
  d.geometry = p.cavity;
  d.fibre = fibre(p);
  d.micro_mirror = optics::metal_mirror(p.micro_mirror_reflectivity);
  d.actuator = actuator(p);
  d.length_disorder_rms = p.array.length_disorder_rms;
  d.jitter_model = arraysim::jitter_model_from_string(p.array.jitter_model);
  return d;
}

lockloop::PlantModel plant_model(const Parameters& p) {
  const auto act = actuator(p);
  lockloop::PlantModel m;
  m.natural_frequency = p.lock.natural_frequency;
  m.quality_factor = p.lock.quality_factor;
  m.dc_gain = 1.0 / electromech::actuation_gradient_at_deflection(p.lock.bias_deflection, act);
  m.operating_length = p.cavity.length;
  m.fringe_fwhm_length = p.lock.fringe_fwhm_length;
  m.fringe_depth = p.lock.fringe_depth;
  m.spring_constant = act.spring_constant;
  m.detector_full_scale = lockloop::calibrate_detector_scale(m);
  return m;
}

lockloop::NoiseSpec noise_spec(const Parameters& p, std::uint64_t seed) {
  lockloop::NoiseSpec n;
  n.setpoint_noise_rms = lockloop::setpoint_noise_for_position(plant_model(p), p.lock.setpoint_position_rms);
  n.power_fluctuation_rel = p.lock.power_fluctuation;
  n.thermal_drift = p.lock.thermal_drift;
  n.temperature = p.lock.temperature;
  n.noise_bandwidth = p.lock.noise_bandwidth;
  n.seed = seed;
  return n;
}

lockloop::StepSchedule step_schedule(const Parameters& p) {
  return {p.lock.step_volts, p.lock.n_steps, p.lock.dwell};
}

CqedReport cqed_report(const Parameters& p) {
  const auto measured = optics::make_optics(p.cavity, fibre(p),
                                            optics::metal_mirror(p.cqed.micro_mirror_reflectivity));
  CqedReport r{};
  r.cavity_waist = measured.cavity_waist;
  r.overlap_squared = measured.overlap * measured.overlap;
  r.visibility = optics::visibility(measured);
  r.coupling = optics::cqed_coupling(r.cavity_waist, p.cavity.length, p.cavity.wavelength, p.cqed.atom_decay_rate);
  r.half_linewidth = measured.half_linewidth;
  r.cooperativity = optics::cooperativity(r.coupling, r.half_linewidth, p.cqed.atom_decay_rate);
  r.high_finesse_cooperativity = optics::cooperativity(r.coupling, p.cqed.high_finesse_half_linewidth, p.cqed.atom_decay_rate);

  optics::CavityGeometry nv = p.cavity;
  nv.wavelength = p.cqed.nv_wavelength;
  r.nv_cavity_waist = optics::mode_waist(nv);
  r.nv_half_linewidth = constants::pi * optics::free_spectral_range(nv.length) / p.cqed.high_finesse;
  const double nv_coupling = optics::cqed_coupling(r.nv_cavity_waist, nv.length, nv.wavelength, p.cqed.atom_decay_rate);
  r.nv_cooperativity = optics::cooperativity(nv_coupling, r.nv_half_linewidth, p.cqed.atom_decay_rate, p.cqed.nv_branching);
  return r;
}

std::string cqed_report_json(const CqedReport& r) {
  ordered_json j;
  j["rb"] = {{"w_C", r.cavity_waist},
             {"eta_squared", r.overlap_squared},
             {"visibility", r.visibility},
             {"g_Hz", r.coupling / constants::two_pi},
             {"kappa_Hz", r.half_linewidth / constants::two_pi},
             {"C1", r.cooperativity},
             {"C_high_finesse", r.high_finesse_cooperativity}};
  j["nv"] = {{"w_C", r.nv_cavity_waist},
             {"kappa_Hz", r.nv_half_linewidth / constants::two_pi},
             {"C", r.nv_cooperativity}};
  return j.dump(2) + "\n";
}

std::string optics_report_json(const optics::CavityOptics& o) {
  ordered_json j;
  j["w_C"] = o.cavity_waist;
  j["eta"] = o.overlap;
  j["r1a"] = o.effective_fibre_reflectivity;
  j["finesse"] = o.finesse;
  j["kappa_Hz"] = o.half_linewidth / constants::two_pi;
  j["fsr_Hz"] = o.fsr;
  j["visibility"] = optics::visibility(o);
  return j.dump(2) + "\n";
}

}  // namespace fpcav::config
