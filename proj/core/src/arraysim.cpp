#include "fpcav/arraysim.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "fpcav/constants.hpp"
#include "fpcav/errors.hpp"
#include "fpcav/io.hpp"
#include "fpcav/spectrum.hpp"
#include "json.hpp"

namespace fpcav::arraysim {
namespace {

constexpr int kCoarseScanPoints = 1000;
constexpr int kMaxBisections = 200;

optics::CavityOptics optics_at(const SiteRealization& site, double length) {
  optics::CavityGeometry g = site.optics.geometry;
  g.length = length;
  return optics::make_optics(g, site.optics.fibre, site.optics.micro_mirror);
}

}  // namespace

void ArrayLayout::validate() const {
  if (sites_per_row < 1 || rows < 1) throw InvalidArgument("array counts must be >= 1");
  if (!(pitch > 0.0)) throw InvalidArgument("pitch must be positive");
  if (!(row_spacing > 0.0)) throw InvalidArgument("row_spacing must be positive");
}

std::string_view to_string(JitterModel model) {
  return model == JitterModel::radial ? "radial" : "per_axis";
}

JitterModel jitter_model_from_string(std::string_view name) {
  if (name == "per_axis") return JitterModel::per_axis;
  if (name == "radial") return JitterModel::radial;
  throw InvalidArgument("unknown jitter model '" + std::string(name) + "'");
}

void SiteDesign::validate() const {
  geometry.validate();
  fibre.validate();
  micro_mirror.validate();
  actuator.validate();
  if (!(length_disorder_rms >= 0.0)) throw InvalidArgument("length_disorder_rms must be >= 0");
}

std::vector<SiteRealization> sample_array(const ArrayLayout& layout, const SiteDesign& design,
                                          double jitter_rms, double yield_prob,
                                          std::uint64_t seed) {
  layout.validate();
  design.validate();
  if (!(jitter_rms >= 0.0)) throw InvalidArgument("jitter_rms must be >= 0");
  if (!(yield_prob > 0.0 && yield_prob <= 1.0)) throw InvalidArgument("yield_prob must lie in (0, 1]");

  const double axis_sigma =
      design.jitter_model == JitterModel::radial ? jitter_rms / std::sqrt(2.0) : jitter_rms;

  std::vector<SiteRealization> sites;
  sites.reserve(static_cast<std::size_t>(layout.site_count()));
  for (int index = 0; index < layout.site_count(); ++index) {
    std::seed_seq seq{seed, static_cast<std::uint64_t>(index)};
    std::mt19937_64 rng(seq);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);

    SiteRealization s;
    s.index = index;
    s.row = index / layout.sites_per_row;
    s.column = index % layout.sites_per_row;
    const double nx = normal(rng);
    const double ny = normal(rng);
    const double nh = normal(rng);
    const double u = uniform(rng);
    s.core_offset = {axis_sigma * nx, axis_sigma * ny};
    s.height_offset = design.length_disorder_rms * nh;
    s.nominal_length = design.geometry.length + s.height_offset;
    s.functional = u < yield_prob;
    s.actuator = design.actuator;

    optics::CavityGeometry g = design.geometry;
    g.length = s.nominal_length;
    optics::FibreSpec f = design.fibre;
    f.core_offset = s.core_offset;
    s.optics = optics::make_optics(g, f, design.micro_mirror);
    sites.push_back(std::move(s));
  }
  return sites;
}

std::vector<SiteRealization> row_sites(const std::vector<SiteRealization>& sites, int row) {
  std::vector<SiteRealization> out;
  std::copy_if(sites.begin(), sites.end(), std::back_inserter(out),
               [row](const SiteRealization& s) { return s.row == row; });
  std::sort(out.begin(), out.end(),
            [](const SiteRealization& a, const SiteRealization& b) { return a.column < b.column; });
  if (out.empty()) throw InvalidArgument("row " + std::to_string(row) + " has no sites");
  return out;
}

double aligned_length(const SiteRealization& site, const AlignmentState& alignment,
                      double pitch) {
  return alignment.global_gap + site.height_offset + alignment.tilt * site.column * pitch;
}

AlignmentState tilt_align(const std::vector<SiteRealization>& row, double target_length,
                          double pitch, const AlignmentOptions& options) {
  if (row.size() < 2) throw InvalidArgument("alignment needs at least two sites");
  if (!(pitch > 0.0) || !(target_length > 0.0)) {
    throw InvalidArgument("pitch and target_length must be positive");
  }
  const SiteRealization& first = row.front();
  const SiteRealization& last = row.back();
  if (!first.functional || !last.functional) {
    throw InvalidArgument("tilt alignment needs functional first and last sites");
  }
  const double span = static_cast<double>(last.column - first.column) * pitch;
  const double exact_tilt = (first.height_offset - last.height_offset) / span;
  if (std::abs(exact_tilt) > options.max_tilt) {
    throw Infeasible("required tilt exceeds the plausibility bound");
  }
  const double exact_gap =
      target_length - first.height_offset - exact_tilt * first.column * pitch;

  AlignmentState a;
  a.tilt = options.tilt_step > 0.0 ? std::round(exact_tilt / options.tilt_step) * options.tilt_step
                                   : exact_tilt;
  // Gap chosen after the tilt is fixed so the end-site errors straddle zero.
  const double mid_height = 0.5 * (first.height_offset + last.height_offset);
  const double mid_column = 0.5 * (first.column + last.column);
  const double gap = options.gap_step > 0.0
                         ? target_length - mid_height - a.tilt * mid_column * pitch
                         : exact_gap;
  a.global_gap = options.gap_step > 0.0 ? std::round(gap / options.gap_step) * options.gap_step : gap;

  for (const SiteRealization* end : {&first, &last}) {
    if (std::abs(aligned_length(*end, a, pitch) - target_length) > options.tolerance) {
      throw Infeasible("stage resolution cannot bring the end sites within tolerance");
    }
  }
  for (const auto& s : row) {
    const double l = aligned_length(s, a, pitch);
    if (!(l > 0.0 && l < s.optics.geometry.radius_of_curvature)) {
      throw UnstableCavity("aligned site " + std::to_string(s.index) + " leaves (0, R)");
    }
  }
  return a;
}

std::vector<SiteRealization> apply_alignment(const std::vector<SiteRealization>& row,
                                             const AlignmentState& alignment, double pitch) {
  std::vector<SiteRealization> out = row;
  for (auto& s : out) s.optics = optics_at(s, aligned_length(s, alignment, pitch));
  return out;
}

std::string_view to_string(SiteStatus status) {
  switch (status) {
    case SiteStatus::tuned: return "tuned";
    case SiteStatus::dead: return "dead";
    case SiteStatus::pull_in_limited: return "pull_in_limited";
  }
  return "unknown";
}

double resonance_frequency(const SiteRealization& site, long long order, double deflection) {
  return static_cast<double>(order) * constants::speed_of_light /
         (2.0 * (site.optics.geometry.length - deflection));
}

SiteTune tune_site(const SiteRealization& site, double laser_frequency) {
  if (!site.functional) throw DeadSite("site " + std::to_string(site.index) + " is not functional");
  if (!(laser_frequency > 0.0)) throw InvalidArgument("laser_frequency must be positive");

  const double length = site.optics.geometry.length;
  const double wavelength = constants::speed_of_light / laser_frequency;
  const auto pull = electromech::pull_in(site.actuator);

  // Largest q with q lambda / 2 <= L: the resonance needing the least
  // deflection. The small slack keeps an already-resonant site at q.
  const auto order = static_cast<long long>(std::floor(2.0 * length / wavelength + 1e-9));
  if (order < 1) throw PullInLimited("cavity shorter than half a wavelength");
  const double needed = length - static_cast<double>(order) * wavelength / 2.0;
  if (needed >= pull.deflection) {
    throw PullInLimited("site " + std::to_string(site.index) + " needs " +
                        std::to_string(needed * 1e9) + " nm, beyond pull-in");
  }

  auto detuning = [&](double v) {
    return resonance_frequency(site, order, electromech::static_deflection(v, site.actuator)) -
           laser_frequency;
  };

  SiteTune t;
  t.index = site.index;
  t.longitudinal_order = order;

  double v = 0.0;
  if (detuning(0.0) < 0.0) {
    const double v_max = pull.voltage * (1.0 - 1e-9);
    double lo = 0.0;
    double hi = -1.0;
    for (int k = 1; k < kCoarseScanPoints; ++k) {
      const double vk = v_max * k / (kCoarseScanPoints - 1);
      if (detuning(vk) >= 0.0) {
        hi = vk;
        break;
      }
      lo = vk;
    }
    if (hi < 0.0) throw PullInLimited("no resonance reachable below pull-in");
    for (int i = 0; i < kMaxBisections; ++i) {
      const double mid = 0.5 * (lo + hi);
      if (mid <= lo || mid >= hi) break;
      (detuning(mid) < 0.0 ? lo : hi) = mid;
    }
    v = std::abs(detuning(lo)) < std::abs(detuning(hi)) ? lo : hi;
  }

  t.status = SiteStatus::tuned;
  t.voltage = v;
  t.deflection = electromech::static_deflection(v, site.actuator);
  t.length = length - t.deflection;
  t.residual_detuning = detuning(v);
  t.visibility = optics::visibility(optics_at(site, t.length));
  return t;
}

TuneResult tune_all(const std::vector<SiteRealization>& row, const AlignmentState& alignment,
                    double pitch, double laser_frequency) {
  TuneResult r;
  double vis_sum = 0.0;
  r.visibility_min = 1.0;
  for (const auto& site : apply_alignment(row, alignment, pitch)) {
    SiteTune t;
    t.index = site.index;
    t.length = site.optics.geometry.length;
    if (!site.functional) {
      t.status = SiteStatus::dead;
      ++r.dead;
    } else {
      try {
        t = tune_site(site, laser_frequency);
        ++r.tuned;
        vis_sum += t.visibility;
        r.visibility_min = std::min(r.visibility_min, t.visibility);
      } catch (const PullInLimited&) {
        t.status = SiteStatus::pull_in_limited;
        ++r.pull_in_limited;
      }
    }
    r.sites.push_back(t);
  }
  if (r.tuned > 0) {
    r.visibility_mean = vis_sum / r.tuned;
  } else {
    r.visibility_min = 0.0;
  }
  return r;
}

ReflectionTrace scan_site(const SiteRealization& site, double v_start, double v_end,
                          std::size_t n_points, const ScanOptions& options) {
  if (n_points < 2) throw InvalidArgument("a scan needs at least two points");
  if (!(v_end > v_start)) throw InvalidArgument("voltage ramp must increase");
  const auto pull = electromech::pull_in(site.actuator);
  if (std::max(std::abs(v_start), std::abs(v_end)) >= pull.voltage) {
    throw PullInExceeded("voltage ramp reaches the pull-in voltage");
  }
  const optics::CavitySpectrum spectrum(site.optics, {options.higher_order_modes, 6});
  const double probe_frequency = options.laser_frequency > 0.0 ? options.laser_frequency
                                                  : spectrum.laser_frequency();
  ReflectionTrace tr;
  tr.kind = AbscissaKind::voltage;
  tr.x.resize(n_points);
  tr.power.resize(n_points);
  const double length = site.optics.geometry.length;
  for (std::size_t i = 0; i < n_points; ++i) {
    const double v = v_start + (v_end - v_start) * static_cast<double>(i) /
                                   static_cast<double>(n_points - 1);
    tr.x[i] = v;
    tr.power[i] = spectrum.reflection(length - electromech::static_deflection(v, site.actuator), probe_frequency);
  }
  return tr;
}

YieldStats yield_statistics(const ArrayLayout& layout, const SiteDesign& design,
                            double yield_prob, int n_seeds, std::uint64_t first_seed) {
  if (n_seeds < 2) throw InvalidArgument("yield statistics need at least two seeds");
  double sum = 0.0;
  double sum_sq = 0.0;
  for (int k = 0; k < n_seeds; ++k) {
    const auto sites =
        sample_array(layout, design, 0.0, yield_prob, first_seed + static_cast<std::uint64_t>(k));
    const auto n = static_cast<double>(
        std::count_if(sites.begin(), sites.end(), [](const auto& s) { return s.functional; }));
    sum += n;
    sum_sq += n * n;
  }
  YieldStats st;
  st.seeds = n_seeds;
  st.sites = layout.site_count();
  st.mean_functional = sum / n_seeds;
  st.stddev_functional =
      std::sqrt(std::max(0.0, (sum_sq - sum * sum / n_seeds) / (n_seeds - 1)));
  return st;
}

std::string array_report_json(const std::vector<SiteRealization>& row,
                              const AlignmentState& alignment, const TuneResult& result) {
  nlohmann::ordered_json j;
  j["alignment"] = {{"global_gap_m", alignment.global_gap}, {"tilt_rad", alignment.tilt}};
  nlohmann::ordered_json sites = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < result.sites.size(); ++i) {
    const SiteTune& t = result.sites[i];
    nlohmann::ordered_json s;
    s["index"] = t.index;
    s["status"] = std::string(to_string(t.status));
    if (i < row.size()) {
      s["core_offset_m"] = {row[i].core_offset.x, row[i].core_offset.y};
      s["height_offset_m"] = row[i].height_offset;
    }
    s["voltage_V"] = t.voltage;
    s["deflection_m"] = t.deflection;
    s["length_m"] = t.length;
    s["order"] = t.longitudinal_order;
    s["residual_detuning_Hz"] = t.residual_detuning;
    s["visibility"] = t.visibility;
    sites.push_back(std::move(s));
  }
  j["sites"] = std::move(sites);
  j["summary"] = {{"tuned", result.tuned},
                  {"dead", result.dead},
                  {"pull_in_limited", result.pull_in_limited},
                  {"visibility_min", result.visibility_min},
                  {"visibility_mean", result.visibility_mean}};
  return j.dump(2) + "\n";
}

void write_stacked_csv(const std::filesystem::path& path, const std::vector<int>& site_indices,
                       const std::vector<ReflectionTrace>& traces, double offset_step) {
  if (site_indices.size() != traces.size()) {
    throw InvalidArgument("one site index per trace required");
  }
  std::ostringstream out;
  out << "site,x,power,stacked\n";
  for (std::size_t k = 0; k < traces.size(); ++k) {
    const double offset = offset_step * static_cast<double>(k);
    for (std::size_t i = 0; i < traces[k].size(); ++i) {
      out << site_indices[k] << ',' << io::format_double(traces[k].x[i]) << ','
          << io::format_double(traces[k].power[i]) << ','
          << io::format_double(traces[k].power[i] + offset) << '\n';
    }
  }
  io::write_file_atomic(path, out.str());
}

}  // namespace fpcav::arraysim
