#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "fpcav/arraysim.hpp"
#include "fpcav/errors.hpp"
#include "fpcav/fitkit.hpp"
#include "fpcav/spectrum.hpp"
#include "generators.hpp"
#include "oracles.hpp"

using namespace fpcav;
using namespace fpcav::arraysim;

namespace {

const ArrayLayout kLayout{};

double laser() { return oracle::c / 780e-9; }

std::vector<SiteRealization> aligned_row(std::uint64_t seed, double jitter, AlignmentState* out = nullptr,
                                         const SiteDesign& design = {}) {
  const auto row = row_sites(sample_array(kLayout, design, jitter, 1.0, seed), 0);
  const auto a = tilt_align(row, 42.9e-6, kLayout.pitch);
  if (out) *out = a;
  return row;
}

// Fundamental dips: those deeper than a fraction of the deepest, each refined
// by a single-Lorentzian fit in its own window.
std::vector<fitkit::LorentzPeak> fundamental_dips(const ReflectionTrace& trace, double relative_depth) {
  auto dips = fitkit::find_dips(trace);
  std::vector<fitkit::LorentzPeak> out;
  if (dips.empty()) return out;
  const double deepest = dips.front().depth;
  for (const auto& d : dips) {
    if (d.depth < relative_depth * deepest) continue;
    const auto w = trace.window(d.center - 8 * d.half_width, d.center + 8 * d.half_width);
    out.push_back(fitkit::fit_lorentzians(w, 1).model.peaks.front());
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.center < b.center; });
  return out;
}

}  // namespace

TEST_CASE("layout and sampling invariants") {
  CHECK_THROWS_AS((ArrayLayout{0, 4, 250e-6, 1e-3}.validate()), InvalidArgument);
  CHECK_THROWS_AS(sample_array(kLayout, {}, -1.0, 0.9, 1), InvalidArgument);
  CHECK_THROWS_AS(sample_array(kLayout, {}, 0.0, 0.0, 1), InvalidArgument);

  const auto sites = sample_array(kLayout, {}, 0.0, 1.0, 1);
  CHECK(sites.size() == 48);
  for (std::size_t i = 0; i < sites.size(); ++i) {
    CHECK(sites[i].index == static_cast<int>(i));
    CHECK(sites[i].core_offset.x == 0.0);
    CHECK(sites[i].core_offset.y == 0.0);
    CHECK(sites[i].functional);
  }
  CHECK(row_sites(sites, 2).front().index == 24);
}

TEST_CASE("per-axis jitter statistics") {
  ArrayLayout big{100, 100, 250e-6, 1e-3};
  const auto sites = sample_array(big, {}, 500e-9, 1.0, 5);
  std::vector<double> xs, ys;
  for (const auto& s : sites) {
    xs.push_back(s.core_offset.x);
    ys.push_back(s.core_offset.y);
  }
  CHECK(std::sqrt(oracle::variance(xs)) == doctest::Approx(500e-9).epsilon(0.02));
  CHECK(std::sqrt(oracle::variance(ys)) == doctest::Approx(500e-9).epsilon(0.02));

  SiteDesign radial;
  radial.jitter_model = JitterModel::radial;
  double r2 = 0.0;
  const auto rs = sample_array(big, radial, 500e-9, 1.0, 5);
  for (const auto& s : rs) r2 += s.core_offset.x * s.core_offset.x + s.core_offset.y * s.core_offset.y;
  CHECK(std::sqrt(r2 / rs.size()) == doctest::Approx(500e-9).epsilon(0.02));
}

TEST_CASE("binomial yield") {
  const auto st = yield_statistics(kLayout, {}, 0.9, 1000, 100);
  CHECK(st.mean_functional == doctest::Approx(43.2).epsilon(0.5 / 43.2));
  CHECK(st.stddev_functional == doctest::Approx(std::sqrt(48 * 0.9 * 0.1)).epsilon(0.1));
}

TEST_CASE("sampling is deterministic and order independent") {
  const auto a = sample_array(kLayout, {}, 500e-9, 0.9, 42);
  const auto b = sample_array(kLayout, {}, 500e-9, 0.9, 42);
  ArrayLayout wider = kLayout;
  wider.rows = 6;
  const auto c = sample_array(wider, {}, 500e-9, 0.9, 42);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].core_offset.x == b[i].core_offset.x);
    CHECK(a[i].height_offset == b[i].height_offset);
    CHECK(a[i].functional == b[i].functional);
    CHECK(a[i].core_offset.y == c[i].core_offset.y);
  }
}

TEST_CASE("tilt alignment geometry") {
  SUBCASE("no disorder") {
    SiteDesign flat;
    flat.length_disorder_rms = 0.0;
    const auto row = row_sites(sample_array(kLayout, flat, 0.0, 1.0, 1), 0);
    const auto a = tilt_align(row, 42.9e-6, kLayout.pitch);
    CHECK(a.tilt == 0.0);
    for (const auto& s : row) {
      CHECK(aligned_length(s, a, kLayout.pitch) == doctest::Approx(42.9e-6).epsilon(1e-12));
    }
  }
  SUBCASE("100 nm end mismatch over eleven pitches") {
    SiteDesign flat;
    flat.length_disorder_rms = 0.0;
    auto row = row_sites(sample_array(kLayout, flat, 0.0, 1.0, 1), 0);
    row.back().height_offset = -100e-9;
    const auto a = tilt_align(row, 42.9e-6, kLayout.pitch);
    CHECK(a.tilt == doctest::Approx(100e-9 / (11 * 250e-6)).epsilon(0.01));
    CHECK(a.tilt == doctest::Approx(3.6e-5).epsilon(0.02));
  }
  SUBCASE("end sites within tolerance over seeded trials") {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      const auto row = row_sites(sample_array(kLayout, {}, 500e-9, 1.0, seed), 0);
      const auto a = tilt_align(row, 42.9e-6, kLayout.pitch);
      CHECK(std::abs(aligned_length(row.front(), a, kLayout.pitch) - 42.9e-6) <= 3.7e-9);
      CHECK(std::abs(aligned_length(row.back(), a, kLayout.pitch) - 42.9e-6) <= 3.7e-9);
      // Intermediate sites follow the tilt plus their own height disorder.
      const auto& mid = row[5];
      CHECK(aligned_length(mid, a, kLayout.pitch) ==
            doctest::Approx(a.global_gap + mid.height_offset + a.tilt * 5 * kLayout.pitch).epsilon(1e-15));
    }
  }
  SUBCASE("failures") {
    auto row = row_sites(sample_array(kLayout, {}, 0.0, 1.0, 1), 0);
    row.front().functional = false;
    CHECK_THROWS_AS(tilt_align(row, 42.9e-6, kLayout.pitch), InvalidArgument);
    row.front().functional = true;
    row.back().height_offset = 50e-6;
    CHECK_THROWS_AS(tilt_align(row, 42.9e-6, kLayout.pitch), Infeasible);
  }
}

TEST_CASE("tune_site lands on resonance") {
  SUBCASE("already resonant") {
    SiteDesign d;
    d.length_disorder_rms = 0.0;
    d.geometry.length = 110 * 780e-9 / 2.0;
    const auto row = row_sites(sample_array(kLayout, d, 0.0, 1.0, 1), 0);
    const auto t = tune_site(row[0], laser());
    // Deflection goes as V^2, so rounding in the resonance condition shows up
    // as microvolts but not as motion.
    CHECK(t.voltage < 1e-3);
    CHECK(t.deflection < 1e-15);
    CHECK(std::abs(t.residual_detuning) < 1e6);
  }
  SUBCASE("replay through the forward model") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      AlignmentState a;
      const auto row = apply_alignment(aligned_row(seed, 500e-9, &a), a, kLayout.pitch);
      for (const auto& site : row) {
        const auto t = tune_site(site, laser());
        CHECK(t.deflection < 390e-9 + 1e-12);
        const double d = electromech::static_deflection(t.voltage, site.actuator);
        const double resonance = resonance_frequency(site, t.longitudinal_order, d);
        const double linewidth_hz = site.optics.half_linewidth / (2 * oracle::pi);
        CHECK(std::abs(resonance - laser()) < linewidth_hz / 100.0);
        // Round-trip phase at the laser frequency is a multiple of 2 pi.
        const double q = 2.0 * (site.optics.geometry.length - d) / (oracle::c / laser());
        CHECK(std::abs(q - std::round(q)) < 1e-6);
      }
    }
  }
  SUBCASE("dead and pull-in limited sites") {
    auto site = aligned_row(1, 0.0).front();
    site.functional = false;
    CHECK_THROWS_AS(tune_site(site, laser()), DeadSite);
    site.functional = true;
    site.actuator.gap = 0.6e-6;  // pull-in at 200 nm
    site.optics.geometry.length = 110 * 780e-9 / 2.0 + 300e-9;
    CHECK_THROWS_AS(tune_site(site, laser()), PullInLimited);
  }
}

TEST_CASE("tune_all over a row") {
  SUBCASE("nominal row: all tuned with high visibility") {
    AlignmentState a;
    const auto row = aligned_row(3, 0.0, &a);
    const auto r = tune_all(row, a, kLayout.pitch, laser());
    CHECK(r.tuned == 12);
    CHECK(r.visibility_min > 0.85);
  }
  SUBCASE("zero jitter and disorder gives identical sites") {
    SiteDesign d;
    d.length_disorder_rms = 0.0;
    const auto row = row_sites(sample_array(kLayout, d, 0.0, 1.0, 9), 0);
    const auto a = tilt_align(row, 42.9e-6, kLayout.pitch);
    const auto r = tune_all(row, a, kLayout.pitch, laser());
    for (const auto& t : r.sites) {
      CHECK(t.voltage == r.sites[0].voltage);
      CHECK(t.visibility == r.sites[0].visibility);
    }
  }
  SUBCASE("dead sites are reported, not thrown") {
    auto row = aligned_row(4, 500e-9);
    row[3].functional = false;
    const auto a = tilt_align(row, 42.9e-6, kLayout.pitch);
    const auto r = tune_all(row, a, kLayout.pitch, laser());
    CHECK(r.dead == 1);
    CHECK(r.tuned == 11);
    CHECK(r.sites[3].status == SiteStatus::dead);
  }
  SUBCASE("core jitter spreads the visibility") {
    // A site stays above 0.8 visibility while its core offset r satisfies
    // r < r_max. With r^2 exponential of mean 2 sigma^2, a row of 12 stays in
    // band with probability (1 - exp(-r_max^2 / (2 sigma^2)))^12.
    SiteDesign probe_design;
    auto vis_at = [&](double r) {
      optics::FibreSpec f = probe_design.fibre;
      f.core_offset = {r, 0.0};
      return optics::visibility(optics::make_optics(probe_design.geometry, f, probe_design.micro_mirror));
    };
    double lo = 0.0, hi = 5e-6;
    for (int i = 0; i < 100; ++i) {
      const double mid = 0.5 * (lo + hi);
      (vis_at(mid) >= 0.8 ? lo : hi) = mid;
    }
    const double r_max2 = lo * lo;

    for (const auto model : {JitterModel::per_axis, JitterModel::radial}) {
      SiteDesign design;
      design.jitter_model = model;
      const double sigma = model == JitterModel::radial ? 500e-9 / std::sqrt(2.0) : 500e-9;
      const double p_row = std::pow(1.0 - std::exp(-r_max2 / (2.0 * sigma * sigma)), 12);
      const int n = 100;
      int in_band = 0;
      for (std::uint64_t seed = 0; seed < static_cast<std::uint64_t>(n); ++seed) {
        AlignmentState a;
        const auto row = aligned_row(seed, 500e-9, &a, design);
        const auto r = tune_all(row, a, kLayout.pitch, laser());
        std::vector<double> v;
        for (const auto& t : r.sites) v.push_back(t.visibility);
        CHECK(oracle::variance(v) > 0.0);
        if (r.visibility_min >= 0.8 && r.visibility_min <= 1.0) ++in_band;
      }
      const double sd = std::sqrt(n * p_row * (1.0 - p_row));
      INFO("model ", to_string(model), ": in band ", in_band, " of ", n, ", expected ", n * p_row);
      CHECK(std::abs(in_band - n * p_row) <= 3.0 * sd + 1.0);
    }
  }
  SUBCASE("deterministic") {
    AlignmentState a;
    const auto row = aligned_row(17, 500e-9, &a);
    const auto r1 = tune_all(row, a, kLayout.pitch, laser());
    const auto r2 = tune_all(row, a, kLayout.pitch, laser());
    CHECK(array_report_json(row, a, r1) == array_report_json(row, a, r2));
  }
}

TEST_CASE("voltage ramp scan morphology") {
  SiteDesign d;
  d.length_disorder_rms = 0.0;
  const double half = 780e-9 / 2.0;
  d.geometry.length = std::round(42.9e-6 / half) * half + 100e-9;
  const auto site = row_sites(sample_array(kLayout, d, 0.0, 1.0, 1), 0).front();
  const double v_end = electromech::voltage_for_deflection(600e-9, site.actuator);
  const auto tr = scan_site(site, 0.0, v_end, 6001);
  CHECK(tr.kind == AbscissaKind::voltage);

  const auto dips = fundamental_dips(tr, 0.5);
  REQUIRE(dips.size() == 2);
  CHECK(dips[1].half_width < dips[0].half_width);

  // Minima reproduce the analytic visibility when only the fundamental is rendered.
  const auto bare = scan_site(site, 0.0, v_end, 60001, {false, 0.0});
  const double pmin = *std::min_element(bare.power.begin(), bare.power.end());
  CHECK(pmin == doctest::Approx(1.0 - optics::visibility(site.optics)).epsilon(1e-4));

  CHECK_THROWS_AS(scan_site(site, 0.0, 1.01 * electromech::pull_in(site.actuator).voltage, 10),
                  PullInExceeded);
}
