// Acceptance runner: one PASS/FAIL line per criterion, with the measured
// values and wall time. Exit status is non-zero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "property_suite.hpp"
#include "qmem/dephasing.hpp"
#include "qmem/estimation.hpp"
#include "qmem/interference.hpp"
#include "qmem/populations.hpp"
#include "qmem/scan.hpp"
#include "qmem/zeeman.hpp"

using namespace qmem;

namespace {

struct Verdict {
  bool ok = false;
  std::string detail;
};

struct Criterion {
  int id;
  std::string title;
  double budget_s;
  std::function<Verdict()> check;
};

template <class... Args>
std::string text(const Args&... args) {
  std::ostringstream os;
  os.precision(7);
  (os << ... << args);
  return os.str();
}

double rel_diff(double a, double b) {
  const double scale = std::max(std::abs(a), std::abs(b));
  return scale == 0.0 ? 0.0 : std::abs(a - b) / scale;
}

Verdict zeeman_anchors() {
  const double at1 = spin_wave_detuning(3, 3, 1.0);
  const double at26 = spin_wave_detuning(3, 3, 2.6);
  // 6 * 0.35 * B, exact in binary to the last ulp
  const bool ok = std::abs(at1 - 2.10) <= 4e-16 * 2.10 && std::abs(at26 - 5.46) <= 4e-16 * 5.46;
  return {ok, text("Δ_sw(1.0 G) = ", at1, " MHz, Δ_sw(2.6 G) = ", at26, " MHz")};
}

Verdict relative_amplitude_anchor() {
  const double p2 = invert_relative_amplitude(0.25).p2;
  const double r = relative_amplitude(0.07);
  const bool ok = std::abs(p2 - 0.06699) <= 1e-5 && std::abs(r - 0.2604) <= 1e-12;
  return {ok, text("p2(R=0.25) = ", p2, ", R(0.07) = ", r)};
}

Verdict revival_periodicity() {
  // sigma+ at 1 G, no envelope: the FFT peak sits at 2 f_L.
  const auto sp = ModelParams::sigma_plus(DiagonalCoherences::two_level(0.07), 1.0,
                                          DecayEnvelope::none(), 1.0);
  const auto curve = synthesize_curve(sp, uniform_grid(0.0, 100.0, 4000), NoiseSpec{});
  const auto peak = dominant_peak(curve);
  const double expected = 1.0 / (2.0 * 0.35);
  const double period = 1.0 / peak.frequency_mhz;
  const bool fft_ok = std::abs(peak.frequency_mhz - 2.0 * 0.35) <= peak.bin_width_mhz;

  // Unpolarized, uniform matrix at 161 mG: local maxima on a fine grid.
  const auto un = ModelParams::unpolarized(CoherenceMatrix::uniform_allowed(), 0.161,
                                           DecayEnvelope::none(), 1.0);
  constexpr double kStep = 1e-3;
  std::vector<double> peaks;
  double prev2 = retrieval(kStep, un);  // A(-t) = A(t) without an envelope
  double prev = retrieval(0.0, un);
  for (int i = 1; i <= 60000; ++i) {
    const double cur = retrieval(i * kStep, un);
    if (prev > prev2 && prev >= cur && prev > 0.5) peaks.push_back((i - 1) * kStep);
    prev2 = prev;
    prev = cur;
  }
  bool spacing_ok = peaks.size() >= 3;
  double worst = 0.0;
  for (std::size_t i = 1; i < peaks.size(); ++i) {
    const double d = peaks[i] - peaks[i - 1];
    worst = std::max(worst, std::abs(d - 17.75));
    spacing_ok = spacing_ok && std::abs(d - 17.75) <= 0.05;
  }
  return {fft_ok && spacing_ok,
          text("FFT period ", period, " µs (expected ", expected, ", bin ", peak.bin_width_mhz,
               " MHz); ", peaks.size(), " revivals at 161 mG, worst spacing error ", worst, " µs")};
}

Verdict reduction_chain() {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const double p2 = unit(rng);
    const double b = 5.0 * unit(rng);
    const double a0 = 0.1 + 9.9 * unit(rng);
    const auto env = DecayEnvelope::gaussian(10.0 + 990.0 * unit(rng));
    const double t = 2000.0 * unit(rng);
    const auto diag = DiagonalCoherences::two_level(p2);
    const double general = retrieval_general(
        t, ModelParams::unpolarized(CoherenceMatrix::from_diagonal(diag), b, env, a0));
    const double sigma_plus = retrieval_sigma_plus(t, ModelParams::sigma_plus(diag, b, env, a0));
    const double closed = retrieval_two_level(t, p2, b, env, a0);
    worst = std::max({worst, rel_diff(general, sigma_plus), rel_diff(sigma_plus, closed),
                      rel_diff(general, closed)});
  }
  return {worst <= 1e-12, text("worst relative disagreement ", worst, " over 100 draws")};
}

Verdict fit_round_trip() {
  const auto truth = ModelParams::two_level(0.07, 1.0, DecayEnvelope::gaussian(440.0), 1.0);
  const auto grid = uniform_grid(0.0, 1000.0, 2000);
  int good = 0;
  int errors = 0;
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    const auto curve = synthesize_curve(truth, grid, NoiseSpec::snr(20.0, seed));
    try {
      const auto fit = fit_curve(curve, Scheme::TwoLevel);
      const bool b_ok = std::abs(fit.estimate("B_gauss") - 1.0) <= 0.005;
      const bool tau_ok = std::abs(fit.estimate("tau_us") - 440.0) <= 0.05 * 440.0;
      const bool p2_ok = std::abs(fit.estimate("p2") - 0.07) <= 0.01;
      if (b_ok && tau_ok && p2_ok) ++good;
    } catch (const std::exception&) {
      ++errors;
    }
  }
  return {good >= 45, text(good, "/50 seeds within tolerance (", errors, " threw)")};
}

Verdict stray_field() {
  const auto truth = ModelParams::unpolarized(CoherenceMatrix::uniform_allowed(), 0.003,
                                              DecayEnvelope::gaussian(44.0), 1.0);
  const auto grid = uniform_grid(0.0, 200.0, 400);
  int good = 0;
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto curve = synthesize_curve(truth, grid, NoiseSpec::snr(20.0, seed));
    try {
      const double b = estimate_stray_field(curve).b_gauss;
      const double err = std::abs(b - 0.003) / 0.003;
      worst = std::max(worst, err);
      if (err <= 0.15) ++good;
    } catch (const std::exception&) {
      worst = INFINITY;
    }
  }
  return {good == 20, text(good, "/20 seeds within 15%, worst relative error ", worst)};
}

Verdict detuning_scan_shape() {
  const PumpState pump{0.8, RemainderPolicy::AllInNextLower};
  const auto base = pump_distribution(pump);
  const double w = calibrate_eit_width(base, 2.6, 6.5, 0.25);

  const auto scan = [&](double b, double lo, double hi) {
    ScanSpec spec;
    spec.variable = ScanVariable::Detuning;
    spec.pump = pump;
    spec.selectivity = {w, 0.0, LineShape::Lorentzian};
    spec.b_gauss = b;
    const int n = static_cast<int>(std::floor((hi - lo) / 0.05 + 1e-9)) + 1;
    spec.range = {lo, lo + 0.05 * (n - 1), n};
    return scan_detuning(spec);
  };

  // 0.2 G: R should not depend on the detuning.
  const auto low = scan(0.2, -2.0, spin_wave_detuning(3, 3, 0.2) + 5.0 * w);
  const auto [rmin, rmax] = std::minmax_element(
      low.begin(), low.end(), [](const ScanRow& a, const ScanRow& b) { return a.r < b.r; });
  const double variation = (rmax->r - rmin->r) / rmax->r;
  const bool flat_ok = variation < 0.01;

  // 2.6 G: non-increasing from the m=3 line outward, ending on a positive plateau.
  const double shift = spin_wave_detuning(3, 3, 2.6);
  const auto high = scan(2.6, shift, shift + 5.0 * w);
  bool monotone = true;
  double first_rise = NAN;
  for (std::size_t i = 1; i < high.size(); ++i) {
    if (high[i].r > high[i - 1].r) {
      monotone = false;
      first_rise = high[i - 1].x;
      break;
    }
  }
  const bool plateau = high.back().r > 0.0;
  ScanSpec at;
  at.pump = pump;
  at.selectivity = {w, 0.0, LineShape::Lorentzian};
  at.b_gauss = 2.6;
  const double r65 = scan_point(at, 6.5).r;
  const bool anchor = std::abs(r65 - 0.25) <= 1e-3;

  std::string detail = text("w = ", w, " MHz; 0.2 G relative r variation ", variation,
                            "; 2.6 G ", monotone ? "non-increasing" : "rises", " over [", shift,
                            ", ", high.back().x, "] MHz");
  if (!monotone) detail += text(" (first rise after ", first_rise, " MHz)");
  detail += text(", plateau r = ", high.back().r, "; r(6.5) = ", r65);
  return {flat_ok && monotone && plateau && anchor, detail};
}

Verdict dephasing_estimators() {
  const CloudGeometry cloud;
  const double motional = motional_lifetime(cloud);
  double g_lo = INFINITY;
  double g_hi = 0.0;
  for (double size : {0.02, 0.03, 0.04, 0.05}) {
    CloudGeometry c = cloud;
    c.rms_size_cm = size;
    const double g = gradient_from_lifetime(440.0, c, 3);
    g_lo = std::min(g_lo, g);
    g_hi = std::max(g_hi, g);
  }
  const bool ok = motional >= 350.0 && motional <= 1050.0 && g_lo >= 3.5 && g_hi <= 14.0;
  return {ok, text("motional tau ", motional, " µs; gradient ", g_lo, " to ", g_hi,
                   " mG/cm for rms size 0.02 to 0.05 cm")};
}

Verdict property_suite() {
  int failed = 0;
  std::string failures;
  for (const auto& property : props::all_properties()) {
    const auto outcome = props::run_property(property);
    std::printf("    %-4s %s: %s (%d cases, %.2f s)\n", outcome.passed() ? "ok" : "FAIL",
                outcome.module.c_str(), outcome.name.c_str(), outcome.cases, outcome.seconds);
    if (!outcome.passed()) {
      ++failed;
      std::printf("         %d failures; first: %s\n", outcome.failures,
                  outcome.first_failure.c_str());
      failures += (failures.empty() ? "" : "; ") + outcome.name;
    }
  }
  std::fflush(stdout);
  return {failed == 0, failed == 0 ? text(props::all_properties().size(), " properties hold")
                                   : text(failed, " failing: ", failures)};
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {1, "Zeeman shift anchors", 1e-3, zeeman_anchors},
      {2, "relative amplitude anchor", 1e-3, relative_amplitude_anchor},
      {3, "revival periodicity", 1.0, revival_periodicity},
      {4, "reduction-chain equivalence", 1.0, reduction_chain},
      {5, "fit round-trip", 60.0, fit_round_trip},
      {6, "stray-field estimation", 30.0, stray_field},
      {7, "detuning-scan shape", 10.0, detuning_scan_shape},
      {8, "dephasing estimators", 1e-3, dephasing_estimators},
      {9, "property suite", 120.0, property_suite},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.check();
    } catch (const std::exception& e) {
      v = {false, text("threw: ", e.what())};
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = seconds <= c.budget_s;
    const bool pass = v.ok && in_time;
    if (!pass) ++failures;
    std::printf("%s criterion %d (%s): %s [%.3g s of %.3g s%s]\n", pass ? "PASS" : "FAIL", c.id,
                c.title.c_str(), v.detail.c_str(), seconds, c.budget_s,
                in_time ? "" : ", over budget");
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
