#include "qmem/scan.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <thread>

#include "qmem/errors.hpp"
#include "qmem/numerics.hpp"

namespace qmem {
namespace {

constexpr double kGridStep = 0.05;      // MHz
constexpr double kRefineTol = 1e-3;     // MHz
constexpr double kGridLow = -2.0;       // MHz
constexpr double kWidthsAboveShift = 5.0;
constexpr double kPlateauFraction = 0.01;
constexpr double kFlatTolerance = 1e-9;

struct Setting {
  double b_gauss;
  double detuning_mhz;
};

Setting setting_for(const ScanSpec& spec, double x) {
  switch (spec.variable) {
    case ScanVariable::Detuning:
      return {spec.b_gauss, x};
    case ScanVariable::Field:
      if (!(x >= 0.0)) throw DomainError("field scan values must be non-negative");
      return {x, spin_wave_detuning(3, 3, x, spec.constants)};
  }
  return {spec.b_gauss, x};
}

ScanRow evaluate(const DiagonalCoherences& base, const SelectivityModel& sel_base,
                 double b_gauss, double detuning, double a0,
                 const std::optional<TimeWindow>& window, const PhysicalConstants& consts) {
  SelectivityModel sel = sel_base;
  sel.detuning_mhz = detuning;
  const auto p = apply_detuning_selectivity(base, sel, b_gauss, consts);
  const double eta = storage_efficiency(base, sel, b_gauss, consts);
  const double scale = a0 * eta * eta;

  Extrema e;
  if (window) {
    auto params = ModelParams::sigma_plus(p, b_gauss, DecayEnvelope::none(), scale);
    params.constants = consts;
    e = oscillation_extrema(params, *window);
  } else {
    e = interference_extrema(PhaseSpectrum::of(p));
    e.a_max *= scale;
    e.a_min *= scale;
  }
  ScanRow row;
  row.a_max = e.a_max;
  row.a_min = std::min(e.a_min, e.a_max);
  row.r = row.a_max > 0.0 ? (row.a_max - row.a_min) / row.a_max : 0.0;
  return row;
}

std::vector<ScanRow> run_scan(const ScanSpec& spec, ScanVariable expected) {
  if (spec.variable != expected) throw ValidationError("scan variable does not match the scan");
  spec.range.validate();
  spec.pump.validate();
  spec.selectivity.validate();
  const auto n = static_cast<std::size_t>(spec.range.n_points);
  std::vector<ScanRow> rows(n);
  unsigned threads = spec.threads != 0 ? spec.threads : std::thread::hardware_concurrency();
  threads = std::clamp<unsigned>(threads, 1, static_cast<unsigned>(n));

  // Each worker writes only its own strided slots.
  std::vector<std::exception_ptr> errors(threads);
  const auto work = [&](unsigned id) {
    try {
      for (std::size_t i = id; i < n; i += threads) {
        rows[i] = scan_point(spec, spec.range.at(static_cast<int>(i)));
      }
    } catch (...) {
      errors[id] = std::current_exception();
    }
  };
  if (threads == 1) {
    work(0);
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (unsigned id = 0; id < threads; ++id) pool.emplace_back(work, id);
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return rows;
}

}  // namespace

void ScanRange::validate() const {
  if (!(lo < hi) || n_points < 2) throw ValidationError("scan range needs lo < hi and n >= 2");
}

double ScanRange::at(int i) const noexcept {
  if (i == n_points - 1) return hi;
  return lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n_points - 1);
}

ScanRow scan_point(const ScanSpec& spec, double x) {
  const auto base = pump_distribution(spec.pump);
  const Setting s = setting_for(spec, x);
  ScanRow row = evaluate(base, spec.selectivity, s.b_gauss, s.detuning_mhz,
                         spec.amplitude_scale, spec.window, spec.constants);
  row.x = x;
  return row;
}

std::vector<ScanRow> scan_detuning(const ScanSpec& spec) {
  return run_scan(spec, ScanVariable::Detuning);
}

std::vector<ScanRow> scan_field(const ScanSpec& spec) { return run_scan(spec, ScanVariable::Field); }

DetuningOptimum optimize_detuning(double b_gauss, const PumpState& pump,
                                  const SelectivityModel& selectivity,
                                  DetuningObjective objective, const PhysicalConstants& consts) {
  const auto base = pump_distribution(pump);
  selectivity.validate();
  const double hi =
      spin_wave_detuning(3, 3, b_gauss, consts) + kWidthsAboveShift * selectivity.eit_width_mhz;
  const int n = static_cast<int>(std::floor((hi - kGridLow) / kGridStep + 1e-9)) + 1;

  // Minimized internally: R, or -a_max.
  const auto cost = [&](double delta) {
    const ScanRow row = evaluate(base, selectivity, b_gauss, delta, 1.0, std::nullopt, consts);
    return objective == DetuningObjective::MinimizeR ? row.r : -row.a_max;
  };

  std::vector<double> grid(static_cast<std::size_t>(n));
  std::vector<double> values(grid.size());
  for (int i = 0; i < n; ++i) {
    grid[static_cast<std::size_t>(i)] = kGridLow + kGridStep * i;
    values[static_cast<std::size_t>(i)] = cost(grid[static_cast<std::size_t>(i)]);
  }
  const auto [min_it, max_it] = std::minmax_element(values.begin(), values.end());
  const auto best = static_cast<std::size_t>(min_it - values.begin());
  const double spread = *max_it - *min_it;
  const double magnitude = std::max(std::abs(*max_it), std::abs(*min_it));

  DetuningOptimum out;
  out.flat = spread <= kFlatTolerance * std::max(magnitude, 1e-300);
  // Smallest grid detuning within 1% of the infimum.
  const double plateau_level = *min_it + kPlateauFraction * std::abs(*min_it);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (values[i] <= plateau_level) {
      out.plateau_onset_mhz = grid[i];
      break;
    }
  }
  if (out.flat) {
    out.delta_mhz = grid.front();
    out.value = values.front();
  } else {
    const double lo = grid[best > 0 ? best - 1 : 0];
    const double up = grid[std::min(best + 1, grid.size() - 1)];
    const auto refined = golden_section_minimize(cost, lo, up, kRefineTol);
    if (refined.value <= values[best]) {
      out.delta_mhz = refined.x;
      out.value = refined.value;
    } else {
      out.delta_mhz = grid[best];
      out.value = values[best];
    }
  }
  if (objective == DetuningObjective::MaximizeAmax) out.value = -out.value;
  return out;
}

}  // namespace qmem
