#pragma once

// Detuning and field scans of the oscillation extrema, and detuning
// optimization.

#include <optional>
#include <vector>

#include "qmem/populations.hpp"

namespace qmem {

enum class ScanVariable { Detuning, Field };

struct ScanRange {
  double lo = 0.0;
  double hi = 1.0;
  int n_points = 2;

  void validate() const;
  double at(int i) const noexcept;
};

struct ScanSpec {
  ScanVariable variable = ScanVariable::Detuning;
  ScanRange range;
  PumpState pump;
  SelectivityModel selectivity;
  double b_gauss = 1.0;          // held fixed in a detuning scan
  double amplitude_scale = 1.0;  // A0
  // Extrema window in time; one full oscillation period (in phase) when absent.
  std::optional<TimeWindow> window;
  PhysicalConstants constants;
  unsigned threads = 0;  // 0: hardware concurrency
};

struct ScanRow {
  double x = 0.0;
  double a_max = 0.0;
  double a_min = 0.0;
  double r = 0.0;
};

// Row for a single scanned value; pure, so rows may be evaluated in any order.
ScanRow scan_point(const ScanSpec& spec, double x);

// Grid points evaluated concurrently, rows returned in grid order.
std::vector<ScanRow> scan_detuning(const ScanSpec& spec);
// Delta follows the m = 3 Zeeman shift 2 * 3 * f_L(B) at every field.
std::vector<ScanRow> scan_field(const ScanSpec& spec);

enum class DetuningObjective { MinimizeR, MaximizeAmax };

struct DetuningOptimum {
  double delta_mhz = 0.0;
  double value = 0.0;
  bool flat = false;  // objective constant over the grid
  // MinimizeR: smallest grid detuning within 1% of the grid infimum.
  double plateau_onset_mhz = 0.0;
};

// Grid search over [-2, Delta_sw(3) + 5 * width] MHz in 0.05 MHz steps,
// golden-section refinement to 1e-3 MHz around the best grid point.
DetuningOptimum optimize_detuning(double b_gauss, const PumpState& pump,
                                  const SelectivityModel& selectivity,
                                  DetuningObjective objective,
                                  const PhysicalConstants& consts = {});

}  // namespace qmem
