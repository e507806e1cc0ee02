#include "qmem/populations.hpp"

#include <boost/math/tools/roots.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "qmem/errors.hpp"

namespace qmem {

void PumpState::validate() const {
  if (!(polarized_fraction >= 0.0 && polarized_fraction <= 1.0)) {
    throw ValidationError("pump polarized fraction must lie in [0, 1]");
  }
}

void SelectivityModel::validate() const {
  if (!(eit_width_mhz > 0.0) || !std::isfinite(eit_width_mhz)) {
    throw ValidationError("EIT width must be finite and > 0");
  }
  if (!std::isfinite(detuning_mhz)) throw ValidationError("detuning must be finite");
}

double resonance_weight(LineShape shape, double offset_mhz, double width_mhz) {
  const double x = 2.0 * offset_mhz / width_mhz;  // offset in half-widths
  switch (shape) {
    case LineShape::Lorentzian:
      return 1.0 / (1.0 + x * x);
    case LineShape::Gaussian:
      return std::exp(-std::log(2.0) * x * x);
  }
  return 0.0;
}

DiagonalCoherences pump_distribution(const PumpState& pump) {
  pump.validate();
  DiagonalCoherences::Weights q{};
  const double rest = 1.0 - pump.polarized_fraction;
  q[DiagonalCoherences::index(3)] = pump.polarized_fraction;
  switch (pump.remainder_policy) {
    case RemainderPolicy::AllInNextLower:
      q[DiagonalCoherences::index(2)] = rest;
      break;
    case RemainderPolicy::UniformBelow:
      for (int m = -3; m <= 2; ++m) q[DiagonalCoherences::index(m)] = rest / 6.0;
      break;
  }
  return DiagonalCoherences::normalized(q);
}

namespace {

DiagonalCoherences::Weights selected_weights(const DiagonalCoherences& base,
                                             const SelectivityModel& sel, double b_gauss,
                                             const PhysicalConstants& consts) {
  sel.validate();
  DiagonalCoherences::Weights w{};
  for (int m = -DiagonalCoherences::kMaxM; m <= DiagonalCoherences::kMaxM; ++m) {
    const double q = base.at(m);
    if (q == 0.0) continue;
    const double offset = sel.detuning_mhz - spin_wave_detuning(m, m, b_gauss, consts);
    w[DiagonalCoherences::index(m)] = q * resonance_weight(sel.shape, offset, sel.eit_width_mhz);
  }
  return w;
}

}  // namespace

DiagonalCoherences apply_detuning_selectivity(const DiagonalCoherences& base,
                                              const SelectivityModel& selectivity,
                                              double b_gauss, const PhysicalConstants& consts) {
  const auto w = selected_weights(base, selectivity, b_gauss, consts);
  double sum = 0.0;
  for (double v : w) sum += v;
  if (!(sum > 0.0)) {
    throw NumericalError("selectivity suppressed every coherence (all weights zero)");
  }
  return DiagonalCoherences::normalized(w);
}

double storage_efficiency(const DiagonalCoherences& base, const SelectivityModel& selectivity,
                          double b_gauss, const PhysicalConstants& consts) {
  double sum = 0.0;
  for (double v : selected_weights(base, selectivity, b_gauss, consts)) sum += v;
  return sum;
}

double relative_amplitude_of(const DiagonalCoherences& coherences) {
  if (coherences.support_size() <= 1) return 0.0;
  if (coherences.support_size() == 2) {
    // Any two lines interfere as p_a^2 + p_b^2 + 2 p_a p_b cos(...).
    double smaller = 1.0;
    for (double v : coherences.weights()) {
      if (v > 0.0) smaller = std::min(smaller, v);
    }
    return relative_amplitude(std::min(smaller, 1.0));
  }
  return interference_extrema(PhaseSpectrum::of(coherences)).relative_amplitude();
}

double predicted_relative_amplitude(const DiagonalCoherences& base,
                                    const SelectivityModel& selectivity, double b_gauss,
                                    const PhysicalConstants& consts) {
  return relative_amplitude_of(apply_detuning_selectivity(base, selectivity, b_gauss, consts));
}

double calibrate_eit_width(const DiagonalCoherences& base, double b_gauss, double detuning_mhz,
                           double target_r, LineShape shape, const PhysicalConstants& consts) {
  if (!(target_r >= 0.0 && target_r <= 1.0)) {
    throw DomainError("target relative amplitude must lie in [0, 1]");
  }
  const auto residual = [&](double log_width) {
    SelectivityModel sel{std::exp(log_width), detuning_mhz, shape};
    return predicted_relative_amplitude(base, sel, b_gauss, consts) - target_r;
  };
  // R is monotone in the width for two-component pumps: narrow resonances
  // favour the line nearer to Delta, wide ones return the pumped shares.
  double lo = std::log(1e-3);
  double hi = std::log(1e3);
  // Narrow Gaussian resonances can underflow every weight; widen until defined.
  for (;;) {
    try {
      residual(lo);
      break;
    } catch (const NumericalError&) {
      lo += std::log(2.0);
      if (lo >= hi) throw;
    }
  }
  const double r_lo = residual(lo);
  const double r_hi = residual(hi);
  if (r_lo == 0.0) return std::exp(lo);
  if (r_hi == 0.0) return std::exp(hi);
  if ((r_lo > 0.0) == (r_hi > 0.0)) {
    throw NumericalError("no resonance width reproduces the requested relative amplitude");
  }
  std::uintmax_t max_iter = 200;
  const auto [a, b] = boost::math::tools::toms748_solve(
      residual, lo, hi, r_lo, r_hi, boost::math::tools::eps_tolerance<double>(50), max_iter);
  return std::exp(0.5 * (a + b));
}

}  // namespace qmem
