#pragma once

// Maps the experimental knobs (optical-pumping quality, two-photon detuning of
// the control beam, field) onto effective diagonal coherence weights p_m.
//
// Each sigma+ Lambda system m stores with a resonance weight L(Delta - Delta_sw(m))
// centred on its Zeeman-shifted spin-wave frequency Delta_sw(m) = 2 m f_L.
// The coherence amplitude is q_m L(...); p_m is its normalized share and the
// storage efficiency scales with eta = sum_m q_m L(...).

#include "qmem/interference.hpp"

namespace qmem {

enum class RemainderPolicy {
  AllInNextLower,  // 1 - fraction on m = 2
  UniformBelow,    // 1 - fraction spread over m = -3..2
};

struct PumpState {
  double polarized_fraction = 0.8;
  RemainderPolicy remainder_policy = RemainderPolicy::AllInNextLower;

  void validate() const;
};

enum class LineShape { Lorentzian, Gaussian };

struct SelectivityModel {
  double eit_width_mhz = 2.0;  // FWHM of the two-photon storage resonance
  double detuning_mhz = 0.0;   // Delta = w_sig - w_con - w_0
  LineShape shape = LineShape::Lorentzian;

  void validate() const;
};

// Unit-peak resonance weight at offset x from line centre.
double resonance_weight(LineShape shape, double offset_mhz, double width_mhz);

DiagonalCoherences pump_distribution(const PumpState& pump);

// p_m proportional to q_m * L(Delta - Delta_sw(m, m, B)), renormalized.
DiagonalCoherences apply_detuning_selectivity(const DiagonalCoherences& base,
                                              const SelectivityModel& selectivity,
                                              double b_gauss,
                                              const PhysicalConstants& consts = {});

// eta = sum_m q_m L(Delta - Delta_sw(m)); retrieval scales as eta^2.
double storage_efficiency(const DiagonalCoherences& base,
                          const SelectivityModel& selectivity, double b_gauss,
                          const PhysicalConstants& consts = {});

// Relative oscillation amplitude R for the selected coherences: R = 4 p (1 - p)
// for two-component support, numerical extrema of the interference otherwise.
double predicted_relative_amplitude(const DiagonalCoherences& base,
                                    const SelectivityModel& selectivity, double b_gauss,
                                    const PhysicalConstants& consts = {});

// Relative amplitude of an arbitrary set of diagonal coherences.
double relative_amplitude_of(const DiagonalCoherences& coherences);

// Solves for the resonance width that makes predicted_relative_amplitude equal
// target_r at the given detuning and field. Throws NumericalError when the
// target is outside what any width can produce.
double calibrate_eit_width(const DiagonalCoherences& base, double b_gauss,
                           double detuning_mhz, double target_r,
                           LineShape shape = LineShape::Lorentzian,
                           const PhysicalConstants& consts = {});

}  // namespace qmem
