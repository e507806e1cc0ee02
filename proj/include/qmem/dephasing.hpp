#pragma once

// Lifetime estimates for the two inhomogeneous dephasing mechanisms of a
// stored spin wave. Both produce a Gaussian envelope exp(-t^2/tau^2): a
// Gaussian spread of spin-wave phase with rms omega_rms * t averages to
// exp(-omega_rms^2 t^2 / 2), hence tau = sqrt(2) / omega_rms.

#include <numbers>

#include "qmem/zeeman.hpp"

namespace qmem {

inline constexpr double kBoltzmann = 1.380649e-23;  // J/K

struct CloudGeometry {
  double temperature_uk = 13.0;
  double rms_size_cm = 0.03;  // standard deviation of the density along the gradient
  double beam_angle_rad = 0.5 * std::numbers::pi / 180.0;
  double wavelength_nm = 852.0;

  void validate() const;
};

// Field gradient along the cloud: the m_f coherence precesses at 2 m_f g B(z),
// so the rms frequency spread is 2 |m_f| g * gradient * rms_size.
// Returns +infinity for zero gradient or m_f = 0.
double gradient_lifetime(double gradient_mg_per_cm, const CloudGeometry& cloud, int m_f,
                         const PhysicalConstants& consts = {});

// Inverse of gradient_lifetime. Returns 0 for an infinite lifetime.
double gradient_from_lifetime(double tau_us, const CloudGeometry& cloud, int m_f,
                              const PhysicalConstants& consts = {});

// Spin-wave wavenumber |k_sig - k_con| = (4 pi / lambda) sin(theta / 2), rad/m.
double spin_wave_wavenumber(const CloudGeometry& cloud);

// Thermal motion across the spin-wave grating: sigma_v = sqrt(k_B T / m).
// Returns +infinity for zero beam angle.
double motional_lifetime(const CloudGeometry& cloud, const PhysicalConstants& consts = {});

// Gaussian rates add in quadrature: 1/tau^2 = 1/tau_a^2 + 1/tau_b^2.
double combined_lifetime(double tau_a_us, double tau_b_us);

}  // namespace qmem
