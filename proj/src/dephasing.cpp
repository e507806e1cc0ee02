#include "qmem/dephasing.hpp"

#include <cmath>
#include <limits>

#include "qmem/errors.hpp"

namespace qmem {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Gaussian phase spread with rms rate omega: <exp(i phi)> = exp(-omega^2 t^2 / 2).
double lifetime_from_rms_rate(double omega_rms_per_us) {
  return omega_rms_per_us > 0.0 ? std::sqrt(2.0) / omega_rms_per_us : kInf;
}

}  // namespace

void CloudGeometry::validate() const {
  if (!(temperature_uk > 0.0) || !(rms_size_cm > 0.0) || !(wavelength_nm > 0.0) ||
      !(beam_angle_rad >= 0.0)) {
    throw ValidationError("cloud temperature, size and wavelength must be > 0, angle >= 0");
  }
}

double gradient_lifetime(double gradient_mg_per_cm, const CloudGeometry& cloud, int m_f,
                         const PhysicalConstants& consts) {
  cloud.validate();
  if (!(gradient_mg_per_cm >= 0.0)) throw DomainError("field gradient must be non-negative");
  // rms spin-wave frequency spread in MHz (gradient converted to G/cm)
  const double spread_mhz = 2.0 * std::abs(m_f) * consts.g_factor_mhz_per_gauss *
                            (gradient_mg_per_cm * 1e-3) * cloud.rms_size_cm;
  return lifetime_from_rms_rate(kTwoPi * spread_mhz);
}

double gradient_from_lifetime(double tau_us, const CloudGeometry& cloud, int m_f,
                              const PhysicalConstants& consts) {
  cloud.validate();
  if (!(tau_us > 0.0)) throw DomainError("lifetime must be > 0");
  if (m_f == 0) throw DomainError("m_f = 0 coherences are insensitive to a linear gradient");
  if (std::isinf(tau_us)) return 0.0;
  const double spread_mhz = std::sqrt(2.0) / (kTwoPi * tau_us);
  return spread_mhz /
         (2.0 * std::abs(m_f) * consts.g_factor_mhz_per_gauss * cloud.rms_size_cm) * 1e3;
}

double spin_wave_wavenumber(const CloudGeometry& cloud) {
  cloud.validate();
  return 4.0 * std::numbers::pi / (cloud.wavelength_nm * 1e-9) *
         std::sin(0.5 * cloud.beam_angle_rad);
}

double motional_lifetime(const CloudGeometry& cloud, const PhysicalConstants& consts) {
  consts.validate();
  const double k = spin_wave_wavenumber(cloud);
  const double sigma_v = std::sqrt(kBoltzmann * cloud.temperature_uk * 1e-6 / consts.cs_mass_kg);
  // k sigma_v in rad/s -> rad/us
  return lifetime_from_rms_rate(k * sigma_v * 1e-6);
}

double combined_lifetime(double tau_a_us, double tau_b_us) {
  if (!(tau_a_us > 0.0) || !(tau_b_us > 0.0)) throw DomainError("lifetimes must be > 0");
  const double rate = 1.0 / (tau_a_us * tau_a_us) + 1.0 / (tau_b_us * tau_b_us);
  return rate > 0.0 ? 1.0 / std::sqrt(rate) : kInf;
}

}  // namespace qmem
