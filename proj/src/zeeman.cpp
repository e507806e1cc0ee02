#include "qmem/zeeman.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <string>

#include "qmem/errors.hpp"

namespace qmem {

void PhysicalConstants::validate() const {
  const auto positive = [](double v) { return std::isfinite(v) && v > 0.0; };
  if (!positive(g_factor_mhz_per_gauss) || !positive(clock_frequency_ghz) ||
      !positive(cs_mass_kg) || !positive(signal_wavelength_nm)) {
    throw ValidationError("physical constants must be finite and strictly positive");
  }
}

std::string_view to_string(Scheme scheme) noexcept {
  switch (scheme) {
    case Scheme::Unpolarized:
      return "Unpolarized";
    case Scheme::SigmaPlus:
      return "SigmaPlus";
    case Scheme::TwoLevel:
      return "TwoLevel";
  }
  return "?";
}

Scheme parse_scheme(std::string_view text) {
  std::string key;
  for (char c : text) {
    if (c == '-' || c == '_' || c == ' ') continue;
    key.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  if (key == "unpolarized" || key == "general") return Scheme::Unpolarized;
  if (key == "sigmaplus" || key == "sigma+") return Scheme::SigmaPlus;
  if (key == "twolevel") return Scheme::TwoLevel;
  throw ValidationError("unknown scheme '" + std::string(text) + "'");
}

double larmor_frequency(double b_gauss, const PhysicalConstants& consts) {
  if (!(b_gauss >= 0.0)) throw DomainError("magnetic field must be non-negative");
  return consts.g_factor_mhz_per_gauss * b_gauss;
}

double spin_wave_detuning(int n, int m, double b_gauss, const PhysicalConstants& consts) {
  if (std::abs(n) > kGroundF || std::abs(m) > kStorageF) {
    throw DomainError("sublevel index out of range: n=" + std::to_string(n) +
                      " m=" + std::to_string(m));
  }
  return static_cast<double>(n + m) * larmor_frequency(b_gauss, consts);
}

}  // namespace qmem
