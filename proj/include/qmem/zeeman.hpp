#pragma once

// Zeeman structure of the Cs 6S1/2 ground manifold (F=3 ground, F=4 storage)
// in the linear regime. Units throughout the library: field in gauss,
// ordinary frequencies in MHz, times in microseconds. Phases are 2*pi*f*t.

#include <string_view>

namespace qmem {

inline constexpr int kGroundF = 3;
inline constexpr int kStorageF = 4;

struct PhysicalConstants {
  double g_factor_mhz_per_gauss = 0.35;  // |g_F| mu_B / h for F=3; F=4 has opposite sign
  double clock_frequency_ghz = 9.193;
  double cs_mass_kg = 2.207e-25;
  double signal_wavelength_nm = 852.0;

  // Throws ValidationError unless every value is strictly positive and finite.
  void validate() const;
};

struct SublevelIndex {
  int f = kGroundF;
  int m = 0;

  constexpr bool valid() const noexcept {
    return (f == kGroundF || f == kStorageF) && m >= -f && m <= f;
  }
};

enum class Scheme {
  Unpolarized,  // general (n, m) coherence matrix
  SigmaPlus,    // sigma+/sigma+ beams along B: diagonal coherences only
  TwoLevel,     // diagonal with support {m=2, m=3}
};

std::string_view to_string(Scheme scheme) noexcept;
// Accepts the enumerator names case-insensitively, plus "two-level"/"sigma+".
Scheme parse_scheme(std::string_view text);

// Larmor frequency f_L = g * B in MHz. Throws DomainError for B < 0.
double larmor_frequency(double b_gauss, const PhysicalConstants& consts = {});

// Spin-wave frequency of the (n, m) coherence relative to the clock transition,
// (n + m) f_L. The opposite sign of the F=4 g-factor is already folded in.
double spin_wave_detuning(int n, int m, double b_gauss,
                          const PhysicalConstants& consts = {});

// Two-photon selection rule: |n| <= 3, |m| <= 4 and |n - m| <= 2.
constexpr bool selection_rule_allowed(int n, int m) noexcept {
  const int d = n - m;
  return n >= -kGroundF && n <= kGroundF && m >= -kStorageF && m <= kStorageF &&
         d >= -2 && d <= 2;
}

}  // namespace qmem
