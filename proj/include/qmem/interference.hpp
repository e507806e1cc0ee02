#pragma once

// Retrieval amplitude of the stored light as a coherent sum of Zeeman-split
// spin waves:
//
//   A(t) = A0 * | sum_{n,m} P(n,m) exp(i 2 pi (n+m) f_L t) |^2 * f(t, tau)
//
// The clock phase exp(i 2 pi f_0 t) is common to every term and drops out of
// the modulus, so it is never evaluated.

#include <array>
#include <complex>
#include <span>
#include <utility>
#include <variant>
#include <vector>

#include "qmem/zeeman.hpp"

namespace qmem {

inline constexpr double kWeightSumTolerance = 1e-12;

// Coherence weights p_m = P(m, m) for m = -3..3 (sigma+ / sigma+ storage).
class DiagonalCoherences {
 public:
  static constexpr int kMaxM = kGroundF;
  static constexpr std::size_t kSize = 2 * kMaxM + 1;
  using Weights = std::array<double, kSize>;

  // All weight in the stretched state m = 3.
  DiagonalCoherences();

  // Validates non-negativity and unit sum (within kWeightSumTolerance).
  static DiagonalCoherences from_weights(const Weights& weights);
  // Rescales non-negative weights to unit sum; throws if they are all zero.
  static DiagonalCoherences normalized(const Weights& weights);
  // p2 on m = 2, 1 - p2 on m = 3.
  static DiagonalCoherences two_level(double p2);

  double at(int m) const;
  const Weights& weights() const noexcept { return weights_; }
  // Number of sublevels carrying non-zero weight.
  int support_size() const noexcept;
  // True when all weight sits on m = 2 and m = 3.
  bool is_two_level() const noexcept;

  static constexpr std::size_t index(int m) noexcept {
    return static_cast<std::size_t>(m + kMaxM);
  }

 private:
  explicit DiagonalCoherences(const Weights& weights) : weights_(weights) {}
  Weights weights_;
};

// General 7 x 9 coherence table P(n, m), n in [-3, 3] (F=3), m in [-4, 4] (F=4).
class CoherenceMatrix {
 public:
  static constexpr int kRows = 2 * kGroundF + 1;
  static constexpr int kCols = 2 * kStorageF + 1;
  using Weights = std::array<double, kRows * kCols>;

  // Uniform weight over every pair allowed by the selection rule.
  static CoherenceMatrix uniform_allowed();
  static CoherenceMatrix from_diagonal(const DiagonalCoherences& diagonal);
  // Validates non-negativity, zeros outside the selection rule, unit sum.
  static CoherenceMatrix from_weights(const Weights& weights);
  static CoherenceMatrix normalized(const Weights& weights);

  double at(int n, int m) const;
  const Weights& weights() const noexcept { return weights_; }

  static constexpr std::size_t index(int n, int m) noexcept {
    return static_cast<std::size_t>((n + kGroundF) * kCols + (m + kStorageF));
  }

 private:
  explicit CoherenceMatrix(const Weights& weights) : weights_(weights) {}
  Weights weights_{};
};

enum class DecayLaw { Gaussian, Exponential, None };

class DecayEnvelope {
 public:
  DecayEnvelope() = default;  // no decay

  static DecayEnvelope gaussian(double tau_us);
  static DecayEnvelope exponential(double tau_us);
  static DecayEnvelope none() { return {}; }
  // Gaussian or Exponential; tau must be > 0 (infinity is allowed).
  static DecayEnvelope make(DecayLaw law, double tau_us);

  DecayLaw law() const noexcept { return law_; }
  // Infinity for DecayLaw::None.
  double tau_us() const noexcept;

  double operator()(double t_us) const;

 private:
  DecayEnvelope(DecayLaw law, double tau) : law_(law), tau_(tau) {}
  DecayLaw law_ = DecayLaw::None;
  double tau_ = 0.0;
};

// f(t, tau): Gaussian exp(-t^2/tau^2), Exponential exp(-t/tau), None 1.
// Throws DomainError for t < 0.
double envelope_eval(const DecayEnvelope& envelope, double t_us);

// A coherent sum rewritten as harmonics of the Larmor phase phi = 2 pi f_L t:
// S(phi) = sum_k W_k exp(i k phi). Terms sharing n + m are merged.
struct PhaseSpectrum {
  std::vector<std::pair<int, double>> lines;  // (k, W_k), k ascending, W_k > 0

  static PhaseSpectrum of(const CoherenceMatrix& matrix);
  static PhaseSpectrum of(const DiagonalCoherences& diagonal);

  // Smallest positive phase period of |S|^2 (2 pi / gcd of harmonic spacings);
  // infinity for a single line.
  double phase_period() const;
  int bandwidth() const noexcept;  // max k - min k
};

std::complex<double> coherent_sum(const PhaseSpectrum& spectrum, double larmor_phase);
double interference_factor(const PhaseSpectrum& spectrum, double larmor_phase);

struct ModelParams {
  Scheme scheme = Scheme::SigmaPlus;
  std::variant<CoherenceMatrix, DiagonalCoherences> coherences = DiagonalCoherences{};
  double b_gauss = 1.0;
  DecayEnvelope envelope;
  double amplitude_scale = 1.0;
  PhysicalConstants constants;

  static ModelParams unpolarized(const CoherenceMatrix& matrix, double b_gauss,
                                 DecayEnvelope envelope = {}, double a0 = 1.0);
  static ModelParams sigma_plus(const DiagonalCoherences& diagonal, double b_gauss,
                                DecayEnvelope envelope = {}, double a0 = 1.0);
  static ModelParams two_level(double p2, double b_gauss, DecayEnvelope envelope = {},
                               double a0 = 1.0);

  // Throws ValidationError when the coherence representation does not match
  // the scheme, or on negative field / amplitude.
  void validate() const;
  PhaseSpectrum spectrum() const;
  // Weight on m = 2 for TwoLevel parameters.
  double p2() const;
};

// General (unpolarized) coherent sum. Requires Scheme::Unpolarized.
double retrieval_general(double t_us, const ModelParams& params);
// Diagonal sigma+ sum with phases 2 m * 2 pi f_L t. Requires SigmaPlus or TwoLevel.
double retrieval_sigma_plus(double t_us, const ModelParams& params);
// A0 [p3^2 + p2^2 + 2 p2 p3 cos(2 * 2 pi f_L t)] f(t, tau), p3 = 1 - p2.
double retrieval_two_level(double t_us, double p2, double b_gauss,
                           const DecayEnvelope& envelope, double a0,
                           const PhysicalConstants& consts = {});
// Dispatches on params.scheme.
double retrieval(double t_us, const ModelParams& params);
std::vector<double> retrieval_curve(std::span<const double> times_us,
                                    const ModelParams& params);

// R = 4 p2 (1 - p2).
double relative_amplitude(double p2);

struct RelativeAmplitudeRoots {
  double p2;         // root <= 0.5
  double alternate;  // 1 - p2
};
RelativeAmplitudeRoots invert_relative_amplitude(double r);

// Revival period: 1/f_L for Unpolarized, 1/(2 f_L) for SigmaPlus/TwoLevel.
// Infinity at zero field.
double revival_period(double b_gauss, Scheme scheme, const PhysicalConstants& consts = {});

// k * period for k = 0, 1, ... while <= horizon. Throws NumericalError at B = 0.
std::vector<double> revival_times(double b_gauss, Scheme scheme, double horizon_us,
                                  const PhysicalConstants& consts = {});

struct TimeWindow {
  double start_us = 0.0;
  double stop_us = 0.0;
  double length() const noexcept { return stop_us - start_us; }
};

struct Extrema {
  double a_max = 0.0;
  double a_min = 0.0;
  double at_max = 0.0;  // abscissa of the maximum (time or phase)
  double at_min = 0.0;

  // (a_max - a_min) / a_max, zero when a_max is zero.
  double relative_amplitude() const noexcept;
};

// Extrema of the envelope-free A0 |S|^2 over a time window spanning at least
// one oscillation period: dense grid (>= 1000 points per period) followed by
// golden-section refinement around the best grid points.
Extrema oscillation_extrema(const ModelParams& params, const TimeWindow& window);

// Extrema of |S(phi)|^2 over one phase period; independent of the field.
// at_max / at_min are phases.
Extrema interference_extrema(const PhaseSpectrum& spectrum);

}  // namespace qmem
