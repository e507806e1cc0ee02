#include "qmem/interference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>
#include <string>

#include "qmem/errors.hpp"
#include "qmem/numerics.hpp"

namespace qmem {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kInf = std::numeric_limits<double>::infinity();

template <std::size_t N>
void check_weights(const std::array<double, N>& w, bool require_unit_sum) {
  double sum = 0.0;
  for (double v : w) {
    if (!std::isfinite(v) || v < 0.0) {
      throw ValidationError("coherence weights must be finite and non-negative");
    }
    sum += v;
  }
  if (require_unit_sum && std::abs(sum - 1.0) > kWeightSumTolerance) {
    throw ValidationError("coherence weights must sum to 1 (got " + std::to_string(sum) + ")");
  }
  if (!require_unit_sum && !(sum > 0.0)) {
    throw ValidationError("coherence weights are all zero");
  }
}

template <std::size_t N>
std::array<double, N> scaled_to_unit_sum(std::array<double, N> w) {
  check_weights(w, false);
  const double sum = std::accumulate(w.begin(), w.end(), 0.0);
  for (double& v : w) v /= sum;
  return w;
}

void check_p2(double p2) {
  if (!(p2 >= 0.0 && p2 <= 1.0)) throw DomainError("p2 must lie in [0, 1]");
}

// Larmor phase 2 pi f_L t.
double larmor_phase(double t_us, double b_gauss, const PhysicalConstants& consts) {
  return kTwoPi * (larmor_frequency(b_gauss, consts) * t_us);
}

}  // namespace

// --- DiagonalCoherences ----------------------------------------------------

DiagonalCoherences::DiagonalCoherences() : weights_{} { weights_[index(kMaxM)] = 1.0; }

DiagonalCoherences DiagonalCoherences::from_weights(const Weights& weights) {
  check_weights(weights, true);
  return DiagonalCoherences(weights);
}

DiagonalCoherences DiagonalCoherences::normalized(const Weights& weights) {
  return DiagonalCoherences(scaled_to_unit_sum(weights));
}

DiagonalCoherences DiagonalCoherences::two_level(double p2) {
  check_p2(p2);
  Weights w{};
  w[index(2)] = p2;
  w[index(3)] = 1.0 - p2;
  return DiagonalCoherences(w);
}

double DiagonalCoherences::at(int m) const {
  if (m < -kMaxM || m > kMaxM) throw DomainError("diagonal coherence index out of range");
  return weights_[index(m)];
}

int DiagonalCoherences::support_size() const noexcept {
  return static_cast<int>(std::count_if(weights_.begin(), weights_.end(),
                                        [](double v) { return v > 0.0; }));
}

bool DiagonalCoherences::is_two_level() const noexcept {
  for (int m = -kMaxM; m <= 1; ++m) {
    if (weights_[index(m)] != 0.0) return false;
  }
  return true;
}

// --- CoherenceMatrix -------------------------------------------------------

CoherenceMatrix CoherenceMatrix::uniform_allowed() {
  Weights w{};
  int allowed = 0;
  for (int n = -kGroundF; n <= kGroundF; ++n) {
    for (int m = -kStorageF; m <= kStorageF; ++m) {
      if (selection_rule_allowed(n, m)) ++allowed;
    }
  }
  for (int n = -kGroundF; n <= kGroundF; ++n) {
    for (int m = -kStorageF; m <= kStorageF; ++m) {
      if (selection_rule_allowed(n, m)) w[index(n, m)] = 1.0 / allowed;
    }
  }
  return CoherenceMatrix(w);
}

CoherenceMatrix CoherenceMatrix::from_diagonal(const DiagonalCoherences& diagonal) {
  Weights w{};
  for (int m = -DiagonalCoherences::kMaxM; m <= DiagonalCoherences::kMaxM; ++m) {
    w[index(m, m)] = diagonal.at(m);
  }
  return CoherenceMatrix(w);
}

namespace {
void check_selection_zeros(const CoherenceMatrix::Weights& w) {
  for (int n = -kGroundF; n <= kGroundF; ++n) {
    for (int m = -kStorageF; m <= kStorageF; ++m) {
      if (!selection_rule_allowed(n, m) && w[CoherenceMatrix::index(n, m)] != 0.0) {
        throw ValidationError("coherence P(" + std::to_string(n) + "," + std::to_string(m) +
                              ") violates the |n - m| <= 2 selection rule");
      }
    }
  }
}
}  // namespace

CoherenceMatrix CoherenceMatrix::from_weights(const Weights& weights) {
  check_weights(weights, true);
  check_selection_zeros(weights);
  return CoherenceMatrix(weights);
}

CoherenceMatrix CoherenceMatrix::normalized(const Weights& weights) {
  check_selection_zeros(weights);
  return CoherenceMatrix(scaled_to_unit_sum(weights));
}

double CoherenceMatrix::at(int n, int m) const {
  if (std::abs(n) > kGroundF || std::abs(m) > kStorageF) {
    throw DomainError("coherence index out of range");
  }
  return weights_[index(n, m)];
}

// --- DecayEnvelope ---------------------------------------------------------

DecayEnvelope DecayEnvelope::gaussian(double tau_us) { return make(DecayLaw::Gaussian, tau_us); }

DecayEnvelope DecayEnvelope::exponential(double tau_us) {
  return make(DecayLaw::Exponential, tau_us);
}

DecayEnvelope DecayEnvelope::make(DecayLaw law, double tau_us) {
  if (law == DecayLaw::None) return {};
  if (!(tau_us > 0.0)) throw ValidationError("envelope lifetime must be > 0");
  return DecayEnvelope(law, tau_us);
}

double DecayEnvelope::tau_us() const noexcept { return law_ == DecayLaw::None ? kInf : tau_; }

double DecayEnvelope::operator()(double t_us) const {
  if (!(t_us >= 0.0)) throw DomainError("storage time must be non-negative");
  switch (law_) {
    case DecayLaw::Gaussian: {
      const double x = t_us / tau_;
      return std::exp(-x * x);
    }
    case DecayLaw::Exponential:
      return std::exp(-t_us / tau_);
    case DecayLaw::None:
      break;
  }
  return 1.0;
}

double envelope_eval(const DecayEnvelope& envelope, double t_us) { return envelope(t_us); }

// --- PhaseSpectrum ---------------------------------------------------------

PhaseSpectrum PhaseSpectrum::of(const CoherenceMatrix& matrix) {
  std::map<int, double> lines;
  for (int n = -kGroundF; n <= kGroundF; ++n) {
    for (int m = -kStorageF; m <= kStorageF; ++m) {
      const double w = matrix.at(n, m);
      if (w > 0.0) lines[n + m] += w;
    }
  }
  return PhaseSpectrum{{lines.begin(), lines.end()}};
}

PhaseSpectrum PhaseSpectrum::of(const DiagonalCoherences& diagonal) {
  PhaseSpectrum spectrum;
  for (int m = -DiagonalCoherences::kMaxM; m <= DiagonalCoherences::kMaxM; ++m) {
    const double w = diagonal.at(m);
    if (w > 0.0) spectrum.lines.emplace_back(2 * m, w);
  }
  return spectrum;
}

double PhaseSpectrum::phase_period() const {
  int g = 0;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    g = std::gcd(g, lines[i].first - lines[0].first);
  }
  return g == 0 ? kInf : kTwoPi / g;
}

int PhaseSpectrum::bandwidth() const noexcept {
  return lines.empty() ? 0 : lines.back().first - lines.front().first;
}

std::complex<double> coherent_sum(const PhaseSpectrum& spectrum, double larmor_phase) {
  // Referenced to the lowest harmonic: a global phase, invisible in |S|^2.
  // Harmonics are multiples of the gcd step, so the sum is a polynomial in
  // z = exp(i g phi), evaluated by Horner's rule from the top line down.
  const auto& lines = spectrum.lines;
  if (lines.empty()) return {};
  const int k0 = lines.front().first;
  int g = 0;
  for (const auto& line : lines) g = std::gcd(g, line.first - k0);
  if (g == 0) return {lines.front().second, 0.0};
  const auto z = std::polar(1.0, static_cast<double>(g) * larmor_phase);
  std::complex<double> sum{lines.back().second, 0.0};
  for (std::size_t i = lines.size() - 1; i-- > 0;) {
    for (int gap = (lines[i + 1].first - lines[i].first) / g; gap > 0; --gap) sum *= z;
    sum += lines[i].second;
  }
  return sum;
}

double interference_factor(const PhaseSpectrum& spectrum, double larmor_phase) {
  return std::norm(coherent_sum(spectrum, larmor_phase));
}

// --- ModelParams -----------------------------------------------------------

ModelParams ModelParams::unpolarized(const CoherenceMatrix& matrix, double b_gauss,
                                     DecayEnvelope envelope, double a0) {
  ModelParams p;
  p.scheme = Scheme::Unpolarized;
  p.coherences = matrix;
  p.b_gauss = b_gauss;
  p.envelope = envelope;
  p.amplitude_scale = a0;
  return p;
}

ModelParams ModelParams::sigma_plus(const DiagonalCoherences& diagonal, double b_gauss,
                                    DecayEnvelope envelope, double a0) {
  ModelParams p;
  p.scheme = Scheme::SigmaPlus;
  p.coherences = diagonal;
  p.b_gauss = b_gauss;
  p.envelope = envelope;
  p.amplitude_scale = a0;
  return p;
}

ModelParams ModelParams::two_level(double p2, double b_gauss, DecayEnvelope envelope,
                                   double a0) {
  ModelParams p = sigma_plus(DiagonalCoherences::two_level(p2), b_gauss, envelope, a0);
  p.scheme = Scheme::TwoLevel;
  return p;
}

void ModelParams::validate() const {
  constants.validate();
  if (!std::isfinite(b_gauss) || b_gauss < 0.0) {
    throw ValidationError("magnetic field must be finite and non-negative");
  }
  if (!std::isfinite(amplitude_scale) || amplitude_scale < 0.0) {
    throw ValidationError("amplitude scale A0 must be finite and non-negative");
  }
  const bool general = std::holds_alternative<CoherenceMatrix>(coherences);
  switch (scheme) {
    case Scheme::Unpolarized:
      if (!general) throw ValidationError("Unpolarized scheme requires a coherence matrix");
      break;
    case Scheme::SigmaPlus:
      if (general) throw ValidationError("SigmaPlus scheme requires diagonal coherences");
      break;
    case Scheme::TwoLevel:
      if (general || !std::get<DiagonalCoherences>(coherences).is_two_level()) {
        throw ValidationError("TwoLevel scheme requires diagonal support on m = 2, 3");
      }
      break;
  }
}

PhaseSpectrum ModelParams::spectrum() const {
  return std::visit([](const auto& c) { return PhaseSpectrum::of(c); }, coherences);
}

double ModelParams::p2() const {
  if (const auto* d = std::get_if<DiagonalCoherences>(&coherences)) return d->at(2);
  throw ValidationError("p2 is defined for diagonal coherences only");
}

// --- Retrieval -------------------------------------------------------------

double retrieval_general(double t_us, const ModelParams& params) {
  params.validate();
  if (params.scheme != Scheme::Unpolarized) {
    throw ValidationError("retrieval_general requires the Unpolarized scheme");
  }
  const double env = params.envelope(t_us);
  const auto spectrum = PhaseSpectrum::of(std::get<CoherenceMatrix>(params.coherences));
  return params.amplitude_scale *
         interference_factor(spectrum, larmor_phase(t_us, params.b_gauss, params.constants)) *
         env;
}

double retrieval_sigma_plus(double t_us, const ModelParams& params) {
  params.validate();
  if (params.scheme == Scheme::Unpolarized) {
    throw ValidationError("retrieval_sigma_plus requires diagonal coherences");
  }
  const double env = params.envelope(t_us);
  const auto spectrum = PhaseSpectrum::of(std::get<DiagonalCoherences>(params.coherences));
  return params.amplitude_scale *
         interference_factor(spectrum, larmor_phase(t_us, params.b_gauss, params.constants)) *
         env;
}

double retrieval_two_level(double t_us, double p2, double b_gauss,
                           const DecayEnvelope& envelope, double a0,
                           const PhysicalConstants& consts) {
  check_p2(p2);
  const double env = envelope(t_us);
  const double p3 = 1.0 - p2;
  const double phi = larmor_phase(t_us, b_gauss, consts);
  return a0 * (p3 * p3 + p2 * p2 + 2.0 * p2 * p3 * std::cos(2.0 * phi)) * env;
}

double retrieval(double t_us, const ModelParams& params) {
  switch (params.scheme) {
    case Scheme::Unpolarized:
      return retrieval_general(t_us, params);
    case Scheme::SigmaPlus:
      return retrieval_sigma_plus(t_us, params);
    case Scheme::TwoLevel:
      params.validate();
      return retrieval_two_level(t_us, params.p2(), params.b_gauss, params.envelope,
                                 params.amplitude_scale, params.constants);
  }
  return 0.0;
}

std::vector<double> retrieval_curve(std::span<const double> times_us,
                                    const ModelParams& params) {
  params.validate();
  std::vector<double> out;
  out.reserve(times_us.size());
  if (params.scheme == Scheme::TwoLevel) {
    const double p2 = params.p2();
    for (double t : times_us) {
      out.push_back(retrieval_two_level(t, p2, params.b_gauss, params.envelope,
                                        params.amplitude_scale, params.constants));
    }
    return out;
  }
  const auto spectrum = params.spectrum();
  for (double t : times_us) {
    const double env = params.envelope(t);
    out.push_back(params.amplitude_scale *
                  interference_factor(spectrum,
                                      larmor_phase(t, params.b_gauss, params.constants)) *
                  env);
  }
  return out;
}

// --- Relative amplitude ----------------------------------------------------

double relative_amplitude(double p2) {
  check_p2(p2);
  return 4.0 * p2 * (1.0 - p2);
}

RelativeAmplitudeRoots invert_relative_amplitude(double r) {
  if (!(r >= 0.0 && r <= 1.0)) throw DomainError("relative amplitude must lie in [0, 1]");
  // (1 - sqrt(1 - r)) / 2 without the cancellation at small r.
  const double p2 = r / (2.0 * (1.0 + std::sqrt(1.0 - r)));
  return {p2, 1.0 - p2};
}

// --- Revivals --------------------------------------------------------------

double revival_period(double b_gauss, Scheme scheme, const PhysicalConstants& consts) {
  const double f_l = larmor_frequency(b_gauss, consts);
  if (f_l == 0.0) return kInf;
  return scheme == Scheme::Unpolarized ? 1.0 / f_l : 1.0 / (2.0 * f_l);
}

std::vector<double> revival_times(double b_gauss, Scheme scheme, double horizon_us,
                                  const PhysicalConstants& consts) {
  if (!(horizon_us > 0.0)) throw DomainError("horizon must be positive");
  const double period = revival_period(b_gauss, scheme, consts);
  if (!std::isfinite(period)) throw NumericalError("no revivals: degenerate field");
  std::vector<double> times;
  const double limit = horizon_us * (1.0 + 1e-12);
  for (long k = 0;; ++k) {
    const double t = static_cast<double>(k) * period;
    if (t > limit) break;
    times.push_back(t);
  }
  return times;
}

// --- Extrema ---------------------------------------------------------------

double Extrema::relative_amplitude() const noexcept {
  return a_max > 0.0 ? (a_max - a_min) / a_max : 0.0;
}

namespace {

// Dense grid over [lo, lo + length] followed by golden-section refinement of the
// best grid point for each extremum.
Extrema grid_extrema(const std::function<double(double)>& f, double lo, double length,
                     std::size_t intervals) {
  const double h = length / static_cast<double>(intervals);
  std::size_t i_max = 0;
  std::size_t i_min = 0;
  double v_max = -kInf;
  double v_min = kInf;
  for (std::size_t i = 0; i <= intervals; ++i) {
    const double v = f(lo + h * static_cast<double>(i));
    if (v > v_max) {
      v_max = v;
      i_max = i;
    }
    if (v < v_min) {
      v_min = v;
      i_min = i;
    }
  }
  const double hi = lo + length;
  const auto bracket = [&](std::size_t i) {
    const double c = lo + h * static_cast<double>(i);
    return std::pair{std::max(lo, c - h), std::min(hi, c + h)};
  };
  const double tol = 1e-13 * std::max(1.0, std::abs(hi));
  const auto [a1, b1] = bracket(i_max);
  const auto refined_max = golden_section_minimize([&](double x) { return -f(x); }, a1, b1, tol);
  const auto [a2, b2] = bracket(i_min);
  const auto refined_min = golden_section_minimize(f, a2, b2, tol);

  Extrema e;
  e.a_max = std::max(v_max, -refined_max.value);
  e.at_max = -refined_max.value >= v_max ? refined_max.x : lo + h * static_cast<double>(i_max);
  e.a_min = std::min(v_min, refined_min.value);
  e.at_min = refined_min.value <= v_min ? refined_min.x : lo + h * static_cast<double>(i_min);
  return e;
}

std::size_t points_per_period(const PhaseSpectrum& spectrum) {
  return static_cast<std::size_t>(std::max(1000, 100 * spectrum.bandwidth()));
}

}  // namespace

Extrema interference_extrema(const PhaseSpectrum& spectrum) {
  const double period = spectrum.phase_period();
  if (!std::isfinite(period)) {
    const double v = interference_factor(spectrum, 0.0);
    return {v, v, 0.0, 0.0};
  }
  if (spectrum.lines.size() == 2) {
    // |w1 + w2 e^{i x}|^2 peaks in phase and bottoms out half a period later.
    const double w1 = spectrum.lines[0].second;
    const double w2 = spectrum.lines[1].second;
    return {(w1 + w2) * (w1 + w2), (w1 - w2) * (w1 - w2), 0.0, 0.5 * period};
  }
  return grid_extrema([&](double phi) { return interference_factor(spectrum, phi); }, 0.0,
                      period, points_per_period(spectrum));
}

Extrema oscillation_extrema(const ModelParams& params, const TimeWindow& window) {
  params.validate();
  if (!(window.start_us >= 0.0) || !(window.length() > 0.0)) {
    throw DomainError("extrema window must be a non-empty interval at t >= 0");
  }
  const auto spectrum = params.spectrum();
  const double a0 = params.amplitude_scale;
  const double phase_period = spectrum.phase_period();
  if (!std::isfinite(phase_period)) {
    const double v = a0 * interference_factor(spectrum, 0.0);
    return {v, v, window.start_us, window.start_us};
  }
  const double f_l = larmor_frequency(params.b_gauss, params.constants);
  const double period_us = f_l > 0.0 ? phase_period / (kTwoPi * f_l) : kInf;
  if (!(window.length() >= period_us * (1.0 - 1e-12))) {
    throw DomainError("extrema window is shorter than one oscillation period");
  }
  const double periods = window.length() / period_us;
  const double intervals = std::ceil(periods * static_cast<double>(points_per_period(spectrum)));
  if (intervals > 5e7) throw DomainError("extrema window spans too many periods");
  const auto factor = [&](double t) {
    return a0 * interference_factor(spectrum, kTwoPi * (f_l * t));
  };
  return grid_extrema(factor, window.start_us, window.length(),
                      static_cast<std::size_t>(intervals));
}

}  // namespace qmem
