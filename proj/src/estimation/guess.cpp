#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "qmem/errors.hpp"
#include "qmem/estimation.hpp"

namespace qmem {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// Below this many samples per period a 3-point median erases the oscillation.
constexpr double kMinSamplesForMedian = 8.0;
constexpr double kRiseTolerance = 1e-3;

std::vector<double> median3(const std::vector<double>& a) {
  std::vector<double> out(a);
  for (std::size_t i = 1; i + 1 < a.size(); ++i) {
    double w[3] = {a[i - 1], a[i], a[i + 1]};
    std::sort(w, w + 3);
    out[i] = w[1];
  }
  return out;
}

// Log-Gaussian fit ln a = c - t^2 / tau^2 to the maxima; infinity when the
// data shows no resolvable decay.
double lifetime_from_maxima(const std::vector<std::pair<double, double>>& maxima,
                            double first, double span) {
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  int n = 0;
  for (const auto& [t, a] : maxima) {
    if (!(a > 0.05 * first)) continue;
    const double x = t * t;
    const double y = std::log(a);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++n;
  }
  if (n < 3) return kInf;
  const double det = n * sxx - sx * sx;
  if (!(det > 0.0)) return kInf;
  const double slope = (n * sxy - sx * sy) / det;
  if (!(slope < 0.0)) return kInf;
  const double tau = 1.0 / std::sqrt(-slope);
  return tau > 100.0 * span ? kInf : tau;
}

// True when the median-smoothed signal never climbs more than a part in 10^3
// of its peak above its running minimum.
bool never_rises(const RetrievalCurve& curve) {
  const auto a = median3(curve.amplitudes());
  const double peak = *std::max_element(a.begin(), a.end());
  double low = a.front();
  for (double v : a) {
    if (v > low + kRiseTolerance * peak) return false;
    low = std::min(low, v);
  }
  return true;
}

// True when the model reproduces every sample to a part in 10^3 of the peak.
bool explains(const RetrievalCurve& curve, const ModelParams& model) {
  const auto predicted = retrieval_curve(curve.times(), model);
  double peak = 0.0;
  for (const auto& p : curve.points()) peak = std::max(peak, p.amplitude);
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    if (std::abs(predicted[i] - curve.points()[i].amplitude) > kRiseTolerance * peak) return false;
  }
  return true;
}

}  // namespace

std::vector<std::pair<double, double>> period_maxima(const RetrievalCurve& curve,
                                                     double period_us) {
  if (!(period_us > 0.0) || curve.size() < 3) return {};
  const auto t = curve.times();
  const auto raw = curve.amplitudes();
  const double t0 = t.front();
  const double samples_per_period =
      period_us * static_cast<double>(curve.size() - 1) / curve.span_us();

  // Window k collects candidates in [t0 + (k - 1/2) T, t0 + (k + 1/2) T).
  std::map<long, std::pair<double, double>> best;
  const auto offer = [&](std::size_t i, double value) {
    const long k = std::lround(std::floor((t[i] - t0) / period_us + 0.5));
    auto it = best.find(k);
    if (it == best.end() || value > it->second.second) best[k] = {t[i], value};
  };

  // Every component is in phase at t = 0, so maxima sit near multiples of T
  // and the window edges near minima.
  const auto a = samples_per_period >= kMinSamplesForMedian ? median3(raw) : raw;
  for (std::size_t i = 0; i < a.size(); ++i) offer(i, a[i]);

  std::vector<std::pair<double, double>> out;
  out.reserve(best.size());
  for (const auto& [k, v] : best) out.push_back(v);
  return out;
}

ModelParams initial_guess(const RetrievalCurve& curve, Scheme scheme,
                          const PhysicalConstants& consts) {
  consts.validate();
  const double span = curve.span_us();
  // A diagonal curve that never rises is a lone coherence: p2 = 0, and the
  // field is unobservable. Only the decay can be read off.
  const auto lone_coherence = [&] {
    std::vector<std::pair<double, double>> samples;
    for (const auto& p : curve.points()) samples.emplace_back(p.t_us, p.amplitude);
    double a0 = 0.0;
    for (const auto& p : curve.points()) a0 = std::max(a0, p.amplitude);
    const double tau = lifetime_from_maxima(samples, a0, span);
    const DecayEnvelope envelope =
        std::isfinite(tau) ? DecayEnvelope::gaussian(tau) : DecayEnvelope::none();
    auto guess = scheme == Scheme::TwoLevel
                     ? ModelParams::two_level(0.0, 0.0, envelope, a0)
                     : ModelParams::sigma_plus(DiagonalCoherences{}, 0.0, envelope, a0);
    guess.constants = consts;
    return guess;
  };
  if (scheme != Scheme::Unpolarized && never_rises(curve)) {
    auto guess = lone_coherence();
    if (explains(curve, guess)) return guess;
  }
  double f = 0.0;
  try {
    f = dominant_frequency(curve);
  } catch (const NumericalError&) {
    if (scheme == Scheme::Unpolarized) throw;
    return lone_coherence();
  }
  if (f * span < 3.0 * (1.0 - 1e-9)) {
    throw NumericalError("fewer than three oscillation periods in the record");
  }
  const double g = consts.g_factor_mhz_per_gauss;
  const double b = scheme == Scheme::Unpolarized ? f / g : f / (2.0 * g);
  const double period = 1.0 / f;

  const auto maxima = period_maxima(curve, period);
  if (maxima.empty()) throw NumericalError("no maxima found in the retrieval curve");
  const double a0 = maxima.front().second;
  const double tau = lifetime_from_maxima(maxima, a0, span);
  const DecayEnvelope envelope =
      std::isfinite(tau) ? DecayEnvelope::gaussian(tau) : DecayEnvelope::none();

  ModelParams guess;
  guess.constants = consts;
  if (scheme == Scheme::Unpolarized) {
    guess = ModelParams::unpolarized(CoherenceMatrix::uniform_allowed(), b, envelope, a0);
    guess.constants = consts;
    return guess;
  }

  // Early-time extrema, before the envelope has decayed by more than ~1%.
  const double t0 = curve.points().front().t_us;
  double window = std::isfinite(tau) ? 0.1 * tau : 30.0 * period;
  window = std::clamp(window, period, 30.0 * period);
  double hi = 0.0;
  double lo = kInf;
  for (const auto& p : curve.points()) {
    if (p.t_us > t0 + window) break;
    hi = std::max(hi, p.amplitude);
    lo = std::min(lo, p.amplitude);
  }
  const double r = hi > 0.0 ? std::clamp((hi - lo) / hi, 0.0, 1.0) : 0.0;
  const double p2 = invert_relative_amplitude(r).p2;

  guess = scheme == Scheme::TwoLevel
              ? ModelParams::two_level(p2, b, envelope, a0)
              : ModelParams::sigma_plus(DiagonalCoherences::two_level(p2), b, envelope, a0);
  guess.constants = consts;
  return guess;
}

}  // namespace qmem
