#include <cmath>
#include <random>
#include <string>

#include "qmem/errors.hpp"
#include "qmem/estimation.hpp"

namespace qmem {

RetrievalCurve::RetrievalCurve(std::vector<CurvePoint> points) : points_(std::move(points)) {
  for (std::size_t i = 0; i < points_.size(); ++i) {
    const auto& p = points_[i];
    if (!std::isfinite(p.t_us) || !std::isfinite(p.amplitude)) {
      throw ValidationError("curve point " + std::to_string(i) + " is not finite");
    }
    if (p.amplitude < 0.0) {
      throw ValidationError("curve amplitude must be non-negative (point " + std::to_string(i) +
                            ")");
    }
    if (p.sigma && !(*p.sigma > 0.0)) {
      throw ValidationError("curve sigma must be positive (point " + std::to_string(i) + ")");
    }
    if (i > 0 && !(p.t_us > points_[i - 1].t_us)) {
      throw ValidationError("curve times must be strictly increasing");
    }
  }
}

std::vector<double> RetrievalCurve::times() const {
  std::vector<double> t;
  t.reserve(points_.size());
  for (const auto& p : points_) t.push_back(p.t_us);
  return t;
}

std::vector<double> RetrievalCurve::amplitudes() const {
  std::vector<double> a;
  a.reserve(points_.size());
  for (const auto& p : points_) a.push_back(p.amplitude);
  return a;
}

bool RetrievalCurve::has_sigma() const noexcept {
  if (points_.empty()) return false;
  for (const auto& p : points_) {
    if (!p.sigma) return false;
  }
  return true;
}

namespace {
constexpr double kUniformTolerance = 1e-4;
}  // namespace

std::optional<double> RetrievalCurve::uniform_step() const {
  if (points_.size() < 2) return std::nullopt;
  const double step = span_us() / static_cast<double>(points_.size() - 1);
  // Times round-tripped through text carry ~1e-9 relative rounding, so compare
  // against the ideal grid with a tolerance far below anything spectral.
  const double t0 = points_.front().t_us;
  for (std::size_t i = 1; i < points_.size(); ++i) {
    const double ideal = t0 + step * static_cast<double>(i);
    if (std::abs(points_[i].t_us - ideal) > kUniformTolerance * step) {
      return std::nullopt;
    }
  }
  return step;
}

double RetrievalCurve::span_us() const noexcept {
  return points_.size() < 2 ? 0.0 : points_.back().t_us - points_.front().t_us;
}

NoiseSpec NoiseSpec::snr(double snr, std::uint64_t seed, double floor) {
  if (!(snr > 0.0)) throw DomainError("SNR must be positive");
  return NoiseSpec{1.0 / snr, floor, seed};
}

std::vector<double> uniform_grid(double start_us, double stop_us, std::size_t n) {
  if (n < 2 || !(stop_us > start_us)) throw DomainError("grid needs n >= 2 and stop > start");
  std::vector<double> t(n);
  const double step = (stop_us - start_us) / static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) t[i] = start_us + step * static_cast<double>(i);
  t.back() = stop_us;
  return t;
}

RetrievalCurve synthesize_curve(const ModelParams& params, std::span<const double> times_us,
                                const NoiseSpec& noise) {
  if (times_us.empty()) throw ValidationError("cannot synthesize a curve on an empty grid");
  if (!(noise.relative_sigma >= 0.0) || !(noise.floor_sigma >= 0.0)) {
    throw ValidationError("noise levels must be non-negative");
  }
  const auto model = retrieval_curve(times_us, params);
  std::mt19937_64 rng(noise.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<CurvePoint> points;
  points.reserve(model.size());
  for (std::size_t i = 0; i < model.size(); ++i) {
    const double sd = noise.relative_sigma * model[i] + noise.floor_sigma;
    const double z = normal(rng);
    CurvePoint p{times_us[i], model[i], std::nullopt};
    if (sd > 0.0) {
      p.amplitude = std::max(0.0, model[i] + sd * z);
      p.sigma = sd;
    }
    points.push_back(p);
  }
  return RetrievalCurve(std::move(points));
}

}  // namespace qmem
