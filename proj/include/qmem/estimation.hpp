#pragma once

// Inverse problems on retrieval curves: synthetic data, spectral
// initialization, weighted least-squares fitting and stray-field estimation.

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qmem/interference.hpp"

namespace qmem {

struct CurvePoint {
  double t_us = 0.0;
  double amplitude = 0.0;
  std::optional<double> sigma;
};

class RetrievalCurve {
 public:
  RetrievalCurve() = default;
  // Throws ValidationError unless times strictly increase, amplitudes are
  // non-negative and every present sigma is positive.
  explicit RetrievalCurve(std::vector<CurvePoint> points);

  const std::vector<CurvePoint>& points() const noexcept { return points_; }
  std::size_t size() const noexcept { return points_.size(); }
  bool empty() const noexcept { return points_.empty(); }
  std::vector<double> times() const;
  std::vector<double> amplitudes() const;
  bool has_sigma() const noexcept;
  // Sample spacing if every time lies within 1e-4 steps of the ideal uniform
  // grid, nullopt otherwise.
  std::optional<double> uniform_step() const;
  double span_us() const noexcept;

 private:
  std::vector<CurvePoint> points_;
};

struct NoiseSpec {
  double relative_sigma = 0.0;
  double floor_sigma = 0.0;
  std::uint64_t seed = 0;

  // Relative 1/snr plus a detector floor of 1e-3 (amplitude units).
  static NoiseSpec snr(double snr, std::uint64_t seed, double floor = 1e-3);
};

// Uniform grid of n points from start to stop inclusive.
std::vector<double> uniform_grid(double start_us, double stop_us, std::size_t n);

// a_i = model(t_i) + eps_i with eps_i ~ N(0, relative * model + floor), clipped
// at zero. Points carry sigma = the generating sd when it is non-zero.
// The generator is seeded per call; equal inputs give bit-identical output.
RetrievalCurve synthesize_curve(const ModelParams& params, std::span<const double> times_us,
                                const NoiseSpec& noise);

// Dominant oscillation frequency (MHz): largest local peak of the Hann-windowed,
// zero-padded magnitude spectrum of the mean-subtracted signal above 2/span,
// refined by parabolic interpolation. Requires >= 32 uniformly spaced points.
double dominant_frequency(const RetrievalCurve& curve);

struct SpectralPeak {
  double frequency_mhz = 0.0;
  double bin_width_mhz = 0.0;  // after zero padding
  double raw_bin_width_mhz = 0.0;  // 1 / span
};
SpectralPeak dominant_peak(const RetrievalCurve& curve);

// Initial parameters from the data alone: field from the dominant frequency,
// tau from a log-Gaussian fit to per-period maxima, A0 from the first maximum,
// p2 from the early-time extrema ratio. Unpolarized guesses use the uniform
// coherence matrix. A diagonal-scheme curve without a detectable oscillation
// yields p2 = 0 and B = 0; for Unpolarized it is a NumericalError.
ModelParams initial_guess(const RetrievalCurve& curve, Scheme scheme,
                          const PhysicalConstants& consts = {});

// Per-period maxima used by initial_guess: (time, amplitude) pairs.
std::vector<std::pair<double, double>> period_maxima(const RetrievalCurve& curve,
                                                     double period_us);

struct ParameterBounds {
  double lower = -std::numeric_limits<double>::infinity();
  double upper = std::numeric_limits<double>::infinity();
};

struct FitOptions {
  int max_iterations = 500;
  double tolerance = 1e-10;  // relative step and relative cost decrease
  int starts = 3;            // guess plus perturbed restarts; best cost wins
  // Weights when the curve has no sigma: max(relative * a_i, floor * max a).
  double fallback_relative_sigma = 0.05;
  double fallback_floor_fraction = 1e-3;
  // Overrides of the default box bounds, by parameter name.
  std::vector<std::pair<std::string, ParameterBounds>> bounds;
  bool hold_envelope = false;  // keep the guess envelope; tau is not fitted
};

struct FitResult {
  ModelParams params;
  std::vector<std::string> names;  // free parameters, order of covariance rows
  Eigen::VectorXd estimates;
  Eigen::MatrixXd covariance;
  double residual_norm = 0.0;  // weighted sum of squared residuals
  bool converged = false;
  bool covariance_degenerate = false;
  int iterations = 0;
  std::size_t points = 0;

  std::optional<std::size_t> index_of(std::string_view name) const;
  double estimate(std::string_view name) const;
  double sigma(std::string_view name) const;
};

// Weighted least squares over the free parameters of the scheme:
//   Unpolarized: A0, B, tau (matrix held fixed)
//   SigmaPlus:   A0, B, tau, u_m = p_m / p_ref for the supported m except the
//                largest (p_ref)
//   TwoLevel:    A0, B, tau, p2
// tau is free unless the guess envelope is None.
FitResult fit_curve(const RetrievalCurve& curve, Scheme scheme,
                    const std::optional<ModelParams>& guess = std::nullopt,
                    const FitOptions& options = {});

struct StrayFieldEstimate {
  double b_gauss = 0.0;
  double sigma_gauss = 0.0;
  double lower_gauss = 0.0;  // 1-sigma interval
  double upper_gauss = 0.0;
  FitResult fit;
};

struct StrayFieldOptions {
  CoherenceMatrix coherences = CoherenceMatrix::uniform_allowed();
  // Held fixed when given; otherwise a Gaussian tau is fitted alongside B.
  std::optional<DecayEnvelope> known_envelope;
  PhysicalConstants constants;
};

// Fits the unpolarized model with B free. Throws NumericalError("field
// indistinguishable from zero") when the data shows no collapse.
StrayFieldEstimate estimate_stray_field(const RetrievalCurve& curve,
                                        const StrayFieldOptions& options = {});

}  // namespace qmem
