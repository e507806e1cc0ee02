#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <numeric>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "qmem/errors.hpp"
#include "qmem/estimation.hpp"

namespace qmem {
namespace {

constexpr std::size_t kMinPoints = 32;
constexpr std::size_t kZeroPadding = 8;
// A spectral peak must stand this far above the median of the searched band.
constexpr double kPeakToMedian = 6.0;

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

}  // namespace

SpectralPeak dominant_peak(const RetrievalCurve& curve) {
  const std::size_t n = curve.size();
  if (n < kMinPoints) throw DomainError("dominant frequency needs at least 32 points");
  const auto step = curve.uniform_step();
  if (!step) throw ValidationError("non-uniform time grid: resample before spectral analysis");

  const auto a = curve.amplitudes();
  const double mean = std::accumulate(a.begin(), a.end(), 0.0) / static_cast<double>(n);
  const std::size_t padded = next_pow2(kZeroPadding * n);
  std::vector<double> x(padded, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double hann =
        0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                              static_cast<double>(n - 1)));
    x[i] = (a[i] - mean) * hann;
  }
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> spectrum;
  fft.fwd(spectrum, x);
  const std::size_t half = padded / 2;
  std::vector<double> mag(half + 1);
  for (std::size_t k = 0; k <= half; ++k) mag[k] = std::abs(spectrum[k]);

  const double bin = 1.0 / (static_cast<double>(padded) * *step);
  const double span = static_cast<double>(n) * *step;
  // Bins below two cycles per record carry the slowly varying envelope.
  const std::size_t lo = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::ceil(2.0 / span / bin)));
  if (lo + 2 >= half) throw NumericalError("record too short for spectral analysis");

  std::size_t best = 0;
  for (std::size_t k = lo; k < half; ++k) {
    if (mag[k] > mag[k - 1] && mag[k] >= mag[k + 1] && (best == 0 || mag[k] > mag[best])) {
      best = k;
    }
  }
  std::vector<double> band(mag.begin() + static_cast<std::ptrdiff_t>(lo), mag.end());
  std::nth_element(band.begin(), band.begin() + static_cast<std::ptrdiff_t>(band.size() / 2),
                   band.end());
  const double median = band[band.size() / 2];
  if (best == 0 || !(mag[best] > kPeakToMedian * median) || !(mag[best] > 0.0)) {
    throw NumericalError("no oscillation detected");
  }
  const double y0 = mag[best - 1];
  const double y1 = mag[best];
  const double y2 = mag[best + 1];
  const double denom = y0 - 2.0 * y1 + y2;
  double shift = denom != 0.0 ? 0.5 * (y0 - y2) / denom : 0.0;
  shift = std::clamp(shift, -0.5, 0.5);
  return {(static_cast<double>(best) + shift) * bin, bin, 1.0 / span};
}

double dominant_frequency(const RetrievalCurve& curve) {
  return dominant_peak(curve).frequency_mhz;
}

}  // namespace qmem
