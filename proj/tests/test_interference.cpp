#include <doctest.h>

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "qmem/errors.hpp"
#include "qmem/interference.hpp"

using namespace qmem;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Local maxima of a sampled function, by direct comparison with neighbours.
std::vector<double> brute_force_peaks(const std::vector<double>& t, const std::vector<double>& a,
                                      double min_height) {
  std::vector<double> peaks;
  for (std::size_t i = 1; i + 1 < a.size(); ++i) {
    if (a[i] > a[i - 1] && a[i] >= a[i + 1] && a[i] > min_height) peaks.push_back(t[i]);
  }
  return peaks;
}

}  // namespace

TEST_SUITE("interference") {

TEST_CASE("diagonal coherences validate their weights") {
  DiagonalCoherences::Weights w{};
  w[DiagonalCoherences::index(3)] = 0.5;
  CHECK_THROWS_AS(DiagonalCoherences::from_weights(w), ValidationError);
  w[DiagonalCoherences::index(2)] = 0.5;
  CHECK_NOTHROW(DiagonalCoherences::from_weights(w));
  w[DiagonalCoherences::index(1)] = -0.1;
  CHECK_THROWS_AS(DiagonalCoherences::normalized(w), ValidationError);
  CHECK_THROWS_AS(DiagonalCoherences::normalized({}), ValidationError);
  CHECK_THROWS_AS(DiagonalCoherences::two_level(1.5), DomainError);

  const auto d = DiagonalCoherences::two_level(0.25);
  CHECK(d.at(2) == 0.25);
  CHECK(d.at(3) == 0.75);
  CHECK(d.support_size() == 2);
  CHECK(d.is_two_level());
  CHECK_THROWS_AS(d.at(4), DomainError);
  CHECK(DiagonalCoherences{}.at(3) == 1.0);
}

TEST_CASE("uniform coherence matrix covers the allowed pairs") {
  const auto u = CoherenceMatrix::uniform_allowed();
  int count = 0;
  double sum = 0.0;
  for (int n = -3; n <= 3; ++n) {
    for (int m = -4; m <= 4; ++m) {
      if (u.at(n, m) > 0.0) {
        ++count;
        CHECK(selection_rule_allowed(n, m));
      }
      sum += u.at(n, m);
    }
  }
  CHECK(count == 33);
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-15));
  CHECK_THROWS_AS(u.at(4, 0), DomainError);
}

TEST_CASE("coherence matrix rejects forbidden entries") {
  CoherenceMatrix::Weights w{};
  w[CoherenceMatrix::index(0, 3)] = 1.0;
  CHECK_THROWS_AS(CoherenceMatrix::from_weights(w), ValidationError);
  CHECK_THROWS_AS(CoherenceMatrix::normalized(w), ValidationError);
}

TEST_CASE("decay envelopes") {
  CHECK(DecayEnvelope::gaussian(440.0)(440.0) == doctest::Approx(std::exp(-1.0)).epsilon(1e-15));
  CHECK(DecayEnvelope::exponential(100.0)(100.0) == doctest::Approx(std::exp(-1.0)).epsilon(1e-15));
  CHECK(DecayEnvelope::gaussian(1.0)(0.0) == 1.0);
  CHECK(DecayEnvelope::exponential(1.0)(0.0) == 1.0);
  CHECK(DecayEnvelope::none()(1e9) == 1.0);
  CHECK(std::isinf(DecayEnvelope::none().tau_us()));
  CHECK(envelope_eval(DecayEnvelope::gaussian(10.0), 20.0) == doctest::Approx(std::exp(-4.0)));
  CHECK_THROWS_AS(DecayEnvelope::gaussian(1.0)(-1.0), DomainError);
  CHECK_THROWS_AS(DecayEnvelope::gaussian(0.0), ValidationError);
  CHECK_THROWS_AS(DecayEnvelope::exponential(-3.0), ValidationError);
}

TEST_CASE("phase spectrum merges equal harmonics") {
  CoherenceMatrix::Weights w{};
  w[CoherenceMatrix::index(1, 2)] = 0.25;  // k = 3
  w[CoherenceMatrix::index(2, 1)] = 0.25;  // k = 3
  w[CoherenceMatrix::index(3, 4)] = 0.5;   // k = 7
  const auto s = PhaseSpectrum::of(CoherenceMatrix::from_weights(w));
  REQUIRE(s.lines.size() == 2);
  CHECK(s.lines[0].first == 3);
  CHECK(s.lines[0].second == 0.5);
  CHECK(s.bandwidth() == 4);
  CHECK(s.phase_period() == doctest::Approx(kTwoPi / 4));
  CHECK(std::isinf(PhaseSpectrum::of(DiagonalCoherences{}).phase_period()));
}

TEST_CASE("coherent sum matches a direct sum up to a global phase") {
  const auto s = PhaseSpectrum::of(CoherenceMatrix::uniform_allowed());
  for (double phi : {0.0, 0.3, 1.7, 12.5, -4.0}) {
    std::complex<double> direct{};
    for (const auto& [k, w] : s.lines) direct += std::polar(w, k * phi);
    CHECK(std::abs(std::abs(coherent_sum(s, phi)) - std::abs(direct)) < 1e-14);
  }
}

TEST_CASE("single coherence never collapses") {
  CoherenceMatrix::Weights w{};
  w[CoherenceMatrix::index(3, 4)] = 1.0;
  const auto p = ModelParams::unpolarized(CoherenceMatrix::from_weights(w), 0.7);
  for (double t : {0.0, 0.123, 5.0, 77.7}) {
    CHECK(retrieval_general(t, p) == doctest::Approx(1.0).epsilon(1e-14));
  }
}

TEST_CASE("any normalized matrix starts at A0") {
  const auto p = ModelParams::unpolarized(CoherenceMatrix::uniform_allowed(), 0.161,
                                          DecayEnvelope::none(), 2.5);
  CHECK(retrieval_general(0.0, p) == doctest::Approx(2.5).epsilon(1e-14));
}

TEST_CASE("unpolarized revivals every Larmor period at 161 mG") {
  const auto p = ModelParams::unpolarized(CoherenceMatrix::uniform_allowed(), 0.161);
  std::vector<double> t;
  for (int i = 0; i <= 600000; ++i) t.push_back(60.0 * i / 600000.0);
  const auto a = retrieval_curve(t, p);
  const auto peaks = brute_force_peaks(t, a, 0.5);
  REQUIRE(peaks.size() >= 3);
  for (std::size_t i = 1; i < peaks.size(); ++i) {
    CHECK(peaks[i] - peaks[i - 1] == doctest::Approx(17.75).epsilon(0.05 / 17.75));
  }
}

TEST_CASE("sigma+ with a single coherence follows the envelope") {
  const auto env = DecayEnvelope::gaussian(440.0);
  const auto p = ModelParams::sigma_plus(DiagonalCoherences{}, 1.0, env, 1.0);
  for (double t : {0.0, 0.3, 100.0, 440.0}) CHECK(retrieval_sigma_plus(t, p) == doctest::Approx(env(t)));
}

TEST_CASE("equal sigma+ weights collapse completely") {
  const auto p = ModelParams::sigma_plus(DiagonalCoherences::two_level(0.5), 1.0);
  for (int k = 0; k < 4; ++k) {
    const double zero = (2 * k + 1) / (2.0 * 0.7);
    CHECK(std::abs(retrieval_sigma_plus(zero, p)) < 1e-12);
    CHECK(retrieval_sigma_plus(k / 0.7, p) == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("two-level closed form") {
  CHECK(retrieval_two_level(0.0, 0.07, 1.0, DecayEnvelope::none(), 1.0) == doctest::Approx(1.0));
  const double t_min = 1.0 / (4.0 * 0.35);  // cos(2 phi) = -1
  CHECK(retrieval_two_level(t_min, 0.07, 1.0, DecayEnvelope::none(), 1.0) ==
        doctest::Approx(0.7396).epsilon(1e-12));
  CHECK(retrieval_two_level(t_min, 0.5, 1.0, DecayEnvelope::none(), 1.0) ==
        doctest::Approx(0.0).scale(1e-12));
  CHECK_THROWS_AS(retrieval_two_level(0.0, -0.1, 1.0, DecayEnvelope::none(), 1.0), DomainError);
  CHECK_THROWS_AS(retrieval_two_level(-1.0, 0.1, 1.0, DecayEnvelope::none(), 1.0), DomainError);
}

TEST_CASE("retrieval dispatch and scheme checks") {
  const auto two = ModelParams::two_level(0.07, 1.0, DecayEnvelope::gaussian(440.0), 1.3);
  CHECK(retrieval(12.3, two) ==
        doctest::Approx(retrieval_two_level(12.3, 0.07, 1.0, DecayEnvelope::gaussian(440.0), 1.3)));
  CHECK_THROWS_AS(retrieval_general(1.0, two), ValidationError);
  const auto general = ModelParams::unpolarized(CoherenceMatrix::uniform_allowed(), 1.0);
  CHECK_THROWS_AS(retrieval_sigma_plus(1.0, general), ValidationError);
  auto bad = two;
  bad.coherences = DiagonalCoherences::normalized({1, 0, 0, 0, 0, 0, 1});
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = two;
  bad.b_gauss = -1.0;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  CHECK(two.p2() == doctest::Approx(0.07));
  CHECK_THROWS_AS(general.p2(), ValidationError);
}

TEST_CASE("retrieval curve equals pointwise retrieval") {
  const auto p = ModelParams::sigma_plus(DiagonalCoherences::normalized({0, 0, 0, 0.1, 0.2, 0.3, 0.4}),
                                         0.8, DecayEnvelope::exponential(50.0), 0.9);
  const std::vector<double> t = {0.0, 0.5, 3.25, 40.0};
  const auto curve = retrieval_curve(t, p);
  for (std::size_t i = 0; i < t.size(); ++i) CHECK(curve[i] == doctest::Approx(retrieval(t[i], p)));
}

TEST_CASE("relative amplitude and its inverse") {
  CHECK(relative_amplitude(0.07) == doctest::Approx(0.2604).epsilon(1e-15));
  CHECK(relative_amplitude(0.5) == 1.0);
  CHECK(relative_amplitude(0.0) == 0.0);
  CHECK(invert_relative_amplitude(0.25).p2 == doctest::Approx(0.0669873).epsilon(1e-6));
  CHECK(invert_relative_amplitude(0.25).alternate == doctest::Approx(1.0 - 0.0669873));
  CHECK(invert_relative_amplitude(1.0).p2 == 0.5);
  CHECK(invert_relative_amplitude(0.0).p2 == 0.0);
  CHECK_THROWS_AS(invert_relative_amplitude(1.01), DomainError);
  CHECK_THROWS_AS(invert_relative_amplitude(-0.01), DomainError);
  CHECK_THROWS_AS(relative_amplitude(1.01), DomainError);
}

TEST_CASE("revival times") {
  const auto u = revival_times(0.161, Scheme::Unpolarized, 60.0);
  REQUIRE(u.size() == 4);
  CHECK(u[0] == 0.0);
  CHECK(u[1] == doctest::Approx(17.7462).epsilon(1e-5));
  CHECK(u[3] == doctest::Approx(53.2387).epsilon(1e-5));
  const auto s = revival_times(1.0, Scheme::SigmaPlus, 3.0);
  REQUIRE(s.size() == 3);
  CHECK(s[1] == doctest::Approx(1.4285714).epsilon(1e-7));
  CHECK(s[2] == doctest::Approx(2.8571429).epsilon(1e-7));
  CHECK(revival_times(2.0, Scheme::TwoLevel, 1e-3).front() == 0.0);
  CHECK_THROWS_AS(revival_times(0.0, Scheme::SigmaPlus, 10.0), NumericalError);
  CHECK_THROWS_AS(revival_times(1.0, Scheme::SigmaPlus, 0.0), DomainError);
  CHECK(std::isinf(revival_period(0.0, Scheme::Unpolarized)));
}

TEST_CASE("oscillation extrema") {
  const TimeWindow window{0.0, 3.0};
  const auto two = oscillation_extrema(ModelParams::two_level(0.07, 1.0), window);
  CHECK(two.a_max == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(two.a_min == doctest::Approx(0.7396).epsilon(1e-12));
  CHECK(two.relative_amplitude() == doctest::Approx(relative_amplitude(0.07)).epsilon(1e-9));

  const auto single = oscillation_extrema(ModelParams::sigma_plus(DiagonalCoherences{}, 1.0), window);
  CHECK(single.a_max == doctest::Approx(1.0));
  CHECK(single.a_min == doctest::Approx(1.0));

  CHECK_THROWS_AS(oscillation_extrema(ModelParams::two_level(0.07, 1.0), {0.0, 0.5}), DomainError);
  CHECK_THROWS_AS(oscillation_extrema(ModelParams::two_level(0.07, 0.0), window), DomainError);
  CHECK_THROWS_AS(oscillation_extrema(ModelParams::two_level(0.07, 1.0), {2.0, 1.0}), DomainError);
}

TEST_CASE("three equal coherences against a dense-grid oracle") {
  const auto p = ModelParams::sigma_plus(
      DiagonalCoherences::normalized({0, 0, 0, 0, 1.0 / 3, 1.0 / 3, 1.0 / 3}), 1.0);
  const auto e = oscillation_extrema(p, {0.0, 1.0 / 0.7});
  double hi = 0.0;
  double lo = 1e300;
  for (int i = 0; i <= 400000; ++i) {
    const double a = retrieval(i * (1.0 / 0.7) / 400000, p);
    hi = std::max(hi, a);
    lo = std::min(lo, a);
  }
  CHECK(e.a_max == doctest::Approx(hi).epsilon(1e-6));
  CHECK(std::abs(e.a_min - lo) < 1e-6);
  // |1 + z + z^2|^2 / 9 has minimum 0 at z = exp(2 pi i / 3).
  CHECK(std::abs(e.a_min) < 1e-10);
}

TEST_CASE("phase-domain extrema") {
  const auto e = interference_extrema(PhaseSpectrum::of(DiagonalCoherences::two_level(0.07)));
  CHECK(e.a_max == doctest::Approx(1.0));
  CHECK(e.a_min == doctest::Approx(0.7396));
  const auto flat = interference_extrema(PhaseSpectrum::of(DiagonalCoherences{}));
  CHECK(flat.relative_amplitude() == 0.0);
  const auto u = interference_extrema(PhaseSpectrum::of(CoherenceMatrix::uniform_allowed()));
  CHECK(u.a_max == doctest::Approx(1.0));
  CHECK(u.a_min >= 0.0);
  CHECK(u.a_min < 0.05);
}

}
