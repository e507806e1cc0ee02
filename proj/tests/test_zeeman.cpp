#include <doctest.h>

#include <cmath>
#include <limits>

#include "qmem/errors.hpp"
#include "qmem/zeeman.hpp"

using namespace qmem;

TEST_SUITE("zeeman") {

TEST_CASE("larmor frequency anchors") {
  CHECK(larmor_frequency(1.0) == doctest::Approx(0.35).epsilon(1e-15));
  CHECK(larmor_frequency(0.0) == 0.0);
  CHECK(larmor_frequency(0.161) == doctest::Approx(0.05635).epsilon(1e-12));
  PhysicalConstants c;
  c.g_factor_mhz_per_gauss = 0.7;
  CHECK(larmor_frequency(2.0, c) == doctest::Approx(1.4));
}

TEST_CASE("larmor frequency rejects negative or NaN fields") {
  CHECK_THROWS_AS(larmor_frequency(-1e-9), DomainError);
  CHECK_THROWS_AS(larmor_frequency(std::nan("")), DomainError);
}

TEST_CASE("stretched-state spin-wave detuning") {
  CHECK(spin_wave_detuning(3, 3, 1.0) == doctest::Approx(2.1).epsilon(1e-15));
  CHECK(spin_wave_detuning(3, 3, 2.6) == doctest::Approx(5.46).epsilon(1e-15));
  CHECK(spin_wave_detuning(0, 0, 5.0) == 0.0);
  CHECK(spin_wave_detuning(-3, -4, 1.0) == doctest::Approx(-2.45));
}

TEST_CASE("spin-wave detuning range checks") {
  CHECK_THROWS_AS(spin_wave_detuning(4, 0, 1.0), DomainError);
  CHECK_THROWS_AS(spin_wave_detuning(0, 5, 1.0), DomainError);
  CHECK_THROWS_AS(spin_wave_detuning(0, 0, -1.0), DomainError);
  CHECK_NOTHROW(spin_wave_detuning(-3, -4, 0.0));
}

TEST_CASE("selection rule examples") {
  CHECK(selection_rule_allowed(3, 4));
  CHECK_FALSE(selection_rule_allowed(0, 3));
  CHECK(selection_rule_allowed(-3, -1));
  CHECK_FALSE(selection_rule_allowed(4, 4));   // n outside F = 3
  CHECK_FALSE(selection_rule_allowed(0, -5));  // m outside F = 4
  static_assert(selection_rule_allowed(2, 2));
}

TEST_CASE("sublevel index validity") {
  CHECK(SublevelIndex{3, -3}.valid());
  CHECK(SublevelIndex{4, 4}.valid());
  CHECK_FALSE(SublevelIndex{3, 4}.valid());
  CHECK_FALSE(SublevelIndex{2, 0}.valid());
}

TEST_CASE("scheme names round-trip") {
  for (auto s : {Scheme::Unpolarized, Scheme::SigmaPlus, Scheme::TwoLevel}) {
    CHECK(parse_scheme(to_string(s)) == s);
  }
  CHECK(parse_scheme("two_level") == Scheme::TwoLevel);
  CHECK(parse_scheme("sigma-plus") == Scheme::SigmaPlus);
  CHECK_THROWS_AS(parse_scheme("pi"), ValidationError);
}

TEST_CASE("constants validation") {
  PhysicalConstants c;
  CHECK_NOTHROW(c.validate());
  c.g_factor_mhz_per_gauss = 0.0;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = {};
  c.cs_mass_kg = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(c.validate(), ValidationError);
}

}
