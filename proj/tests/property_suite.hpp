#pragma once

// Randomized invariant checks shared by the property tests and the
// acceptance runner. Each property draws its own cases from a seeded
// generator, so a run is reproducible from the seed alone.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace qmem::props {

struct Outcome {
  std::string module;
  std::string name;
  int cases = 0;
  int failures = 0;
  std::string first_failure;  // counterexample description
  double seconds = 0.0;

  bool passed() const noexcept { return cases > 0 && failures == 0; }
};

struct Property {
  std::string module;
  std::string name;
  std::function<Outcome(std::uint64_t seed)> run;
};

inline constexpr int kCases = 1000;

const std::vector<Property>& all_properties();

Outcome run_property(const Property& property, std::uint64_t seed = 20240917);

}  // namespace qmem::props
