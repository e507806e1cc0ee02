#include <doctest.h>

#include <iostream>

#include "property_suite.hpp"

namespace {

void check_module(const std::string& module) {
  int seen = 0;
  for (const auto& property : qmem::props::all_properties()) {
    if (property.module != module) continue;
    ++seen;
    const auto outcome = qmem::props::run_property(property);
    INFO(property.name << ": " << outcome.failures << " of " << outcome.cases
                       << " cases failed; first: " << outcome.first_failure);
    CHECK(outcome.passed());
    MESSAGE(property.name << " (" << outcome.cases << " cases, " << outcome.seconds << " s)");
  }
  CHECK(seen > 0);
}

}  // namespace

TEST_CASE("zeeman-core properties") { check_module("zeeman-core"); }
TEST_CASE("interference properties") { check_module("interference"); }
TEST_CASE("populations properties") { check_module("populations"); }
TEST_CASE("dephasing properties") { check_module("dephasing"); }
TEST_CASE("estimation properties") { check_module("estimation"); }
TEST_CASE("scan-cli properties") { check_module("scan-cli"); }
