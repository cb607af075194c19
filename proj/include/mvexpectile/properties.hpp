#pragma once

// Randomised coherence checks on the empirical matrix expectile.

#include <cstdint>
#include <string>
#include <vector>

#include "mvexpectile/core.hpp"

namespace mvexpectile {

struct PropertyReport {
  std::string name;
  std::size_t instances = 0;  // instances evaluated
  std::size_t skipped = 0;    // instances dropped after a non-convergent solve
  double max_violation = 0.0;
  double tolerance = 0.0;
  bool passed = false;  // max_violation <= tolerance and at least one instance evaluated
};

/// Property names, in report order.
const std::vector<std::string>& property_names();

/// Draws `instances` random problems (scoring matrix, sample from a catalogued
/// model, level in [0.05, 0.95]) and checks each property on every one.
/// Violations are measured relative to max(1, |reference|).
std::vector<PropertyReport> run_property_suite(std::uint64_t seed, std::size_t instances,
                                               double tol);

/// Random scoring matrix: positive diagonal plus non-negative multiples of
/// block indicator outer products, which keeps it PSD with dominant diagonal.
ScoringMatrix random_scoring_matrix(std::size_t dim, std::uint64_t seed);

}  // namespace mvexpectile
