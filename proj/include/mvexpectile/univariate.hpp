#pragma once

// Scalar expectile: the unique root of
//   h(x) = alpha E[(X - x)_+] - (1 - alpha) E[(x - X)_+],
// a continuous strictly decreasing function, located by bisection.

#include <span>
#include <variant>

#include "mvexpectile/core.hpp"
#include "mvexpectile/distributions.hpp"

namespace mvexpectile {

struct UnivariateExpectileQuery {
  std::variant<std::span<const double>, MarginalSpec> data;
  Level level;
};

double univariate_expectile(std::span<const double> sample, Level level);
double univariate_expectile(const MarginalSpec& marginal, Level level);
double univariate_expectile(const UnivariateExpectileQuery& query);

/// Coordinatewise univariate expectiles of a sample or model.
Vector marginal_expectiles(const SampleMatrix& sample, Level level);
Vector marginal_expectiles(const ModelSpec& model, Level level);

}  // namespace mvexpectile
