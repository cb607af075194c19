#pragma once

// Quantities derived from solved expectiles: the level implied by a point,
// the sensitivity of the expectile to its level, and the limits as the level
// tends to 0 or 1.

#include <cstdint>
#include <optional>
#include <vector>

#include "mvexpectile/core.hpp"
#include "mvexpectile/distributions.hpp"
#include "mvexpectile/solve_deterministic.hpp"

namespace mvexpectile {

/// Per coordinate k: L_k / (U_k + L_k) with
///   U_k = sum_i pi_ki E[(X_i - x_i)_+ 1{X_k > x_k}],
///   L_k = sum_i pi_ki E[(x_i - X_i)_+ 1{X_k < x_k}],
/// the level at which x solves the k-th optimality equation. nullopt where
/// the denominator vanishes.
std::vector<std::optional<double>> alpha_of_point(const Vector& x, const SampleMatrix& sample,
                                                  const ScoringMatrix& sigma);
std::vector<std::optional<double>> alpha_of_point(const Vector& x, const ModelSpec& model,
                                                  const ScoringMatrix& sigma);

struct AlphaDerivativeSystem {
  Vector A;
  Vector B;
  Matrix Gamma;
  Vector solution;        // dx/dalpha
  double condition = 0.0;  // 2-norm condition number of diag(B) + Gamma

  Matrix matrix() const { return Matrix(B.asDiagonal()) + Gamma; }
};

struct AlphaDerivativeOptions {
  std::size_t mc_draws = 1000000;  // conditional expectations under FGM
  std::uint64_t seed = 7;
  double max_condition = 1e12;
};

/// Solves (diag(B) + Gamma) dx/dalpha = A at the expectile x_star of level.
AlphaDerivativeSystem alpha_derivative(const Vector& x_star, Level level, const ModelSpec& model,
                                       const ScoringMatrix& sigma,
                                       const AlphaDerivativeOptions& options = {});

struct AsymptoticRow {
  double alpha = 0.0;
  ExpectileResult result;
};

struct AsymptoticTable {
  std::vector<AsymptoticRow> rows;  // ascending alpha
  std::size_t failed_solves = 0;
  /// Each coordinate strictly increasing along converged rows.
  bool increasing = false;
  /// Largest coordinate distance from the lower support bound 0 at the
  /// smallest level.
  double lower_gap = 0.0;
  bool approaches_lower = false;  // lower_gap <= lower_tol
  /// Smallest ratio x_k / E[X_k] at the largest level.
  double upper_ratio = 0.0;
  bool grows_upper = false;  // upper_ratio >= upper_ratio_min
};

struct AsymptoticOptions {
  NewtonConfig newton;
  double lower_tol = 0.05;
  double upper_ratio_min = 10.0;
};

/// Solves the closed-form system along the given levels. Non-convergent
/// levels are recorded and skipped in the checks.
AsymptoticTable asymptotic_sweep(const ModelSpec& model, const ScoringMatrix& sigma,
                                 std::vector<double> alphas,
                                 const AsymptoticOptions& options = {});

}  // namespace mvexpectile
