#pragma once

// Deterministic solvers: damped Newton on the closed-form optimality system
// of a catalogued model, exact minimisation of the empirical matrix score,
// and the L^p expectile of a sample.

#include <functional>
#include <optional>

#include "mvexpectile/core.hpp"
#include "mvexpectile/distributions.hpp"

namespace mvexpectile {

struct NewtonConfig {
  double tol = 1e-10;           // residual max-norm
  int max_iter = 100;
  double jacobian_step = 1e-6;  // relative central-difference step
  double damping = 0.5;         // backtracking factor
  int max_halvings = 30;

  void validate() const;
};

struct EmpiricalConfig {
  double tol = 1e-10;  // stationarity, in residual units
  int max_iter = 1000;  // coordinate sweeps
  double armijo = 1e-4;
  int max_halvings = 30;

  void validate() const;
};

struct LpConfig {
  double p = 2.0;
  double tol = 1e-9;
  int max_iter = 20000;
  double armijo = 1e-4;
  int max_halvings = 40;

  void validate() const;
};

using SystemFn = std::function<Vector(const Vector&)>;

/// Damped Newton with a central finite-difference Jacobian. Never throws on
/// failure: a singular Jacobian or exhausted backtracking returns the best
/// iterate with converged = false.
ExpectileResult newton_solve(const SystemFn& system, Vector x0, const NewtonConfig& config = {});

/// Central finite-difference Jacobian with relative step h (1 + |x_j|).
Matrix finite_difference_jacobian(const SystemFn& system, const Vector& x, double step);

/// Expectile of a catalogued model from its closed-form optimality system.
/// Default start: the coordinatewise univariate expectiles.
ExpectileResult solve_analytic(const ModelSpec& model, const ScoringMatrix& sigma, Level level,
                               const NewtonConfig& config = {},
                               std::optional<Vector> x0 = std::nullopt);

/// Minimiser of the empirical matrix score. Uses exact coordinate
/// minimisation of the piecewise-quadratic score, with Newton steps on the
/// current quadratic piece under an Armijo line search. Rows are put in
/// canonical (lexicographic) order first, so any permutation of the sample
/// gives a bit-identical answer. residual_norm reports empirical_stationarity.
ExpectileResult solve_empirical(const SampleMatrix& sample, const ScoringMatrix& sigma,
                                Level level, const EmpiricalConfig& config = {});

/// Distance of zero from the coordinatewise one-sided derivatives of the
/// empirical score, scaled to residual units (gradient = -2 residual). Equals
/// the residual max-norm when no sample coordinate ties x; stays meaningful
/// at kinks, where the strict residual jumps.
double empirical_stationarity(const Vector& x, const SampleMatrix& sample,
                              const ScoringMatrix& sigma, Level level);

/// Mean of alpha ||(X-x)_+||_p^2 + (1-alpha) ||(x-X)_+||_p^2.
double lp_score(const Vector& x, const SampleMatrix& sample, double p, Level level);
/// alpha E[||u||^{2-p} u_k^{p-1}] - (1-alpha) E[||v||^{2-p} v_k^{p-1}] with
/// u = (X-x)_+, v = (x-X)_+; a block with zero norm contributes nothing.
Vector lp_residual(const Vector& x, const SampleMatrix& sample, double p, Level level);

/// L^p expectile, 1 <= p < inf. p = 1 is the all-ones matrix expectile and
/// p = 2 the vector of marginal expectiles.
ExpectileResult solve_lp(const SampleMatrix& sample, double p, Level level,
                         const LpConfig& config = {});

}  // namespace mvexpectile
