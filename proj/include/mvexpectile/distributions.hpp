#pragma once

// Model catalogue: exponential and Pareto (Lomax) marginals joined by the
// independence or FGM copula, exact samplers, closed-form bivariate
// stop-loss transforms, and the explicit L1 optimality systems of the three
// worked bivariate models.

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "mvexpectile/core.hpp"

namespace mvexpectile {

class MarginalSpec {
 public:
  enum class Family { Exponential, Pareto };

  static MarginalSpec exponential(double rate);
  /// Lomax form: survival (scale / (scale + x))^shape on [0, inf); shape > 1.
  static MarginalSpec pareto(double shape, double scale);

  Family family() const noexcept { return family_; }
  double rate() const noexcept { return p1_; }
  double shape() const noexcept { return p1_; }
  double scale() const noexcept { return p2_; }

  double mean() const;
  double cdf(double x) const;
  double survival(double x) const;
  double pdf(double x) const;
  double quantile(double u) const;

  /// E[(X - x)_+]
  double upper_stop_loss(double x) const;
  /// E[(x - X)_+]
  double lower_stop_loss(double x) const;
  /// int_x^inf S(t)^2 dt, with S = 1 below the support.
  double squared_survival_integral(double x) const;
  /// int_{-inf}^x F(t) S(t) dt
  double cdf_survival_integral(double x) const;

 private:
  MarginalSpec(Family f, double p1, double p2) : family_(f), p1_(p1), p2_(p2) {}

  Family family_;
  double p1_;
  double p2_;
};

class CopulaSpec {
 public:
  enum class Family { Independence, Fgm };

  static CopulaSpec independence() { return CopulaSpec(Family::Independence, 0.0); }
  static CopulaSpec fgm(double theta);

  Family family() const noexcept { return family_; }
  double theta() const noexcept { return theta_; }

  /// C(u, v); independence returns u v.
  double operator()(double u, double v) const;

 private:
  CopulaSpec(Family f, double theta) : family_(f), theta_(theta) {}

  Family family_;
  double theta_;
};

class ModelSpec {
 public:
  ModelSpec(std::vector<MarginalSpec> marginals, CopulaSpec copula);

  std::size_t dim() const noexcept { return marginals_.size(); }
  const MarginalSpec& marginal(std::size_t i) const { return marginals_.at(i); }
  const std::vector<MarginalSpec>& marginals() const noexcept { return marginals_; }
  const CopulaSpec& copula() const noexcept { return copula_; }

  Vector means() const;

  /// E[(X_i - x_i)_+ 1{X_k > x_k}]; for i == k the marginal stop-loss.
  double joint_upper(std::size_t i, std::size_t k, double xi, double xk) const;
  /// E[(x_i - X_i)_+ 1{X_k < x_k}]
  double joint_lower(std::size_t i, std::size_t k, double xi, double xk) const;
  /// P(X_i > x_i, X_k > x_k)
  double prob_both_above(std::size_t i, std::size_t k, double xi, double xk) const;
  /// P(X_i < x_i, X_k < x_k)
  double prob_both_below(std::size_t i, std::size_t k, double xi, double xk) const;

 private:
  std::vector<MarginalSpec> marginals_;
  CopulaSpec copula_;
};

/// Deviates in the open interval (0,1) from a 64-bit Mersenne twister.
class UniformStream {
 public:
  explicit UniformStream(std::uint64_t seed);
  double next();

 private:
  std::mt19937_64 engine_;
};

/// Stream of i.i.d. draws from a model; owns its generator.
class ModelStream {
 public:
  ModelStream(const ModelSpec& model, std::uint64_t seed);
  void draw(std::span<double> out);

 private:
  ModelSpec model_;
  UniformStream uniforms_;
};

SampleMatrix sample(const ModelSpec& model, std::size_t n, std::uint64_t seed);

/// Root v in (0,1) of dC/du(u, v) = t for the FGM copula, i.e. of
/// a v^2 - (1 + a) v + t = 0 with a = theta (1 - 2u).
double fgm_conditional_inverse(double u, double t, double theta);

/// Seed mixing for independent streams derived from one master seed.
std::uint64_t split_seed(std::uint64_t master, std::uint64_t counter);

/// Per-coordinate residual sum_i pi_ki (alpha E[(X_i-x_i)_+ 1{X_k>x_k}]
/// - (1-alpha) E[(x_i-X_i)_+ 1{X_k<x_k}]) from the model's closed forms.
Vector model_residual(const ModelSpec& model, const ScoringMatrix& sigma, Level level,
                      const Vector& x);

// Explicit bivariate L1 systems (all-ones scoring matrix). "own" is the
// coordinate whose equation is evaluated, "other" the remaining one.

/// (2a-1)(1/b) e^{-b x} - (1-a)(x - 1/b)
double l_exponential(double rate, double x, Level level);
/// (1-a)(x_o - (1 - e^{-b_o x_o})/b_o)(1 - e^{-b x}) - a (1/b_o) e^{-b_o x_o} e^{-b x}
double exponential_indep_rhs(double rate_own, double rate_other, double x_own, double x_other,
                             Level level);
/// Left minus right side of both equations.
Vector exponential_indep_system(double rate1, double rate2, const Vector& x, Level level);

/// (2a-1)(b/(s-1))(b/(b+x))^{s-1} - (1-a)(x - b/(s-1))
double l_pareto(double shape, double scale, double x, Level level);
/// l_{X_j,X_i}(x_j, x_i) for independent Lomax marginals.
double l_pareto_cross(double shape, double scale_j, double scale_i, double x_j, double x_i,
                      Level level);
/// l_{X_i}(x_i) + l_{X_j,X_i}(x_j, x_i) for both coordinates.
Vector pareto_indep_system(double shape, double scale1, double scale2, const Vector& x,
                           Level level);

/// Right side of the FGM-exponential equation of coordinate "own"; the left
/// side is l_exponential(rate_own, x_own, level).
double fgm_exponential_rhs(double rate_own, double rate_other, double x_own, double x_other,
                           double theta, Level level);
Vector fgm_exponential_system(double rate1, double rate2, double theta, const Vector& x,
                              Level level);

}  // namespace mvexpectile
