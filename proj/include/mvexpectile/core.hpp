#pragma once

// Shared math substrate: level, scoring matrix and sample types, the matrix
// score, its per-coordinate optimality residual and the bivariate stop-loss
// estimators everything else is assembled from.

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace mvexpectile {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes disagree (sample dimension vs. matrix vs. point).
class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

/// A value violates the invariant of the type or operation it was passed to.
class InvalidParameter : public Error {
 public:
  using Error::Error;
};

/// The request is well formed but outside what the library implements.
class UnsupportedParameter : public Error {
 public:
  using Error::Error;
};

/// Risk level alpha, restricted to the open unit interval.
class Level {
 public:
  explicit Level(double alpha);

  double value() const noexcept { return alpha_; }
  Level complement() const { return Level(1.0 - alpha_); }

 private:
  double alpha_;
};

/// Symmetric positive semi-definite matrix (pi_ij) defining the score's
/// quadratic form. Construction enforces exact symmetry, pi_ii > 0,
/// pi_ii >= pi_ij >= 0 and lambda_min >= -1e-10.
class ScoringMatrix {
 public:
  static constexpr double kPsdTolerance = 1e-10;

  explicit ScoringMatrix(Matrix entries);

  static ScoringMatrix identity(std::size_t dim);
  static ScoringMatrix ones(std::size_t dim);
  static ScoringMatrix diagonal(const Vector& weights);

  std::size_t dim() const noexcept { return static_cast<std::size_t>(entries_.rows()); }
  double operator()(std::size_t i, std::size_t j) const {
    return entries_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  }
  const Matrix& matrix() const noexcept { return entries_; }
  double lambda_min() const noexcept { return lambda_min_; }
  bool is_diagonal() const;

 private:
  Matrix entries_;
  double lambda_min_ = 0.0;
};

/// n observations of a d-dimensional vector. Stored column-major so every
/// coordinate is one contiguous array.
class SampleMatrix {
 public:
  explicit SampleMatrix(Matrix rows);

  static SampleMatrix from_rows(const std::vector<std::vector<double>>& rows);

  std::size_t rows() const noexcept { return static_cast<std::size_t>(data_.rows()); }
  std::size_t dim() const noexcept { return static_cast<std::size_t>(data_.cols()); }

  std::span<const double> column(std::size_t k) const;
  Vector row(std::size_t j) const { return data_.row(static_cast<Eigen::Index>(j)).transpose(); }
  double operator()(std::size_t j, std::size_t k) const {
    return data_(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k));
  }
  const Matrix& matrix() const noexcept { return data_; }

  double column_min(std::size_t k) const;
  double column_max(std::size_t k) const;

 private:
  Matrix data_;
};

struct ExpectileResult {
  Vector point;
  double residual_norm = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<Vector> trace;
};

/// Mean over rows of alpha (X-x)_+' S (X-x)_+ + (1-alpha) (X-x)_-' S (X-x)_-.
double score(const Vector& x, const SampleMatrix& sample, const ScoringMatrix& sigma,
             Level level);

/// Sample mean of the observation Phi(x, X_j); component k is
///   alpha sum_i pi_ki E[(X_i-x_i)_+ 1{X_k>x_k}]
///   - (1-alpha) sum_i pi_ki E[(x_i-X_i)_+ 1{x_k>X_k}].
/// Ties X_k == x_k fall on neither side.
Vector residual(const Vector& x, const SampleMatrix& sample, const ScoringMatrix& sigma,
                Level level);

/// (E[(X_i-x_i)_+ 1{X_k>x_k}], E[(x_i-X_i)_+ 1{x_k>X_k}]) over the sample.
std::pair<double, double> stop_loss_terms(const Vector& x, const SampleMatrix& sample,
                                          std::size_t i, std::size_t k);

/// Single-observation Phi(x, X); residual() is its sample mean.
Vector observation(const Vector& x, std::span<const double> row, const ScoringMatrix& sigma,
                   Level level);

void require_same_dim(std::size_t expected, std::size_t actual, const char* what);

}  // namespace mvexpectile
