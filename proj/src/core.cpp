#include "mvexpectile/core.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "mvexpectile/kernels.hpp"

namespace mvexpectile {

void require_same_dim(std::size_t expected, std::size_t actual, const char* what) {
  if (expected != actual) {
    std::ostringstream msg;
    msg << what << ": expected dimension " << expected << ", got " << actual;
    throw DimensionMismatch(msg.str());
  }
}

Level::Level(double alpha) : alpha_(alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    std::ostringstream msg;
    msg << "level must lie in (0,1), got " << alpha;
    throw InvalidParameter(msg.str());
  }
}

ScoringMatrix::ScoringMatrix(Matrix entries) : entries_(std::move(entries)) {
  const Eigen::Index d = entries_.rows();
  if (d < 1 || entries_.cols() != d) {
    throw InvalidParameter("scoring matrix must be square and non-empty");
  }
  if (!entries_.allFinite()) throw InvalidParameter("scoring matrix has non-finite entries");
  for (Eigen::Index i = 0; i < d; ++i) {
    if (!(entries_(i, i) > 0.0)) {
      throw InvalidParameter("scoring matrix diagonal must be positive");
    }
    for (Eigen::Index j = 0; j < d; ++j) {
      if (entries_(i, j) != entries_(j, i)) {
        throw InvalidParameter("scoring matrix must be symmetric");
      }
      if (entries_(i, j) < 0.0) {
        throw InvalidParameter("scoring matrix entries must be non-negative");
      }
      if (entries_(i, j) > entries_(i, i)) {
        throw InvalidParameter("scoring matrix requires pi_ii >= pi_ij");
      }
    }
  }
  Eigen::SelfAdjointEigenSolver<Matrix> eig(entries_, Eigen::EigenvaluesOnly);
  lambda_min_ = eig.eigenvalues().minCoeff();
  if (lambda_min_ < -kPsdTolerance) {
    std::ostringstream msg;
    msg << "scoring matrix is not positive semi-definite (lambda_min = " << lambda_min_ << ")";
    throw InvalidParameter(msg.str());
  }
}

ScoringMatrix ScoringMatrix::identity(std::size_t dim) {
  const auto d = static_cast<Eigen::Index>(dim);
  return ScoringMatrix(Matrix::Identity(d, d));
}

ScoringMatrix ScoringMatrix::ones(std::size_t dim) {
  const auto d = static_cast<Eigen::Index>(dim);
  return ScoringMatrix(Matrix::Ones(d, d));
}

ScoringMatrix ScoringMatrix::diagonal(const Vector& weights) {
  return ScoringMatrix(Matrix(weights.asDiagonal()));
}

bool ScoringMatrix::is_diagonal() const {
  const Eigen::Index d = entries_.rows();
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j)
      if (i != j && entries_(i, j) != 0.0) return false;
  return true;
}

SampleMatrix::SampleMatrix(Matrix rows) : data_(std::move(rows)) {
  if (data_.rows() < 1 || data_.cols() < 1) {
    throw InvalidParameter("sample must have at least one row and one column");
  }
  if (!data_.allFinite()) throw InvalidParameter("sample has non-finite entries");
}

SampleMatrix SampleMatrix::from_rows(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) throw InvalidParameter("sample must have at least one row");
  const std::size_t d = rows.front().size();
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(d));
  for (std::size_t j = 0; j < rows.size(); ++j) {
    require_same_dim(d, rows[j].size(), "sample row");
    for (std::size_t k = 0; k < d; ++k)
      m(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) = rows[j][k];
  }
  return SampleMatrix(std::move(m));
}

std::span<const double> SampleMatrix::column(std::size_t k) const {
  if (k >= dim()) throw InvalidParameter("column index out of range");
  return {data_.col(static_cast<Eigen::Index>(k)).data(), rows()};
}

double SampleMatrix::column_min(std::size_t k) const {
  const auto c = column(k);
  return *std::min_element(c.begin(), c.end());
}

double SampleMatrix::column_max(std::size_t k) const {
  const auto c = column(k);
  return *std::max_element(c.begin(), c.end());
}

namespace {

void check_operands(const Vector& x, const SampleMatrix& sample, const ScoringMatrix& sigma) {
  require_same_dim(sigma.dim(), sample.dim(), "sample vs scoring matrix");
  require_same_dim(sample.dim(), static_cast<std::size_t>(x.size()), "point vs sample");
}

}  // namespace

double score(const Vector& x, const SampleMatrix& sample, const ScoringMatrix& sigma,
             Level level) {
  check_operands(x, sample, sigma);
  const std::size_t d = sample.dim();
  double gains = 0.0;
  double losses = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t k = i; k < d; ++k) {
      const double w = sigma(i, k) * (i == k ? 1.0 : 2.0);
      if (w == 0.0) continue;
      const auto s = kernels::product_sums(sample.column(i), sample.column(k), x[i], x[k]);
      gains += w * s.upper;
      losses += w * s.lower;
    }
  }
  const double a = level.value();
  return (a * gains + (1.0 - a) * losses) / static_cast<double>(sample.rows());
}

Vector residual(const Vector& x, const SampleMatrix& sample, const ScoringMatrix& sigma,
                Level level) {
  check_operands(x, sample, sigma);
  const std::size_t d = sample.dim();
  const double a = level.value();
  const double inv_n = 1.0 / static_cast<double>(sample.rows());
  Vector r = Vector::Zero(static_cast<Eigen::Index>(d));
  for (std::size_t k = 0; k < d; ++k) {
    double acc = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      const double w = sigma(k, i);
      if (w == 0.0) continue;
      const auto s = kernels::stop_loss_sums(sample.column(i), sample.column(k), x[i], x[k]);
      acc += w * (a * s.upper - (1.0 - a) * s.lower);
    }
    r[static_cast<Eigen::Index>(k)] = acc * inv_n;
  }
  return r;
}

std::pair<double, double> stop_loss_terms(const Vector& x, const SampleMatrix& sample,
                                          std::size_t i, std::size_t k) {
  require_same_dim(sample.dim(), static_cast<std::size_t>(x.size()), "point vs sample");
  if (i >= sample.dim() || k >= sample.dim()) {
    throw InvalidParameter("stop-loss index out of range");
  }
  const auto s = kernels::stop_loss_sums(sample.column(i), sample.column(k), x[i], x[k]);
  const double inv_n = 1.0 / static_cast<double>(sample.rows());
  return {s.upper * inv_n, s.lower * inv_n};
}

Vector observation(const Vector& x, std::span<const double> row, const ScoringMatrix& sigma,
                   Level level) {
  const std::size_t d = sigma.dim();
  require_same_dim(d, row.size(), "observation row");
  require_same_dim(d, static_cast<std::size_t>(x.size()), "observation point");
  const double a = level.value();
  Vector z(static_cast<Eigen::Index>(d));
  for (std::size_t k = 0; k < d; ++k) {
    const auto ek = static_cast<Eigen::Index>(k);
    double acc = 0.0;
    if (row[k] > x[ek]) {
      for (std::size_t i = 0; i < d; ++i)
        acc += sigma(k, i) * a * std::max(row[i] - x[static_cast<Eigen::Index>(i)], 0.0);
    } else if (row[k] < x[ek]) {
      for (std::size_t i = 0; i < d; ++i)
        acc -= sigma(k, i) * (1.0 - a) * std::max(x[static_cast<Eigen::Index>(i)] - row[i], 0.0);
    }
    z[ek] = acc;
  }
  return z;
}

}  // namespace mvexpectile
