#include "mvexpectile/properties.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <optional>
#include <random>

#include "mvexpectile/distributions.hpp"
#include "mvexpectile/solve_deterministic.hpp"
#include "mvexpectile/univariate.hpp"

namespace mvexpectile {

const std::vector<std::string>& property_names() {
  static const std::vector<std::string> names = {
      "positive_homogeneity", "translation_invariance", "law_invariance",
      "pseudo_invariance",    "alpha_symmetry",         "independence_reduction",
      "support_stability",    "strong_intern_monotony"};
  return names;
}

namespace {

using Rng = std::mt19937_64;

double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

std::size_t pick(Rng& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

Matrix random_scoring_entries(std::size_t dim, Rng& rng) {
  const auto d = static_cast<Eigen::Index>(dim);
  Matrix m = Matrix::Zero(d, d);
  for (Eigen::Index i = 0; i < d; ++i) m(i, i) = uniform(rng, 0.2, 1.5);
  const std::size_t blocks = pick(rng, 1, dim + 1);
  for (std::size_t b = 0; b < blocks; ++b) {
    Vector ind = Vector::Zero(d);
    for (Eigen::Index i = 0; i < d; ++i) ind[i] = rng() % 2 == 0 ? 1.0 : 0.0;
    m += uniform(rng, 0.0, 1.0) * ind * ind.transpose();
  }
  return m;
}

MarginalSpec random_marginal(Rng& rng) {
  if (rng() % 2 == 0) return MarginalSpec::exponential(uniform(rng, 0.05, 2.0));
  return MarginalSpec::pareto(uniform(rng, 1.5, 4.0), uniform(rng, 0.5, 20.0));
}

ModelSpec random_model(std::size_t dim, Rng& rng) {
  std::vector<MarginalSpec> marginals;
  for (std::size_t i = 0; i < dim; ++i) marginals.push_back(random_marginal(rng));
  if (dim == 2 && rng() % 2 == 0)
    return ModelSpec(std::move(marginals), CopulaSpec::fgm(uniform(rng, -1.0, 1.0)));
  return ModelSpec(std::move(marginals), CopulaSpec::independence());
}

std::optional<ScoringMatrix> try_scoring(Matrix m) {
  try {
    return ScoringMatrix(std::move(m));
  } catch (const InvalidParameter&) {
    return std::nullopt;
  }
}

double relative_gap(const Vector& got, const Vector& want) {
  double worst = 0.0;
  for (Eigen::Index k = 0; k < want.size(); ++k)
    worst = std::max(worst, std::abs(got[k] - want[k]) / std::max(1.0, std::abs(want[k])));
  return worst;
}

SampleMatrix transformed(const SampleMatrix& s, const std::function<double(std::size_t, std::size_t, double)>& f) {
  Matrix m = s.matrix();
  for (Eigen::Index j = 0; j < m.rows(); ++j)
    for (Eigen::Index k = 0; k < m.cols(); ++k)
      m(j, k) = f(static_cast<std::size_t>(j), static_cast<std::size_t>(k), m(j, k));
  return SampleMatrix(std::move(m));
}

struct Outcome {
  bool skipped = false;
  double violation = 0.0;
};

class Instance {
 public:
  Instance(std::uint64_t seed) : rng_(seed) {
    dim_ = pick(rng_, 2, 3);
    sigma_.emplace(random_scoring_entries(dim_, rng_));
    model_.emplace(random_model(dim_, rng_));
    sample_.emplace(sample(*model_, pick(rng_, 20, 60), rng_()));
    level_ = uniform(rng_, 0.05, 0.95);
    base_ = solve_empirical(*sample_, *sigma_, Level(level_));
  }

  Outcome run(std::size_t property) {
    if (!base_.converged) return {true, 0.0};
    switch (property) {
      case 0: return homogeneity();
      case 1: return translation();
      case 2: return law_invariance();
      case 3: return pseudo_invariance();
      case 4: return alpha_symmetry();
      case 5: return independence_reduction();
      case 6: return support_stability();
      default: return intern_monotony();
    }
  }

 private:
  std::optional<ExpectileResult> solve(const SampleMatrix& s, const ScoringMatrix& sigma,
                                       double level) {
    ExpectileResult r = solve_empirical(s, sigma, Level(level));
    if (!r.converged) return std::nullopt;
    return r;
  }

  Outcome homogeneity() {
    const double c = uniform(rng_, 0.1, 10.0);
    const auto r = solve(transformed(*sample_, [c](auto, auto, double v) { return c * v; }),
                         *sigma_, level_);
    if (!r) return {true, 0.0};
    return {false, relative_gap(r->point, c * base_.point)};
  }

  Outcome translation() {
    Vector m(static_cast<Eigen::Index>(dim_));
    for (auto& v : m) v = uniform(rng_, -50.0, 50.0);
    const auto r = solve(transformed(*sample_,
                                     [&](auto, std::size_t k, double v) {
                                       return v + m[static_cast<Eigen::Index>(k)];
                                     }),
                         *sigma_, level_);
    if (!r) return {true, 0.0};
    return {false, relative_gap(r->point, base_.point + m)};
  }

  Outcome law_invariance() {
    std::vector<std::size_t> perm(sample_->rows());
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::shuffle(perm.begin(), perm.end(), rng_);
    Matrix m = sample_->matrix();
    for (std::size_t j = 0; j < perm.size(); ++j)
      m.row(static_cast<Eigen::Index>(j)) = sample_->matrix().row(static_cast<Eigen::Index>(perm[j]));
    const auto r = solve(SampleMatrix(std::move(m)), *sigma_, level_);
    if (!r) return {true, 0.0};
    return {false, (r->point - base_.point).cwiseAbs().maxCoeff()};
  }

  Outcome pseudo_invariance() {
    // e^S(VX + a) = V e^{VSV}(X) + a for positive diagonal V
    const auto d = static_cast<Eigen::Index>(dim_);
    for (int attempt = 0; attempt < 100; ++attempt) {
      Vector v(d), shift(d);
      for (auto& e : v) e = uniform(rng_, 0.5, 2.0);
      for (auto& e : shift) e = uniform(rng_, -10.0, 10.0);
      const Matrix vsv = v.asDiagonal() * sigma_->matrix() * v.asDiagonal();
      const auto inner = try_scoring(vsv);
      if (!inner) continue;
      const auto lhs = solve(transformed(*sample_,
                                         [&](auto, std::size_t k, double x) {
                                           const auto ek = static_cast<Eigen::Index>(k);
                                           return v[ek] * x + shift[ek];
                                         }),
                             *sigma_, level_);
      const auto rhs = solve(*sample_, *inner, level_);
      if (!lhs || !rhs) return {true, 0.0};
      return {false, relative_gap(lhs->point, Vector(v.asDiagonal() * rhs->point + shift))};
    }
    return {true, 0.0};
  }

  Outcome alpha_symmetry() {
    const auto r = solve(transformed(*sample_, [](auto, auto, double v) { return -v; }), *sigma_,
                         1.0 - level_);
    if (!r) return {true, 0.0};
    return {false, relative_gap(-r->point, base_.point)};
  }

  Outcome independence_reduction() {
    Vector w(static_cast<Eigen::Index>(dim_));
    for (auto& e : w) e = uniform(rng_, 0.1, 5.0);
    const auto r = solve(*sample_, ScoringMatrix::diagonal(w), level_);
    if (!r) return {true, 0.0};
    return {false, relative_gap(r->point, marginal_expectiles(*sample_, Level(level_)))};
  }

  Outcome support_stability() {
    double worst = 0.0;
    for (std::size_t k = 0; k < dim_; ++k) {
      const double x = base_.point[static_cast<Eigen::Index>(k)];
      const double scale = std::max(1.0, std::abs(x));
      worst = std::max({worst, (sample_->column_min(k) - x) / scale,
                        (x - sample_->column_max(k)) / scale});
    }
    return {false, worst};
  }

  Outcome intern_monotony() {
    // columns (Y, Y + c, Z) with exchangeable scoring rows for the first
    // two: the second coordinate's expectile must not fall below the first's.
    const std::size_t n = sample_->rows();
    const double c = uniform(rng_, 0.01, 5.0);
    Matrix m(static_cast<Eigen::Index>(n), 3);
    m.col(0) = sample_->matrix().col(0);
    m.col(1) = sample_->matrix().col(0).array() + c;
    m.col(2) = sample_->matrix().col(1);
    const SampleMatrix s(std::move(m));
    for (int attempt = 0; attempt < 200; ++attempt) {
      Matrix e = random_scoring_entries(3, rng_);
      e(1, 1) = e(0, 0);
      e(1, 2) = e(2, 1) = e(2, 0);
      const auto sigma = try_scoring(e);
      if (!sigma) continue;
      const auto r = solve(s, *sigma, level_);
      if (!r) return {true, 0.0};
      const double x0 = r->point[0];
      return {false, std::max(0.0, x0 - r->point[1]) / std::max(1.0, std::abs(x0))};
    }
    return {true, 0.0};
  }

  Rng rng_;
  std::size_t dim_ = 2;
  std::optional<ScoringMatrix> sigma_;
  std::optional<ModelSpec> model_;
  std::optional<SampleMatrix> sample_;
  double level_ = 0.5;
  ExpectileResult base_;
};

}  // namespace

ScoringMatrix random_scoring_matrix(std::size_t dim, std::uint64_t seed) {
  if (dim < 1) throw InvalidParameter("dimension must be at least 1");
  Rng rng(seed);
  return ScoringMatrix(random_scoring_entries(dim, rng));
}

std::vector<PropertyReport> run_property_suite(std::uint64_t seed, std::size_t instances,
                                               double tol) {
  if (instances < 1) throw InvalidParameter("property suite needs at least one instance");
  if (!(tol >= 0.0)) throw InvalidParameter("property tolerance must be non-negative");
  const auto& names = property_names();
  std::vector<PropertyReport> reports(names.size());
  for (std::size_t p = 0; p < names.size(); ++p) {
    reports[p].name = names[p];
    reports[p].tolerance = tol;
  }
  for (std::size_t i = 0; i < instances; ++i) {
    Instance inst(split_seed(seed, i));
    for (std::size_t p = 0; p < names.size(); ++p) {
      const Outcome o = inst.run(p);
      if (o.skipped) {
        ++reports[p].skipped;
        continue;
      }
      ++reports[p].instances;
      reports[p].max_violation = std::max(reports[p].max_violation, o.violation);
    }
  }
  for (auto& r : reports) r.passed = r.instances > 0 && r.max_violation <= r.tolerance;
  return reports;
}

}  // namespace mvexpectile
