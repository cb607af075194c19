#include "mvexpectile/solve_deterministic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "mvexpectile/univariate.hpp"

namespace mvexpectile {

void NewtonConfig::validate() const {
  if (!(tol > 0.0)) throw InvalidParameter("newton tol must be positive");
  if (max_iter < 1) throw InvalidParameter("newton max_iter must be at least 1");
  if (!(jacobian_step > 0.0)) throw InvalidParameter("jacobian_step must be positive");
  if (!(damping > 0.0 && damping < 1.0)) throw InvalidParameter("damping must lie in (0,1)");
}

void EmpiricalConfig::validate() const {
  if (!(tol > 0.0)) throw InvalidParameter("empirical tol must be positive");
  if (max_iter < 1) throw InvalidParameter("empirical max_iter must be at least 1");
}

void LpConfig::validate() const {
  if (!(p >= 1.0) || !std::isfinite(p)) {
    throw UnsupportedParameter("L^p expectiles need 1 <= p < inf");
  }
  if (!(tol > 0.0)) throw InvalidParameter("lp tol must be positive");
  if (max_iter < 1) throw InvalidParameter("lp max_iter must be at least 1");
}

namespace {

double max_norm(const Vector& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

}  // namespace

Matrix finite_difference_jacobian(const SystemFn& system, const Vector& x, double step) {
  const Eigen::Index d = x.size();
  Matrix jac(d, d);
  for (Eigen::Index j = 0; j < d; ++j) {
    const double h = step * (1.0 + std::abs(x[j]));
    Vector xp = x;
    Vector xm = x;
    xp[j] += h;
    xm[j] -= h;
    jac.col(j) = (system(xp) - system(xm)) / (xp[j] - xm[j]);
  }
  return jac;
}

ExpectileResult newton_solve(const SystemFn& system, Vector x0, const NewtonConfig& config) {
  config.validate();
  ExpectileResult out;
  out.point = std::move(x0);
  Vector f = system(out.point);
  out.residual_norm = max_norm(f);
  out.trace.push_back(out.point);
  if (!f.allFinite()) {
    out.residual_norm = std::numeric_limits<double>::infinity();
    return out;
  }

  for (int it = 0; it < config.max_iter; ++it) {
    if (out.residual_norm <= config.tol) break;
    const Matrix jac = finite_difference_jacobian(system, out.point, config.jacobian_step);
    Eigen::FullPivLU<Matrix> lu(jac);
    if (!jac.allFinite() || !lu.isInvertible()) break;
    const Vector delta = lu.solve(-f);
    if (!delta.allFinite()) break;

    bool accepted = false;
    double t = 1.0;
    for (int h = 0; h <= config.max_halvings; ++h, t *= config.damping) {
      Vector trial = out.point + t * delta;
      Vector ft = system(trial);
      if (ft.allFinite() && max_norm(ft) < out.residual_norm) {
        out.point = std::move(trial);
        f = std::move(ft);
        out.residual_norm = max_norm(f);
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
    ++out.iterations;
    out.trace.push_back(out.point);
  }
  out.converged = out.residual_norm <= config.tol;
  return out;
}

ExpectileResult solve_analytic(const ModelSpec& model, const ScoringMatrix& sigma, Level level,
                               const NewtonConfig& config, std::optional<Vector> x0) {
  require_same_dim(model.dim(), sigma.dim(), "model vs scoring matrix");
  Vector start = x0 ? std::move(*x0) : marginal_expectiles(model, level);
  require_same_dim(model.dim(), static_cast<std::size_t>(start.size()), "starting point");
  const SystemFn system = [&](const Vector& x) { return model_residual(model, sigma, level, x); };
  return newton_solve(system, std::move(start), config);
}

// ---------------------------------------------------------------------------
// Empirical matrix score

namespace {

SampleMatrix canonical_rows(const SampleMatrix& sample) {
  const std::size_t n = sample.rows();
  const std::size_t d = sample.dim();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t l, std::size_t r) {
    for (std::size_t k = 0; k < d; ++k) {
      if (sample(l, k) < sample(r, k)) return true;
      if (sample(r, k) < sample(l, k)) return false;
    }
    return false;
  });
  Matrix m(sample.matrix().rows(), sample.matrix().cols());
  for (std::size_t j = 0; j < n; ++j)
    m.row(static_cast<Eigen::Index>(j)) = sample.matrix().row(static_cast<Eigen::Index>(order[j]));
  return SampleMatrix(std::move(m));
}

// Cross-coordinate weights of coordinate k with the other coordinates held
// fixed: a_j = sum_{i != k} pi_ki (X_ji - x_i)_+, b_j = sum_{i != k} pi_ki (x_i - X_ji)_+.
void cross_weights(const SampleMatrix& sample, const ScoringMatrix& sigma, const Vector& x,
                   std::size_t k, std::vector<double>& a, std::vector<double>& b) {
  const std::size_t n = sample.rows();
  a.assign(n, 0.0);
  b.assign(n, 0.0);
  for (std::size_t i = 0; i < sample.dim(); ++i) {
    const double w = sigma(k, i);
    if (i == k || w == 0.0) continue;
    const auto col = sample.column(i);
    const double xi = x[static_cast<Eigen::Index>(i)];
    for (std::size_t j = 0; j < n; ++j) {
      a[j] += w * std::max(col[j] - xi, 0.0);
      b[j] += w * std::max(xi - col[j], 0.0);
    }
  }
}

// One-sided derivatives of the score along e_k, halved and negated: the
// residual seen from just left and just right of x_k.
std::pair<double, double> one_sided_residual(const SampleMatrix& sample, const ScoringMatrix& sigma,
                                             Level level, const Vector& x, std::size_t k,
                                             std::vector<double>& a, std::vector<double>& b) {
  cross_weights(sample, sigma, x, k, a, b);
  const double al = level.value();
  const double p = sigma(k, k);
  const double t = x[static_cast<Eigen::Index>(k)];
  const auto z = sample.column(k);
  double left = 0.0;   // ties count as above
  double right = 0.0;  // ties count as below
  for (std::size_t j = 0; j < z.size(); ++j) {
    if (z[j] > t) {
      const double up = al * (p * (z[j] - t) + a[j]);
      left += up;
      right += up;
    } else if (z[j] < t) {
      const double down = (1.0 - al) * (p * (t - z[j]) + b[j]);
      left -= down;
      right -= down;
    } else {
      left += al * a[j];
      right -= (1.0 - al) * b[j];
    }
  }
  const double inv_n = 1.0 / static_cast<double>(z.size());
  return {left * inv_n, right * inv_n};
}

struct EmpiricalProblem {
  const SampleMatrix& sample;
  const ScoringMatrix& sigma;
  Level level;
  std::vector<std::vector<std::size_t>> order;  // per column, ascending
  std::vector<double> a, b, suffix_z, suffix_a, prefix_z, prefix_b;

  EmpiricalProblem(const SampleMatrix& s, const ScoringMatrix& sg, Level lv)
      : sample(s), sigma(sg), level(lv), order(s.dim()) {
    for (std::size_t k = 0; k < s.dim(); ++k) {
      auto& ord = order[k];
      ord.resize(s.rows());
      std::iota(ord.begin(), ord.end(), std::size_t{0});
      const auto col = s.column(k);
      std::stable_sort(ord.begin(), ord.end(),
                       [&](std::size_t l, std::size_t r) { return col[l] < col[r]; });
    }
  }

  // Exact minimiser over x_k of the score with the other coordinates fixed.
  // The derivative is S t + c between consecutive sample values and jumps
  // upward at each of them; return where it crosses zero.
  double coordinate_minimizer(const Vector& x, std::size_t k) {
    cross_weights(sample, sigma, x, k, a, b);
    const std::size_t n = sample.rows();
    const auto& ord = order[k];
    const auto z = sample.column(k);
    suffix_z.assign(n + 1, 0.0);
    suffix_a.assign(n + 1, 0.0);
    prefix_z.assign(n + 1, 0.0);
    prefix_b.assign(n + 1, 0.0);
    for (std::size_t m = n; m-- > 0;) {
      suffix_z[m] = suffix_z[m + 1] + z[ord[m]];
      suffix_a[m] = suffix_a[m + 1] + a[ord[m]];
    }
    for (std::size_t m = 0; m < n; ++m) {
      prefix_z[m + 1] = prefix_z[m] + z[ord[m]];
      prefix_b[m + 1] = prefix_b[m] + b[ord[m]];
    }
    const double al = level.value();
    const double p = sigma(k, k);
    // `below` rows sit strictly under the current interval
    auto slope_intercept = [&](std::size_t below) {
      const double n_above = static_cast<double>(n - below);
      const double n_below = static_cast<double>(below);
      const double s = p * (al * n_above + (1.0 - al) * n_below);
      const double c = -al * (p * suffix_z[below] + suffix_a[below]) +
                       (1.0 - al) * (prefix_b[below] - p * prefix_z[below]);
      return std::pair{s, c};
    };

    double prev = -std::numeric_limits<double>::infinity();
    std::size_t below = 0;
    while (below < n) {
      const double v = z[ord[below]];
      auto [s, c] = slope_intercept(below);
      if (s * v + c >= 0.0) return std::clamp(-c / s, prev, v);
      std::size_t next = below;
      while (next < n && z[ord[next]] == v) ++next;
      below = next;
      std::tie(s, c) = slope_intercept(below);
      if (s * v + c >= 0.0) return v;
      prev = v;
    }
    const auto [s, c] = slope_intercept(n);
    return std::max(-c / s, prev);
  }

  Matrix cell_hessian(const Vector& x) const {
    const std::size_t n = sample.rows();
    const std::size_t d = sample.dim();
    const double al = level.value();
    Matrix h = Matrix::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t k = 0; k < d; ++k) {
        const double zk = sample(j, k);
        const double xk = x[static_cast<Eigen::Index>(k)];
        for (std::size_t l = k; l < d; ++l) {
          const double zl = sample(j, l);
          const double xl = x[static_cast<Eigen::Index>(l)];
          double w = 0.0;
          if (zk > xk && zl > xl) w = al;
          else if (zk < xk && zl < xl) w = 1.0 - al;
          h(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(l)) += w;
        }
      }
    }
    for (std::size_t k = 0; k < d; ++k)
      for (std::size_t l = k; l < d; ++l) {
        const auto ek = static_cast<Eigen::Index>(k);
        const auto el = static_cast<Eigen::Index>(l);
        h(ek, el) *= 2.0 * sigma(k, l) / static_cast<double>(n);
        h(el, ek) = h(ek, el);
      }
    return h;
  }
};

bool on_sample_value(double v, std::span<const double> column) {
  return std::find(column.begin(), column.end(), v) != column.end();
}

}  // namespace

double empirical_stationarity(const Vector& x, const SampleMatrix& sample,
                              const ScoringMatrix& sigma, Level level) {
  require_same_dim(sigma.dim(), sample.dim(), "sample vs scoring matrix");
  require_same_dim(sample.dim(), static_cast<std::size_t>(x.size()), "point vs sample");
  std::vector<double> a, b;
  double worst = 0.0;
  for (std::size_t k = 0; k < sample.dim(); ++k) {
    const auto [left, right] = one_sided_residual(sample, sigma, level, x, k, a, b);
    // optimal along e_k iff right <= 0 <= left
    worst = std::max({worst, -left, right});
  }
  return worst;
}

ExpectileResult solve_empirical(const SampleMatrix& input, const ScoringMatrix& sigma,
                                Level level, const EmpiricalConfig& config) {
  config.validate();
  require_same_dim(sigma.dim(), input.dim(), "sample vs scoring matrix");
  if (input.rows() < 2) throw InvalidParameter("empirical solve needs at least 2 observations");

  const SampleMatrix sample = canonical_rows(input);
  EmpiricalProblem problem(sample, sigma, level);
  const std::size_t d = sample.dim();

  ExpectileResult out;
  out.point = marginal_expectiles(sample, level);
  out.trace.push_back(out.point);
  out.residual_norm = empirical_stationarity(out.point, sample, sigma, level);

  for (int it = 0; it < config.max_iter && out.residual_norm > config.tol; ++it) {
    const Vector before = out.point;
    for (std::size_t k = 0; k < d; ++k)
      out.point[static_cast<Eigen::Index>(k)] = problem.coordinate_minimizer(out.point, k);

    // Newton step on the current quadratic piece, over the coordinates not
    // sitting on a kink; those stay where the exact minimisation put them.
    std::vector<Eigen::Index> free;
    for (std::size_t k = 0; k < d; ++k)
      if (!on_sample_value(out.point[static_cast<Eigen::Index>(k)], sample.column(k)))
        free.push_back(static_cast<Eigen::Index>(k));
    if (!free.empty()) {
      const auto m = static_cast<Eigen::Index>(free.size());
      const Vector grad = -2.0 * residual(out.point, sample, sigma, level);
      const Matrix hess = problem.cell_hessian(out.point);
      Vector g(m);
      Matrix h(m, m);
      for (Eigen::Index r = 0; r < m; ++r) {
        g[r] = grad[free[r]];
        for (Eigen::Index c = 0; c < m; ++c) h(r, c) = hess(free[r], free[c]);
      }
      Vector step = Vector::Zero(m);
      Eigen::LDLT<Matrix> ldlt(h);
      if (ldlt.info() == Eigen::Success && ldlt.isPositive()) step = ldlt.solve(-g);
      const double slope = g.dot(step);
      if (step.allFinite() && slope < 0.0) {
        const double f0 = score(out.point, sample, sigma, level);
        double t = 1.0;
        for (int it_h = 0; it_h <= config.max_halvings; ++it_h, t *= 0.5) {
          Vector trial = out.point;
          for (Eigen::Index r = 0; r < m; ++r) {
            double& v = trial[free[r]];
            v += t * step[r];
            if (on_sample_value(v, sample.column(static_cast<std::size_t>(free[r]))))
              v += 1e-12 * std::max(1.0, std::abs(v));
          }
          if (score(trial, sample, sigma, level) <= f0 + config.armijo * t * slope) {
            out.point = std::move(trial);
            break;
          }
        }
      }
    }

    ++out.iterations;
    out.trace.push_back(out.point);
    out.residual_norm = empirical_stationarity(out.point, sample, sigma, level);
    if (out.point == before) break;  // fixed point: no further progress possible
  }
  out.converged = out.residual_norm <= config.tol;
  return out;
}

// ---------------------------------------------------------------------------
// L^p

namespace {

double lp_norm(std::span<const double> v, double p) {
  double acc = 0.0;
  for (double e : v) acc += std::pow(e, p);
  return std::pow(acc, 1.0 / p);
}

}  // namespace

double lp_score(const Vector& x, const SampleMatrix& sample, double p, Level level) {
  require_same_dim(sample.dim(), static_cast<std::size_t>(x.size()), "point vs sample");
  const std::size_t n = sample.rows();
  const std::size_t d = sample.dim();
  const double al = level.value();
  std::vector<double> up(d), down(d);
  double acc = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t k = 0; k < d; ++k) {
      const double diff = sample(j, k) - x[static_cast<Eigen::Index>(k)];
      up[k] = std::max(diff, 0.0);
      down[k] = std::max(-diff, 0.0);
    }
    const double nu = lp_norm(up, p);
    const double nd = lp_norm(down, p);
    acc += al * nu * nu + (1.0 - al) * nd * nd;
  }
  return acc / static_cast<double>(n);
}

Vector lp_residual(const Vector& x, const SampleMatrix& sample, double p, Level level) {
  require_same_dim(sample.dim(), static_cast<std::size_t>(x.size()), "point vs sample");
  const std::size_t n = sample.rows();
  const std::size_t d = sample.dim();
  const double al = level.value();
  std::vector<double> up(d), down(d);
  Vector r = Vector::Zero(static_cast<Eigen::Index>(d));
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t k = 0; k < d; ++k) {
      const double diff = sample(j, k) - x[static_cast<Eigen::Index>(k)];
      up[k] = std::max(diff, 0.0);
      down[k] = std::max(-diff, 0.0);
    }
    const double nu = lp_norm(up, p);
    const double nd = lp_norm(down, p);
    for (std::size_t k = 0; k < d; ++k) {
      const auto ek = static_cast<Eigen::Index>(k);
      if (nu > 0.0 && up[k] > 0.0) r[ek] += al * std::pow(nu, 2.0 - p) * std::pow(up[k], p - 1.0);
      if (nd > 0.0 && down[k] > 0.0)
        r[ek] -= (1.0 - al) * std::pow(nd, 2.0 - p) * std::pow(down[k], p - 1.0);
    }
  }
  return r / static_cast<double>(n);
}

ExpectileResult solve_lp(const SampleMatrix& sample, double p, Level level,
                         const LpConfig& config) {
  LpConfig cfg = config;
  cfg.p = p;
  cfg.validate();

  if (p == 1.0) {
    EmpiricalConfig ec;
    ec.tol = std::min(cfg.tol, ec.tol);
    return solve_empirical(sample, ScoringMatrix::ones(sample.dim()), level, ec);
  }

  ExpectileResult out;
  out.point = marginal_expectiles(sample, level);
  out.trace.push_back(out.point);
  Vector r = lp_residual(out.point, sample, p, level);
  out.residual_norm = max_norm(r);
  if (p == 2.0) {
    out.converged = true;
    return out;
  }

  // Gradient descent (gradient = -2 r) with Barzilai-Borwein trial steps
  // and Armijo backtracking.
  const double al = level.value();
  double step = 0.5 / std::max(al, 1.0 - al);
  double f = lp_score(out.point, sample, p, level);
  for (int it = 0; it < cfg.max_iter && out.residual_norm > cfg.tol; ++it) {
    const Vector dir = 2.0 * r;
    const double dir2 = dir.squaredNorm();
    bool accepted = false;
    double t = step;
    Vector trial;
    double ft = 0.0;
    for (int h = 0; h <= cfg.max_halvings; ++h, t *= 0.5) {
      trial = out.point + t * dir;
      ft = lp_score(trial, sample, p, level);
      if (ft <= f - cfg.armijo * t * dir2) {
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
    const Vector r_new = lp_residual(trial, sample, p, level);
    const Vector dx = trial - out.point;
    const Vector dg = -2.0 * (r_new - r);
    const double curv = dx.dot(dg);
    step = curv > 0.0 ? std::clamp(dx.squaredNorm() / curv, 1e-12, 1e12) : 2.0 * t;
    out.point = std::move(trial);
    r = r_new;
    f = ft;
    out.residual_norm = max_norm(r);
    ++out.iterations;
    out.trace.push_back(out.point);
  }
  out.converged = out.residual_norm <= cfg.tol;
  return out;
}

}  // namespace mvexpectile
