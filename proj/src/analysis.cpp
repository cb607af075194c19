#include "mvexpectile/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace mvexpectile {

namespace {

template <class Terms>
std::vector<std::optional<double>> implied_levels(std::size_t d, const ScoringMatrix& sigma,
                                                  Terms terms) {
  std::vector<std::optional<double>> out(d);
  for (std::size_t k = 0; k < d; ++k) {
    double up = 0.0;
    double down = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      const double w = sigma(k, i);
      if (w == 0.0) continue;
      const auto [u, l] = terms(i, k);
      up += w * u;
      down += w * l;
    }
    if (up + down > 0.0) out[k] = down / (up + down);
  }
  return out;
}

}  // namespace

std::vector<std::optional<double>> alpha_of_point(const Vector& x, const SampleMatrix& sample,
                                                  const ScoringMatrix& sigma) {
  require_same_dim(sigma.dim(), sample.dim(), "sample vs scoring matrix");
  return implied_levels(sample.dim(), sigma, [&](std::size_t i, std::size_t k) {
    return stop_loss_terms(x, sample, i, k);
  });
}

std::vector<std::optional<double>> alpha_of_point(const Vector& x, const ModelSpec& model,
                                                  const ScoringMatrix& sigma) {
  require_same_dim(sigma.dim(), model.dim(), "model vs scoring matrix");
  require_same_dim(model.dim(), static_cast<std::size_t>(x.size()), "point vs model");
  return implied_levels(model.dim(), sigma, [&](std::size_t i, std::size_t k) {
    const double xi = x[static_cast<Eigen::Index>(i)];
    const double xk = x[static_cast<Eigen::Index>(k)];
    return std::pair{model.joint_upper(i, k, xi, xk), model.joint_lower(i, k, xi, xk)};
  });
}

namespace {

// (E[(X_i - x_i)_+ | X_k = x_k], E[(x_i - X_i)_+ | X_k = x_k])
std::pair<double, double> conditional_stop_loss(const ModelSpec& model, std::size_t i,
                                                std::size_t k, double xi, double xk,
                                                const AlphaDerivativeOptions& options) {
  const MarginalSpec& mi = model.marginal(i);
  if (model.copula().family() == CopulaSpec::Family::Independence)
    return {mi.upper_stop_loss(xi), mi.lower_stop_loss(xi)};

  const double u = model.marginal(k).cdf(xk);
  const double theta = model.copula().theta();
  UniformStream uniforms(split_seed(options.seed, i * 131 + k));
  double up = 0.0;
  double down = 0.0;
  for (std::size_t n = 0; n < options.mc_draws; ++n) {
    const double v = fgm_conditional_inverse(u, uniforms.next(), theta);
    const double xv = mi.quantile(v);
    up += std::max(xv - xi, 0.0);
    down += std::max(xi - xv, 0.0);
  }
  const double inv = 1.0 / static_cast<double>(options.mc_draws);
  return {up * inv, down * inv};
}

}  // namespace

AlphaDerivativeSystem alpha_derivative(const Vector& x_star, Level level, const ModelSpec& model,
                                       const ScoringMatrix& sigma,
                                       const AlphaDerivativeOptions& options) {
  const std::size_t d = model.dim();
  require_same_dim(d, sigma.dim(), "model vs scoring matrix");
  require_same_dim(d, static_cast<std::size_t>(x_star.size()), "point vs model");
  if (options.mc_draws < 1) throw InvalidParameter("mc_draws must be at least 1");
  const double a = level.value();
  const auto dd = static_cast<Eigen::Index>(d);

  AlphaDerivativeSystem sys;
  sys.A = Vector::Zero(dd);
  sys.B = Vector::Zero(dd);
  sys.Gamma = Matrix::Zero(dd, dd);
  for (std::size_t k = 0; k < d; ++k) {
    const auto ek = static_cast<Eigen::Index>(k);
    const double xk = x_star[ek];
    double cond = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      const auto ei = static_cast<Eigen::Index>(i);
      const double w = sigma(k, i);
      if (w == 0.0) continue;
      const double xi = x_star[ei];
      sys.A[ek] += w * (model.joint_upper(i, k, xi, xk) + model.joint_lower(i, k, xi, xk));
      sys.Gamma(ek, ei) = w * (a * model.prob_both_above(i, k, xi, xk) +
                               (1.0 - a) * model.prob_both_below(i, k, xi, xk));
      if (i != k) {
        const auto [up, down] = conditional_stop_loss(model, i, k, xi, xk, options);
        cond += w * (a * up + (1.0 - a) * down);
      }
    }
    sys.B[ek] = model.marginal(k).pdf(xk) * cond;
  }

  const Matrix m = sys.matrix();
  Eigen::JacobiSVD<Matrix> svd(m);
  const auto& sv = svd.singularValues();
  sys.condition = sv[sv.size() - 1] > 0.0 ? sv[0] / sv[sv.size() - 1]
                                          : std::numeric_limits<double>::infinity();
  if (!(sys.condition <= options.max_condition)) {
    std::ostringstream msg;
    msg << "alpha-derivative system is singular (condition estimate " << sys.condition << ")";
    throw Error(msg.str());
  }
  sys.solution = m.partialPivLu().solve(sys.A);
  return sys;
}

AsymptoticTable asymptotic_sweep(const ModelSpec& model, const ScoringMatrix& sigma,
                                 std::vector<double> alphas, const AsymptoticOptions& options) {
  if (alphas.empty()) throw InvalidParameter("asymptotic sweep needs at least one level");
  std::sort(alphas.begin(), alphas.end());
  AsymptoticTable table;
  for (double alpha : alphas) {
    AsymptoticRow row;
    row.alpha = alpha;
    row.result = solve_analytic(model, sigma, Level(alpha), options.newton);
    if (!row.result.converged) ++table.failed_solves;
    table.rows.push_back(std::move(row));
  }

  const AsymptoticRow* first = nullptr;
  const AsymptoticRow* last = nullptr;
  table.increasing = true;
  for (const auto& row : table.rows) {
    if (!row.result.converged) continue;
    if (last != nullptr && !(row.result.point.array() > last->result.point.array()).all())
      table.increasing = false;
    if (first == nullptr) first = &row;
    last = &row;
  }
  if (first == nullptr) {
    table.increasing = false;
    return table;
  }
  table.lower_gap = first->result.point.cwiseAbs().maxCoeff();
  table.approaches_lower = table.lower_gap <= options.lower_tol;
  table.upper_ratio = last->result.point.cwiseQuotient(model.means()).minCoeff();
  table.grows_upper = table.upper_ratio >= options.upper_ratio_min;
  return table;
}

}  // namespace mvexpectile
