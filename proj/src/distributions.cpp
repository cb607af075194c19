#include "mvexpectile/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace mvexpectile {

MarginalSpec MarginalSpec::exponential(double rate) {
  if (!(rate > 0.0) || !std::isfinite(rate)) {
    throw InvalidParameter("exponential rate must be positive");
  }
  return MarginalSpec(Family::Exponential, rate, 0.0);
}

MarginalSpec MarginalSpec::pareto(double shape, double scale) {
  if (!(shape > 1.0) || !std::isfinite(shape)) {
    throw InvalidParameter("pareto shape must exceed 1 (finite mean)");
  }
  if (!(scale > 0.0) || !std::isfinite(scale)) {
    throw InvalidParameter("pareto scale must be positive");
  }
  return MarginalSpec(Family::Pareto, shape, scale);
}

double MarginalSpec::mean() const {
  return family_ == Family::Exponential ? 1.0 / p1_ : p2_ / (p1_ - 1.0);
}

double MarginalSpec::survival(double x) const {
  if (x <= 0.0) return 1.0;
  if (family_ == Family::Exponential) return std::exp(-p1_ * x);
  return std::pow(p2_ / (p2_ + x), p1_);
}

double MarginalSpec::cdf(double x) const {
  if (x <= 0.0) return 0.0;
  if (family_ == Family::Exponential) return -std::expm1(-p1_ * x);
  return 1.0 - survival(x);
}

double MarginalSpec::pdf(double x) const {
  if (x < 0.0) return 0.0;
  if (family_ == Family::Exponential) return p1_ * std::exp(-p1_ * x);
  return p1_ / p2_ * std::pow(p2_ / (p2_ + x), p1_ + 1.0);
}

double MarginalSpec::quantile(double u) const {
  if (family_ == Family::Exponential) return -std::log1p(-u) / p1_;
  return p2_ * std::expm1(-std::log1p(-u) / p1_);
}

double MarginalSpec::upper_stop_loss(double x) const {
  if (x < 0.0) return mean() - x;
  if (family_ == Family::Exponential) return std::exp(-p1_ * x) / p1_;
  return p2_ / (p1_ - 1.0) * std::pow(p2_ / (p2_ + x), p1_ - 1.0);
}

double MarginalSpec::lower_stop_loss(double x) const {
  if (x <= 0.0) return 0.0;
  return x - mean() + upper_stop_loss(x);
}

double MarginalSpec::squared_survival_integral(double x) const {
  if (family_ == Family::Exponential) {
    if (x < 0.0) return 0.5 / p1_ - x;
    return std::exp(-2.0 * p1_ * x) / (2.0 * p1_);
  }
  const double base = p2_ / (2.0 * p1_ - 1.0);
  if (x < 0.0) return base - x;
  return base * std::pow(p2_ / (p2_ + x), 2.0 * p1_ - 1.0);
}

double MarginalSpec::cdf_survival_integral(double x) const {
  if (x <= 0.0) return 0.0;
  // int_0^x S - int_0^x S^2
  return (mean() - upper_stop_loss(x)) -
         (squared_survival_integral(0.0) - squared_survival_integral(x));
}

CopulaSpec CopulaSpec::fgm(double theta) {
  if (!(std::abs(theta) <= 1.0)) throw InvalidParameter("FGM theta must lie in [-1,1]");
  return CopulaSpec(Family::Fgm, theta);
}

double CopulaSpec::operator()(double u, double v) const {
  if (family_ == Family::Independence) return u * v;
  return u * v * (1.0 + theta_ * (1.0 - u) * (1.0 - v));
}

ModelSpec::ModelSpec(std::vector<MarginalSpec> marginals, CopulaSpec copula)
    : marginals_(std::move(marginals)), copula_(copula) {
  if (marginals_.empty()) throw InvalidParameter("model needs at least one marginal");
  if (copula_.family() == CopulaSpec::Family::Fgm && marginals_.size() != 2) {
    throw UnsupportedParameter("the FGM copula is bivariate; model dimension must be 2");
  }
}

Vector ModelSpec::means() const {
  Vector m(static_cast<Eigen::Index>(dim()));
  for (std::size_t i = 0; i < dim(); ++i) m[static_cast<Eigen::Index>(i)] = marginals_[i].mean();
  return m;
}

namespace {

bool is_fgm(const CopulaSpec& c) { return c.family() == CopulaSpec::Family::Fgm; }

}  // namespace

double ModelSpec::joint_upper(std::size_t i, std::size_t k, double xi, double xk) const {
  const MarginalSpec& mi = marginals_.at(i);
  if (i == k) {
    if (xk <= xi) return mi.upper_stop_loss(xi);
    return mi.upper_stop_loss(xk) + (xk - xi) * mi.survival(xk);
  }
  const MarginalSpec& mk = marginals_.at(k);
  const double sk = mk.survival(xk);
  if (!is_fgm(copula_)) return mi.upper_stop_loss(xi) * sk;
  // int_{xi}^inf S_i(t) S_k (1 + theta F_i(t) F_k) dt
  const double th = copula_.theta();
  const double fk = mk.cdf(xk);
  return sk * ((1.0 + th * fk) * mi.upper_stop_loss(xi) - th * fk * mi.squared_survival_integral(xi));
}

double ModelSpec::joint_lower(std::size_t i, std::size_t k, double xi, double xk) const {
  const MarginalSpec& mi = marginals_.at(i);
  if (i == k) {
    if (xk >= xi) return mi.lower_stop_loss(xi);
    return mi.lower_stop_loss(xk) + (xi - xk) * mi.cdf(xk);
  }
  const MarginalSpec& mk = marginals_.at(k);
  const double fk = mk.cdf(xk);
  if (!is_fgm(copula_)) return mi.lower_stop_loss(xi) * fk;
  // int_{-inf}^{xi} F_i(t) F_k (1 + theta S_i(t) S_k) dt
  const double th = copula_.theta();
  const double sk = mk.survival(xk);
  return fk * (mi.lower_stop_loss(xi) + th * sk * mi.cdf_survival_integral(xi));
}

double ModelSpec::prob_both_above(std::size_t i, std::size_t k, double xi, double xk) const {
  if (i == k) return marginals_.at(i).survival(std::max(xi, xk));
  const double si = marginals_.at(i).survival(xi);
  const double sk = marginals_.at(k).survival(xk);
  if (!is_fgm(copula_)) return si * sk;
  return si * sk * (1.0 + copula_.theta() * (1.0 - si) * (1.0 - sk));
}

double ModelSpec::prob_both_below(std::size_t i, std::size_t k, double xi, double xk) const {
  if (i == k) return marginals_.at(i).cdf(std::min(xi, xk));
  const double fi = marginals_.at(i).cdf(xi);
  const double fk = marginals_.at(k).cdf(xk);
  if (!is_fgm(copula_)) return fi * fk;
  return fi * fk * (1.0 + copula_.theta() * (1.0 - fi) * (1.0 - fk));
}

UniformStream::UniformStream(std::uint64_t seed) : engine_(seed) {}

double UniformStream::next() {
  // 53 random bits centred in their cell: never 0, never 1
  return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
}

ModelStream::ModelStream(const ModelSpec& model, std::uint64_t seed)
    : model_(model), uniforms_(seed) {}

void ModelStream::draw(std::span<double> out) {
  const std::size_t d = model_.dim();
  require_same_dim(d, out.size(), "model draw");
  if (is_fgm(model_.copula())) {
    const double u = uniforms_.next();
    const double t = uniforms_.next();
    const double v = fgm_conditional_inverse(u, t, model_.copula().theta());
    out[0] = model_.marginal(0).quantile(u);
    out[1] = model_.marginal(1).quantile(v);
    return;
  }
  for (std::size_t i = 0; i < d; ++i) out[i] = model_.marginal(i).quantile(uniforms_.next());
}

SampleMatrix sample(const ModelSpec& model, std::size_t n, std::uint64_t seed) {
  if (n < 1) throw InvalidParameter("sample size must be at least 1");
  const std::size_t d = model.dim();
  ModelStream stream(model, seed);
  Matrix m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  std::vector<double> row(d);
  for (std::size_t j = 0; j < n; ++j) {
    stream.draw(row);
    for (std::size_t k = 0; k < d; ++k)
      m(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) = row[k];
  }
  return SampleMatrix(std::move(m));
}

double fgm_conditional_inverse(double u, double t, double theta) {
  const double a = theta * (1.0 - 2.0 * u);
  if (std::abs(a) < 1e-12) return t;
  // ((1+a) - sqrt(disc)) / (2a), rationalised to avoid cancellation
  const double disc = (1.0 + a) * (1.0 + a) - 4.0 * a * t;
  return 2.0 * t / ((1.0 + a) + std::sqrt(disc));
}

std::uint64_t split_seed(std::uint64_t master, std::uint64_t counter) {
  // splitmix64 finaliser over a Weyl sequence
  std::uint64_t z = master + 0x9E3779B97F4A7C15ULL * (counter + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

Vector model_residual(const ModelSpec& model, const ScoringMatrix& sigma, Level level,
                      const Vector& x) {
  const std::size_t d = model.dim();
  require_same_dim(d, sigma.dim(), "model vs scoring matrix");
  require_same_dim(d, static_cast<std::size_t>(x.size()), "point vs model");
  const double a = level.value();
  Vector r(static_cast<Eigen::Index>(d));
  for (std::size_t k = 0; k < d; ++k) {
    const double xk = x[static_cast<Eigen::Index>(k)];
    double acc = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      const double w = sigma(k, i);
      if (w == 0.0) continue;
      const double xi = x[static_cast<Eigen::Index>(i)];
      acc += w * (a * model.joint_upper(i, k, xi, xk) - (1.0 - a) * model.joint_lower(i, k, xi, xk));
    }
    r[static_cast<Eigen::Index>(k)] = acc;
  }
  return r;
}

double l_exponential(double rate, double x, Level level) {
  const double a = level.value();
  return (2.0 * a - 1.0) * (1.0 / rate) * std::exp(-rate * x) - (1.0 - a) * (x - 1.0 / rate);
}

double exponential_indep_rhs(double rate_own, double rate_other, double x_own, double x_other,
                             Level level) {
  const double a = level.value();
  const double e_own = std::exp(-rate_own * x_own);
  const double e_other = std::exp(-rate_other * x_other);
  return (1.0 - a) * (x_other - (1.0 / rate_other) * (1.0 - e_other)) * (1.0 - e_own) -
         a * (1.0 / rate_other) * e_other * e_own;
}

Vector exponential_indep_system(double rate1, double rate2, const Vector& x, Level level) {
  require_same_dim(2, static_cast<std::size_t>(x.size()), "bivariate system");
  Vector r(2);
  r[0] = l_exponential(rate1, x[0], level) - exponential_indep_rhs(rate1, rate2, x[0], x[1], level);
  r[1] = l_exponential(rate2, x[1], level) - exponential_indep_rhs(rate2, rate1, x[1], x[0], level);
  return r;
}

double l_pareto(double shape, double scale, double x, Level level) {
  const double a = level.value();
  const double m = scale / (shape - 1.0);
  return (2.0 * a - 1.0) * m * std::pow(scale / (scale + x), shape - 1.0) - (1.0 - a) * (x - m);
}

double l_pareto_cross(double shape, double scale_j, double scale_i, double x_j, double x_i,
                      Level level) {
  const double a = level.value();
  const double m_j = scale_j / (shape - 1.0);
  const double tail_i = std::pow(scale_i / (scale_i + x_i), shape);
  return m_j * (tail_i - (1.0 - a)) * std::pow(scale_j / (scale_j + x_j), shape - 1.0) -
         (1.0 - a) * (1.0 - tail_i) * (x_j - m_j);
}

Vector pareto_indep_system(double shape, double scale1, double scale2, const Vector& x,
                           Level level) {
  require_same_dim(2, static_cast<std::size_t>(x.size()), "bivariate system");
  Vector r(2);
  r[0] = l_pareto(shape, scale1, x[0], level) + l_pareto_cross(shape, scale2, scale1, x[1], x[0], level);
  r[1] = l_pareto(shape, scale2, x[1], level) + l_pareto_cross(shape, scale1, scale2, x[0], x[1], level);
  return r;
}

double fgm_exponential_rhs(double rate_own, double rate_other, double x_own, double x_other,
                           double theta, Level level) {
  const double a = level.value();
  const double ej = std::exp(-rate_own * x_own);
  const double ei = std::exp(-rate_other * x_other);
  const double bi = rate_other;
  return (1.0 - a) * (1.0 - ej) * (1.0 - theta * ej) * (x_other - (1.0 / bi) * (1.0 - ei)) +
         (1.0 - a) * (theta / 2.0) * (1.0 - ej) * ej * (2.0 * x_other - (1.0 / bi) * (1.0 - ei * ei)) -
         a * (1.0 / bi) * ei * ej * (1.0 + theta * (1.0 - ei / 2.0) * (1.0 - ej));
}

Vector fgm_exponential_system(double rate1, double rate2, double theta, const Vector& x,
                              Level level) {
  require_same_dim(2, static_cast<std::size_t>(x.size()), "bivariate system");
  Vector r(2);
  r[0] = l_exponential(rate1, x[0], level) -
         fgm_exponential_rhs(rate1, rate2, x[0], x[1], theta, level);
  r[1] = l_exponential(rate2, x[1], level) -
         fgm_exponential_rhs(rate2, rate1, x[1], x[0], theta, level);
  return r;
}

}  // namespace mvexpectile
