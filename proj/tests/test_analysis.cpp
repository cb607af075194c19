#include <doctest.h>

#include <cmath>
#include <vector>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include "mvexpectile/analysis.hpp"
#include "mvexpectile/univariate.hpp"
#include "oracles.hpp"

using namespace mvexpectile;

namespace {

ModelSpec exp_model(double b1 = 0.05, double b2 = 0.25) {
  return ModelSpec({MarginalSpec::exponential(b1), MarginalSpec::exponential(b2)},
                   CopulaSpec::independence());
}

ModelSpec fgm_model(double theta) {
  return ModelSpec({MarginalSpec::exponential(0.05), MarginalSpec::exponential(0.25)},
                   CopulaSpec::fgm(theta));
}

Vector central_difference(const ModelSpec& m, const ScoringMatrix& sigma, double a, double h) {
  NewtonConfig tight;
  tight.tol = 1e-13;
  const auto up = solve_analytic(m, sigma, Level(a + h), tight);
  const auto dn = solve_analytic(m, sigma, Level(a - h), tight);
  REQUIRE(up.converged);
  REQUIRE(dn.converged);
  return (up.point - dn.point) / (2.0 * h);
}

double max_rel(const Vector& x, const Vector& ref) {
  return ((x - ref).cwiseAbs().array() / ref.cwiseAbs().array().max(1e-300)).maxCoeff();
}

// E[g(X) | V = v] under FGM equals E[g(X)] + theta (1 - 2 v) E[g(X) (1 - 2 F(X))]
// where v is the copula coordinate of the conditioning variable.
double fgm_conditional(const MarginalSpec& m, const std::function<double(double)>& g, double lo,
                       double hi, double v, double theta) {
  auto integrate = [&](const std::function<double(double)>& h) {
    double total = 0.0;
    if (hi > lo) {
      boost::math::quadrature::tanh_sinh<double> finite;
      total += finite.integrate(h, lo, hi);
    }
    if (std::isinf(hi)) return total;
    boost::math::quadrature::exp_sinh<double> tail;
    return total + tail.integrate([&](double t) { return h(hi + t); });
  };
  const double plain = integrate([&](double t) { return g(t) * m.pdf(t); });
  const double tilt = integrate([&](double t) { return g(t) * (1.0 - 2.0 * m.cdf(t)) * m.pdf(t); });
  return plain + theta * (1.0 - 2.0 * v) * tilt;
}

}  // namespace

TEST_CASE("implied level at the solution recovers alpha") {
  const auto ones = ScoringMatrix::ones(2);
  for (const auto& m : {exp_model(), fgm_model(1.0), fgm_model(-1.0)})
    for (double a = 0.1; a < 0.95; a += 0.1) {
      const auto r = solve_analytic(m, ones, Level(a));
      REQUIRE(r.converged);
      const auto implied = alpha_of_point(r.point, m, ones);
      for (const auto& v : implied) {
        REQUIRE(v.has_value());
        CHECK(std::abs(*v - a) <= 1e-6);
      }
    }
}

TEST_CASE("implied level on a sample matches the definition") {
  const auto s = oracle::random_sample(40, 3, 5);
  Matrix p(3, 3);
  p << 1.0, 0.3, 0.1, 0.3, 1.0, 0.5, 0.1, 0.5, 2.0;
  const ScoringMatrix sigma(p);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 25.0);
  for (int rep = 0; rep < 50; ++rep) {
    Vector x(3);
    x << u(rng), u(rng), u(rng);
    const auto got = alpha_of_point(x, s, sigma);
    for (std::size_t k = 0; k < 3; ++k) {
      double up = 0.0, down = 0.0;
      for (std::size_t i = 0; i < 3; ++i) {
        const auto [a, b] = oracle::stop_loss(x, s, i, k);
        up += p(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i)) * a;
        down += p(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i)) * b;
      }
      if (up + down > 0.0) {
        REQUIRE(got[k].has_value());
        CHECK(*got[k] == doctest::Approx(down / (up + down)).epsilon(1e-12));
      } else {
        CHECK_FALSE(got[k].has_value());
      }
    }
  }
  // every observation equals x: both sums vanish
  const auto flat = SampleMatrix::from_rows({{1.0, 2.0}, {1.0, 2.0}});
  Vector x(2);
  x << 1.0, 2.0;
  const auto none = alpha_of_point(x, flat, ScoringMatrix::ones(2));
  CHECK_FALSE(none[0].has_value());
  CHECK_FALSE(none[1].has_value());
}

TEST_CASE("implied level is non-decreasing in its coordinate and tends to 1") {
  const auto m = exp_model();
  const auto ones = ScoringMatrix::ones(2);
  const auto s = sample(m, 2000, 3);
  for (std::size_t k = 0; k < 2; ++k) {
    double prev_m = -1.0, prev_s = -1.0;
    Vector x = m.means();
    for (double t = 0.05; t <= 5.0; t += 0.05) {
      x[static_cast<Eigen::Index>(k)] = t * m.means()[static_cast<Eigen::Index>(k)];
      const double vm = *alpha_of_point(x, m, ones)[k];
      const double vs = *alpha_of_point(x, s, ones)[k];
      CHECK(vm >= prev_m);
      CHECK(vs >= prev_s);
      prev_m = vm;
      prev_s = vs;
    }
    x = m.means();
    x[static_cast<Eigen::Index>(k)] *= 50.0;
    CHECK(*alpha_of_point(x, m, ones)[k] > 0.999);
  }
}

TEST_CASE("alpha derivative in one dimension") {
  const ModelSpec m({MarginalSpec::exponential(1.0)}, CopulaSpec::independence());
  const auto sigma = ScoringMatrix::identity(1);
  for (double a : {0.2, 0.5, 0.8}) {
    const double x = univariate_expectile(m.marginal(0), Level(a));
    const auto sys = alpha_derivative(Vector::Constant(1, x), Level(a), m, sigma);
    const double h = 1e-4;
    const double fd = (univariate_expectile(m.marginal(0), Level(a + h)) -
                       univariate_expectile(m.marginal(0), Level(a - h))) /
                      (2 * h);
    CHECK(sys.solution[0] == doctest::Approx(fd).epsilon(1e-3));
    // d/dalpha of the scalar root: (E(X-x)_+ + E(x-X)_+) / (alpha S(x) + (1-alpha) F(x))
    const auto& e = m.marginal(0);
    const double closed = (e.upper_stop_loss(x) + e.lower_stop_loss(x)) /
                          (a * e.survival(x) + (1 - a) * e.cdf(x));
    CHECK(sys.solution[0] == doctest::Approx(closed).epsilon(1e-12));
  }
}

TEST_CASE("alpha derivative, independent exponentials, against finite differences") {
  Matrix p(2, 2);
  p << 1.0, 0.7, 0.7, 1.5;
  for (const ScoringMatrix& sigma : {ScoringMatrix::ones(2), ScoringMatrix(p)})
    for (double a : {0.3, 0.5, 0.7}) {
      const auto r = solve_analytic(exp_model(), sigma, Level(a));
      REQUIRE(r.converged);
      const auto sys = alpha_derivative(r.point, Level(a), exp_model(), sigma);
      CHECK(max_rel(sys.solution, central_difference(exp_model(), sigma, a, 1e-4)) <= 1e-3);
      CHECK((sys.solution.array() > 0.0).all());
      CHECK((sys.A.array() > 0.0).all());
      CHECK((sys.B.array() >= 0.0).all());
      CHECK((sys.Gamma.array() >= 0.0).all());
      const Vector lhs = sys.matrix() * sys.solution;
      CHECK((lhs - sys.A).cwiseAbs().maxCoeff() <= 1e-10 * sys.A.cwiseAbs().maxCoeff());
      CHECK(sys.condition >= 1.0);
    }
}

TEST_CASE("alpha derivative under FGM") {
  const auto ones = ScoringMatrix::ones(2);
  for (double theta : {-1.0, 1.0}) {
    const auto m = fgm_model(theta);
    const double a = 0.6;
    const auto r = solve_analytic(m, ones, Level(a));
    REQUIRE(r.converged);
    const auto sys = alpha_derivative(r.point, Level(a), m, ones);

    // B_k from the closed-form conditional expectation
    for (std::size_t k = 0; k < 2; ++k) {
      const std::size_t i = 1 - k;
      const auto& mi = m.marginal(i);
      const auto& mk = m.marginal(k);
      const double xi = r.point[static_cast<Eigen::Index>(i)];
      const double xk = r.point[static_cast<Eigen::Index>(k)];
      const double v = mk.cdf(xk);
      const double up = fgm_conditional(mi, [&](double t) { return oracle::pos(t - xi); }, xi,
                                        INFINITY, v, theta);
      const double down = fgm_conditional(mi, [&](double t) { return oracle::pos(xi - t); }, 0.0,
                                          xi, v, theta);
      const double b = mk.pdf(xk) * (a * up + (1 - a) * down);
      CHECK(sys.B[static_cast<Eigen::Index>(k)] == doctest::Approx(b).epsilon(5e-3));
    }
    CHECK(max_rel(sys.solution, central_difference(m, ones, a, 1e-4)) <= 5e-3);
  }
}

TEST_CASE("a degenerate system is reported") {
  const auto m = exp_model(1.0, 1.0);
  Vector far(2);
  far << 2000.0, 2000.0;
  CHECK_THROWS_AS(alpha_derivative(far, Level(0.5), m, ScoringMatrix::ones(2)), Error);
  AlphaDerivativeOptions none;
  none.mc_draws = 0;
  CHECK_THROWS_AS(alpha_derivative(m.means(), Level(0.5), m, ScoringMatrix::ones(2), none),
                  InvalidParameter);
}

TEST_CASE("asymptotic sweep bookkeeping") {
  const auto ones = ScoringMatrix::ones(2);
  const std::vector<double> alphas = {0.9, 0.001, 0.5, 0.1, 0.999};
  const auto t = asymptotic_sweep(exp_model(), ones, alphas);
  REQUIRE(t.rows.size() == 5);
  CHECK(t.failed_solves == 0);
  for (std::size_t j = 1; j < t.rows.size(); ++j) CHECK(t.rows[j].alpha > t.rows[j - 1].alpha);
  CHECK(t.increasing);
  const auto mid = solve_analytic(exp_model(), ones, Level(0.5));
  CHECK(t.rows[2].result.point == mid.point);
  CHECK(t.lower_gap == t.rows.front().result.point.cwiseAbs().maxCoeff());
  CHECK(t.approaches_lower == (t.lower_gap <= 0.05));
  const Vector ratio = t.rows.back().result.point.cwiseQuotient(exp_model().means());
  CHECK(t.upper_ratio == ratio.minCoeff());
  CHECK(t.grows_upper == (t.upper_ratio >= 10.0));
  MESSAGE("lower gap " << t.lower_gap << ", upper ratio " << t.upper_ratio);

  AsymptoticOptions starved;
  starved.newton.max_iter = 1;
  starved.newton.tol = 1e-15;
  const auto f = asymptotic_sweep(exp_model(), ones, alphas, starved);
  CHECK(f.failed_solves == 5);
  CHECK_FALSE(f.increasing);
  CHECK_THROWS_AS(asymptotic_sweep(exp_model(), ones, {}), InvalidParameter);
}
