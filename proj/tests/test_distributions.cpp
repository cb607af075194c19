#include <doctest.h>

#include <cmath>
#include <set>
#include <vector>

#include "mvexpectile/distributions.hpp"
#include "oracles.hpp"

using namespace mvexpectile;

namespace {

ModelSpec exp_model(double b1, double b2) {
  return ModelSpec({MarginalSpec::exponential(b1), MarginalSpec::exponential(b2)},
                   CopulaSpec::independence());
}

ModelSpec fgm_exp_model(double b1, double b2, double theta) {
  return ModelSpec({MarginalSpec::exponential(b1), MarginalSpec::exponential(b2)},
                   CopulaSpec::fgm(theta));
}

ModelSpec pareto_model(double a, double s1, double s2) {
  return ModelSpec({MarginalSpec::pareto(a, s1), MarginalSpec::pareto(a, s2)},
                   CopulaSpec::independence());
}

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};

MeanSe mean_se(const std::vector<double>& v) {
  double s = 0.0, ss = 0.0;
  for (double e : v) s += e;
  const double n = static_cast<double>(v.size());
  const double m = s / n;
  for (double e : v) ss += (e - m) * (e - m);
  return {m, std::sqrt(ss / (n - 1.0) / n)};
}

std::vector<double> column(const SampleMatrix& s, std::size_t k) {
  const auto c = s.column(k);
  return {c.begin(), c.end()};
}

bool rel_close(double a, double b, double tol) {
  return std::abs(a - b) <= tol * std::max(1.0, std::abs(b));
}

}  // namespace

TEST_CASE("parameter validation") {
  CHECK_THROWS_AS(MarginalSpec::exponential(0.0), InvalidParameter);
  CHECK_THROWS_AS(MarginalSpec::exponential(-1.0), InvalidParameter);
  CHECK_THROWS_AS(MarginalSpec::pareto(1.0, 10.0), InvalidParameter);
  CHECK_THROWS_AS(MarginalSpec::pareto(2.0, 0.0), InvalidParameter);
  CHECK_THROWS_AS(CopulaSpec::fgm(1.01), InvalidParameter);
  CHECK_THROWS_AS(CopulaSpec::fgm(NAN), InvalidParameter);
  CHECK_NOTHROW(CopulaSpec::fgm(-1.0));
  const auto e = MarginalSpec::exponential(1.0);
  CHECK_THROWS_AS(ModelSpec({e, e, e}, CopulaSpec::fgm(0.5)), UnsupportedParameter);
  CHECK_THROWS_AS(ModelSpec({}, CopulaSpec::independence()), InvalidParameter);
}

TEST_CASE("marginal functions against quadrature") {
  for (const auto& m : {MarginalSpec::exponential(0.05), MarginalSpec::exponential(1.3),
                        MarginalSpec::pareto(2.0, 10.0), MarginalSpec::pareto(3.5, 2.0)}) {
    for (double x : {0.0, 0.3, 2.0, 17.0, 80.0}) {
      const auto surv = [&](double t) {
        return m.family() == MarginalSpec::Family::Exponential
                   ? std::exp(-m.rate() * t)
                   : std::pow(m.scale() / (m.scale() + t), m.shape());
      };
      CHECK(rel_close(m.survival(x), surv(x), 1e-13));
      CHECK(rel_close(m.cdf(x) + m.survival(x), 1.0, 1e-13));
      if (m.survival(x) > 1e-6) CHECK(rel_close(m.quantile(m.cdf(x)), x, 1e-9));
      CHECK(rel_close(m.upper_stop_loss(x), oracle::tail_integral(surv, x), 1e-9));
      const double sq = oracle::tail_integral([&](double t) { return surv(t) * surv(t); }, x);
      CHECK(rel_close(m.squared_survival_integral(x), sq, 1e-9));
      // E[(x-X)_+] = x - E[X] + E[(X-x)_+]
      CHECK(rel_close(m.lower_stop_loss(x), x - m.mean() + m.upper_stop_loss(x), 1e-12));
    }
    CHECK(rel_close(m.upper_stop_loss(0.0), m.mean(), 1e-13));
    CHECK(m.cdf(-1.0) == 0.0);
    CHECK(m.lower_stop_loss(-1.0) == 0.0);
  }
}

TEST_CASE("sample means within three standard errors") {
  const std::size_t n = 100000;
  const auto s = sample(exp_model(0.05, 0.25), n, 11);
  const auto c0 = mean_se(column(s, 0));
  const auto c1 = mean_se(column(s, 1));
  CHECK(std::abs(c0.mean - 20.0) <= 3.0 * c0.se);
  CHECK(std::abs(c1.mean - 4.0) <= 3.0 * c1.se);

  // shape 5: finite fourth moment, so the estimated standard error is reliable
  const auto p = sample(pareto_model(5.0, 10.0, 20.0), n, 12);
  const auto p0 = mean_se(column(p, 0));
  const auto p1 = mean_se(column(p, 1));
  CHECK(std::abs(p0.mean - 2.5) <= 3.0 * p0.se);
  CHECK(std::abs(p1.mean - 5.0) <= 3.0 * p1.se);
}

TEST_CASE("marginals pass Kolmogorov-Smirnov at 1%") {
  const std::size_t n = 100000;
  const std::vector<ModelSpec> models = {exp_model(0.05, 0.25), pareto_model(2.0, 10.0, 5.0),
                                         fgm_exp_model(0.5, 2.0, 1.0),
                                         fgm_exp_model(1.0, 1.0, -0.8)};
  std::uint64_t seed = 100;
  for (const auto& m : models) {
    const auto s = sample(m, n, seed++);
    for (std::size_t k = 0; k < 2; ++k) {
      const auto& marg = m.marginal(k);
      const double ks = oracle::ks_statistic(column(s, k), [&](double x) { return marg.cdf(x); });
      CHECK(ks < oracle::ks_critical_1pct(n));
    }
  }
}

TEST_CASE("FGM Spearman rho is theta/3") {
  // rho_S = 12 int int C(u,v) du dv - 3, evaluated by midpoint quadrature
  auto rho_quadrature = [](double theta) {
    const int m = 400;
    double acc = 0.0;
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) {
        const double u = (i + 0.5) / m, v = (j + 0.5) / m;
        acc += u * v * (1.0 + theta * (1.0 - u) * (1.0 - v));
      }
    return 12.0 * acc / (m * m) - 3.0;
  };
  const std::size_t n = 100000;
  for (double theta : {1.0, -1.0, 0.4}) {
    const double expected = rho_quadrature(theta);
    CHECK(expected == doctest::Approx(theta / 3.0).epsilon(1e-4));
    const auto s = sample(fgm_exp_model(1.0, 0.3, theta), n, 77);
    const double rho = oracle::spearman_rho(column(s, 0), column(s, 1));
    // Var of the rank correlation is at most 1/(n-1); 3 standard errors
    CHECK(std::abs(rho - expected) <= 3.0 / std::sqrt(static_cast<double>(n - 1)));
  }
}

TEST_CASE("FGM empirical copula on a 5x5 grid") {
  const double theta = 0.9;
  const auto m = fgm_exp_model(1.0, 2.0, theta);
  const std::size_t n = 200000;
  const auto s = sample(m, n, 5);
  const auto cop = CopulaSpec::fgm(theta);
  for (int a = 1; a <= 5; ++a)
    for (int b = 1; b <= 5; ++b) {
      const double u = a / 6.0, v = b / 6.0;
      const double x = m.marginal(0).quantile(u);
      const double y = m.marginal(1).quantile(v);
      std::size_t hits = 0;
      for (std::size_t j = 0; j < n; ++j) hits += (s(j, 0) <= x && s(j, 1) <= y) ? 1 : 0;
      const double c = u * v * (1.0 + theta * (1.0 - u) * (1.0 - v));
      CHECK(cop(u, v) == doctest::Approx(c).epsilon(1e-15));
      const double p = static_cast<double>(hits) / static_cast<double>(n);
      CHECK(std::abs(p - c) <= 3.0 * std::sqrt(c * (1.0 - c) / static_cast<double>(n)));
    }
}

TEST_CASE("FGM conditional inverse") {
  for (double t : {0.0, 0.1, 0.5, 0.93, 1.0}) {
    CHECK(fgm_conditional_inverse(0.3, t, 0.0) == doctest::Approx(t).epsilon(1e-15));
    CHECK(fgm_conditional_inverse(0.5, t, 0.8) == doctest::Approx(t).epsilon(1e-15));
  }
  // conditional cdf of V given U=u: v + theta v (1-v) (1-2u)
  for (double theta : {-1.0, -0.3, 0.6, 1.0})
    for (double u : {0.01, 0.1, 0.4, 0.77, 0.99})
      for (double t : {0.001, 0.2, 0.5, 0.8, 0.999}) {
        const double v = fgm_conditional_inverse(u, t, theta);
        CHECK(v > 0.0);
        CHECK(v < 1.0);
        const double back = v + theta * v * (1.0 - v) * (1.0 - 2.0 * u);
        CHECK(back == doctest::Approx(t).epsilon(1e-12));
      }
}

TEST_CASE("univariate l-functions: hand values") {
  // at x = 0 the stop-loss equals the mean and alpha = 1/2 halves it
  CHECK(l_exponential(1.0, 0.0, Level(0.5)) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(l_pareto(2.0, 10.0, 0.0, Level(0.5)) == doctest::Approx(5.0).epsilon(1e-15));
  // l(x) = alpha E[(X-x)_+] - (1-alpha) E[(x-X)_+]
  for (double a : {0.2, 0.7})
    for (double x : {0.5, 3.0, 25.0}) {
      const auto e = MarginalSpec::exponential(0.25);
      const auto p = MarginalSpec::pareto(2.0, 10.0);
      CHECK(rel_close(l_exponential(0.25, x, Level(a)),
                      a * e.upper_stop_loss(x) - (1 - a) * e.lower_stop_loss(x), 1e-12));
      CHECK(rel_close(l_pareto(2.0, 10.0, x, Level(a)),
                      a * p.upper_stop_loss(x) - (1 - a) * p.lower_stop_loss(x), 1e-12));
    }
}

TEST_CASE("closed-form systems equal the all-ones model residual") {
  const auto ones = ScoringMatrix::ones(2);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> ux(0.0, 40.0);
  std::uniform_real_distribution<double> ua(0.05, 0.95);
  for (int rep = 0; rep < 30; ++rep) {
    Vector x(2);
    x << ux(rng), 0.2 * ux(rng);
    const Level lv(ua(rng));
    const Vector ex = exponential_indep_system(0.05, 0.25, x, lv);
    const Vector er = model_residual(exp_model(0.05, 0.25), ones, lv, x);
    const Vector px = pareto_indep_system(2.0, 10.0, 3.0, x, lv);
    const Vector pr = model_residual(pareto_model(2.0, 10.0, 3.0), ones, lv, x);
    const Vector fx = fgm_exponential_system(0.05, 0.25, 0.7, x, lv);
    const Vector fr = model_residual(fgm_exp_model(0.05, 0.25, 0.7), ones, lv, x);
    for (int k = 0; k < 2; ++k) {
      CHECK(rel_close(ex[k], er[k], 1e-11));
      CHECK(rel_close(px[k], pr[k], 1e-11));
      CHECK(rel_close(fx[k], fr[k], 1e-11));
    }
  }
}

TEST_CASE("FGM with theta = 0 reduces to independence") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> ux(0.0, 30.0);
  for (int rep = 0; rep < 20; ++rep) {
    Vector x(2);
    x << ux(rng), ux(rng) / 5.0;
    const Level lv(0.1 + 0.04 * rep);
    const Vector f = fgm_exponential_system(0.05, 0.25, 0.0, x, lv);
    const Vector e = exponential_indep_system(0.05, 0.25, x, lv);
    CHECK(rel_close(f[0], e[0], 1e-12));
    CHECK(rel_close(f[1], e[1], 1e-12));
  }
}

TEST_CASE("joint stop-loss terms agree with Monte Carlo") {
  const std::size_t n = 1000000;
  const std::vector<ModelSpec> models = {exp_model(0.05, 0.25), pareto_model(3.0, 10.0, 4.0),
                                         fgm_exp_model(0.05, 0.25, 1.0),
                                         fgm_exp_model(0.05, 0.25, -1.0)};
  std::uint64_t seed = 900;
  for (const auto& m : models) {
    const auto s = sample(m, n, seed++);
    const Vector x = m.means() * 0.9;
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t k = 0; k < 2; ++k) {
        const double xi = x[static_cast<Eigen::Index>(i)];
        const double xk = x[static_cast<Eigen::Index>(k)];
        std::vector<double> up(n), down(n), above(n), below(n);
        for (std::size_t j = 0; j < n; ++j) {
          up[j] = s(j, k) > xk ? oracle::pos(s(j, i) - xi) : 0.0;
          down[j] = s(j, k) < xk ? oracle::pos(xi - s(j, i)) : 0.0;
          above[j] = (s(j, i) > xi && s(j, k) > xk) ? 1.0 : 0.0;
          below[j] = (s(j, i) < xi && s(j, k) < xk) ? 1.0 : 0.0;
        }
        const auto mu = mean_se(up), md = mean_se(down);
        const auto ma = mean_se(above), mb = mean_se(below);
        CHECK(std::abs(m.joint_upper(i, k, xi, xk) - mu.mean) <= 3.0 * mu.se);
        CHECK(std::abs(m.joint_lower(i, k, xi, xk) - md.mean) <= 3.0 * md.se);
        CHECK(std::abs(m.prob_both_above(i, k, xi, xk) - ma.mean) <= 3.0 * ma.se);
        CHECK(std::abs(m.prob_both_below(i, k, xi, xk) - mb.mean) <= 3.0 * mb.se);
      }
  }
}

TEST_CASE("sampling is deterministic in the seed") {
  const auto m = fgm_exp_model(1.0, 2.0, 0.5);
  const auto a = sample(m, 500, 42);
  const auto b = sample(m, 500, 42);
  const auto c = sample(m, 500, 43);
  CHECK(a.matrix() == b.matrix());
  CHECK(a.matrix() != c.matrix());

  ModelStream stream(m, 42);
  std::vector<double> row(2);
  for (std::size_t j = 0; j < 500; ++j) {
    stream.draw(row);
    CHECK(row[0] == a(j, 0));
    CHECK(row[1] == a(j, 1));
  }
}

TEST_CASE("uniform stream stays strictly inside the unit interval") {
  UniformStream u(0);
  for (int i = 0; i < 100000; ++i) {
    const double v = u.next();
    REQUIRE(v > 0.0);
    REQUIRE(v < 1.0);
  }
}

TEST_CASE("split seeds are distinct") {
  std::set<std::uint64_t> seen;
  for (std::uint64_t m : {0ULL, 1ULL, 20240101ULL})
    for (std::uint64_t c = 0; c < 1000; ++c) seen.insert(split_seed(m, c));
  CHECK(seen.size() == 3000);
  CHECK(split_seed(5, 9) == split_seed(5, 9));
}
