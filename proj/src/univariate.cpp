#include "mvexpectile/univariate.hpp"

#include <algorithm>
#include <cmath>

#include "mvexpectile/kernels.hpp"

namespace mvexpectile {

namespace {

constexpr int kMaxBisections = 200;

// h is decreasing with h(lo) >= 0 >= h(hi). Bisect until the bracket
// collapses to adjacent doubles (or the cap) and keep the smallest |h| seen.
template <class H>
double bisect_decreasing(H&& h, double lo, double hi) {
  double best = lo;
  double best_abs = std::abs(h(lo));
  for (int it = 0; it < kMaxBisections; ++it) {
    const double mid = lo + 0.5 * (hi - lo);
    if (mid <= lo || mid >= hi) break;
    const double v = h(mid);
    if (std::abs(v) < best_abs) {
      best = mid;
      best_abs = std::abs(v);
    }
    if (v == 0.0) return mid;
    if (v > 0.0) lo = mid; else hi = mid;
  }
  const double h_hi = std::abs(h(hi));
  if (h_hi < best_abs) best = hi;
  return best;
}

}  // namespace

double univariate_expectile(std::span<const double> sample, Level level) {
  if (sample.empty()) throw InvalidParameter("univariate expectile of an empty sample");
  if (!std::all_of(sample.begin(), sample.end(), [](double v) { return std::isfinite(v); })) {
    throw InvalidParameter("univariate expectile of a sample with non-finite values");
  }
  const auto [lo_it, hi_it] = std::minmax_element(sample.begin(), sample.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  if (lo == hi) return lo;
  const double a = level.value();
  auto h = [&](double x) {
    const auto s = kernels::stop_loss_sums(sample, sample, x, x);
    return a * s.upper - (1.0 - a) * s.lower;
  };
  return bisect_decreasing(h, lo, hi);
}

double univariate_expectile(const MarginalSpec& marginal, Level level) {
  const double a = level.value();
  auto h = [&](double x) {
    return a * marginal.upper_stop_loss(x) - (1.0 - a) * marginal.lower_stop_loss(x);
  };
  // h(0) = alpha * mean > 0 on the non-negative supports of the catalogue
  double hi = std::max(1.0, marginal.mean());
  while (h(hi) > 0.0) hi *= 2.0;
  return bisect_decreasing(h, 0.0, hi);
}

double univariate_expectile(const UnivariateExpectileQuery& query) {
  return std::visit([&](const auto& data) { return univariate_expectile(data, query.level); },
                    query.data);
}

Vector marginal_expectiles(const SampleMatrix& sample, Level level) {
  Vector e(static_cast<Eigen::Index>(sample.dim()));
  for (std::size_t k = 0; k < sample.dim(); ++k)
    e[static_cast<Eigen::Index>(k)] = univariate_expectile(sample.column(k), level);
  return e;
}

Vector marginal_expectiles(const ModelSpec& model, Level level) {
  Vector e(static_cast<Eigen::Index>(model.dim()));
  for (std::size_t k = 0; k < model.dim(); ++k)
    e[static_cast<Eigen::Index>(k)] = univariate_expectile(model.marginal(k), level);
  return e;
}

}  // namespace mvexpectile
