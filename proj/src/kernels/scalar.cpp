#include "mvexpectile/kernels.hpp"

#include <algorithm>
#include <cstddef>

namespace mvexpectile::kernels::detail {

PairSums stop_loss_sums_scalar(std::span<const double> a, std::span<const double> b, double ta,
                               double tb) {
  PairSums s;
  const std::size_t n = a.size();
  for (std::size_t j = 0; j < n; ++j) {
    if (b[j] > tb) s.upper += std::max(a[j] - ta, 0.0);
    if (b[j] < tb) s.lower += std::max(ta - a[j], 0.0);
  }
  return s;
}

PairSums product_sums_scalar(std::span<const double> a, std::span<const double> b, double ta,
                             double tb) {
  PairSums s;
  const std::size_t n = a.size();
  for (std::size_t j = 0; j < n; ++j) {
    s.upper += std::max(a[j] - ta, 0.0) * std::max(b[j] - tb, 0.0);
    s.lower += std::max(ta - a[j], 0.0) * std::max(tb - b[j], 0.0);
  }
  return s;
}

}  // namespace mvexpectile::kernels::detail
