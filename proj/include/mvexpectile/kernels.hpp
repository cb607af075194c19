#pragma once

// Data-parallel inner loops over sample columns. Each kernel has a scalar
// reference implementation; wider variants are chosen once at runtime from
// the CPU features and must agree with the reference up to summation order.

#include <span>
#include <string_view>

namespace mvexpectile::kernels {

struct PairSums {
  double upper = 0.0;
  double lower = 0.0;
};

// upper = sum_j (a_j - ta)_+ 1{b_j > tb},  lower = sum_j (ta - a_j)_+ 1{b_j < tb}
using StopLossFn = PairSums (*)(std::span<const double> a, std::span<const double> b, double ta,
                                double tb);
// upper = sum_j (a_j - ta)_+ (b_j - tb)_+, lower = sum_j (ta - a_j)_+ (tb - b_j)_+
using ProductFn = PairSums (*)(std::span<const double> a, std::span<const double> b, double ta,
                               double tb);

struct KernelTable {
  std::string_view name;
  StopLossFn stop_loss_sums;
  ProductFn product_sums;
};

const KernelTable& scalar_table();

/// Widest table the running CPU supports; nullptr if this build has none.
const KernelTable* simd_table();

/// Table used by the library. Honors MVEXPECTILE_KERNELS=scalar.
const KernelTable& active();

inline PairSums stop_loss_sums(std::span<const double> a, std::span<const double> b, double ta,
                               double tb) {
  return active().stop_loss_sums(a, b, ta, tb);
}

inline PairSums product_sums(std::span<const double> a, std::span<const double> b, double ta,
                             double tb) {
  return active().product_sums(a, b, ta, tb);
}

namespace detail {
PairSums stop_loss_sums_scalar(std::span<const double> a, std::span<const double> b, double ta,
                               double tb);
PairSums product_sums_scalar(std::span<const double> a, std::span<const double> b, double ta,
                             double tb);
#if defined(MVEXPECTILE_HAVE_AVX2)
PairSums stop_loss_sums_avx2(std::span<const double> a, std::span<const double> b, double ta,
                             double tb);
PairSums product_sums_avx2(std::span<const double> a, std::span<const double> b, double ta,
                           double tb);
#endif
}  // namespace detail

}  // namespace mvexpectile::kernels
