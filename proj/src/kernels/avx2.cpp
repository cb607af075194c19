// Compiled with -mavx2 -mfma; only reached after the runtime CPU check in
// dispatch.cpp.

#include "mvexpectile/kernels.hpp"

#include <immintrin.h>

#include <algorithm>
#include <cstddef>

namespace mvexpectile::kernels::detail {

namespace {

double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

}  // namespace

PairSums stop_loss_sums_avx2(std::span<const double> a, std::span<const double> b, double ta,
                             double tb) {
  const std::size_t n = a.size();
  const __m256d vta = _mm256_set1_pd(ta);
  const __m256d vtb = _mm256_set1_pd(tb);
  const __m256d zero = _mm256_setzero_pd();
  // two accumulators per side hide the add latency
  __m256d up0 = zero, up1 = zero, lo0 = zero, lo1 = zero;
  std::size_t j = 0;
  for (; j + 8 <= n; j += 8) {
    const __m256d a0 = _mm256_loadu_pd(a.data() + j);
    const __m256d a1 = _mm256_loadu_pd(a.data() + j + 4);
    const __m256d b0 = _mm256_loadu_pd(b.data() + j);
    const __m256d b1 = _mm256_loadu_pd(b.data() + j + 4);
    const __m256d gt0 = _mm256_cmp_pd(b0, vtb, _CMP_GT_OQ);
    const __m256d gt1 = _mm256_cmp_pd(b1, vtb, _CMP_GT_OQ);
    const __m256d lt0 = _mm256_cmp_pd(b0, vtb, _CMP_LT_OQ);
    const __m256d lt1 = _mm256_cmp_pd(b1, vtb, _CMP_LT_OQ);
    up0 = _mm256_add_pd(up0, _mm256_and_pd(gt0, _mm256_max_pd(_mm256_sub_pd(a0, vta), zero)));
    up1 = _mm256_add_pd(up1, _mm256_and_pd(gt1, _mm256_max_pd(_mm256_sub_pd(a1, vta), zero)));
    lo0 = _mm256_add_pd(lo0, _mm256_and_pd(lt0, _mm256_max_pd(_mm256_sub_pd(vta, a0), zero)));
    lo1 = _mm256_add_pd(lo1, _mm256_and_pd(lt1, _mm256_max_pd(_mm256_sub_pd(vta, a1), zero)));
  }
  PairSums s{hsum(_mm256_add_pd(up0, up1)), hsum(_mm256_add_pd(lo0, lo1))};
  for (; j < n; ++j) {
    if (b[j] > tb) s.upper += std::max(a[j] - ta, 0.0);
    if (b[j] < tb) s.lower += std::max(ta - a[j], 0.0);
  }
  return s;
}

PairSums product_sums_avx2(std::span<const double> a, std::span<const double> b, double ta,
                           double tb) {
  const std::size_t n = a.size();
  const __m256d vta = _mm256_set1_pd(ta);
  const __m256d vtb = _mm256_set1_pd(tb);
  const __m256d zero = _mm256_setzero_pd();
  __m256d up0 = zero, up1 = zero, lo0 = zero, lo1 = zero;
  std::size_t j = 0;
  for (; j + 8 <= n; j += 8) {
    const __m256d a0 = _mm256_loadu_pd(a.data() + j);
    const __m256d a1 = _mm256_loadu_pd(a.data() + j + 4);
    const __m256d b0 = _mm256_loadu_pd(b.data() + j);
    const __m256d b1 = _mm256_loadu_pd(b.data() + j + 4);
    up0 = _mm256_fmadd_pd(_mm256_max_pd(_mm256_sub_pd(a0, vta), zero),
                          _mm256_max_pd(_mm256_sub_pd(b0, vtb), zero), up0);
    up1 = _mm256_fmadd_pd(_mm256_max_pd(_mm256_sub_pd(a1, vta), zero),
                          _mm256_max_pd(_mm256_sub_pd(b1, vtb), zero), up1);
    lo0 = _mm256_fmadd_pd(_mm256_max_pd(_mm256_sub_pd(vta, a0), zero),
                          _mm256_max_pd(_mm256_sub_pd(vtb, b0), zero), lo0);
    lo1 = _mm256_fmadd_pd(_mm256_max_pd(_mm256_sub_pd(vta, a1), zero),
                          _mm256_max_pd(_mm256_sub_pd(vtb, b1), zero), lo1);
  }
  PairSums s{hsum(_mm256_add_pd(up0, up1)), hsum(_mm256_add_pd(lo0, lo1))};
  for (; j < n; ++j) {
    s.upper += std::max(a[j] - ta, 0.0) * std::max(b[j] - tb, 0.0);
    s.lower += std::max(ta - a[j], 0.0) * std::max(tb - b[j], 0.0);
  }
  return s;
}

}  // namespace mvexpectile::kernels::detail
