#include "mvexpectile/kernels.hpp"

#include <cstdlib>
#include <string_view>

namespace mvexpectile::kernels {

namespace {

constexpr KernelTable kScalar{"scalar", &detail::stop_loss_sums_scalar,
                              &detail::product_sums_scalar};

#if defined(MVEXPECTILE_HAVE_AVX2)
constexpr KernelTable kAvx2{"avx2", &detail::stop_loss_sums_avx2, &detail::product_sums_avx2};

bool cpu_has_avx2() {
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
}
#endif

const KernelTable& select() {
  if (const char* forced = std::getenv("MVEXPECTILE_KERNELS");
      forced != nullptr && std::string_view(forced) == "scalar") {
    return kScalar;
  }
  if (const KernelTable* simd = simd_table()) return *simd;
  return kScalar;
}

}  // namespace

const KernelTable& scalar_table() { return kScalar; }

const KernelTable* simd_table() {
#if defined(MVEXPECTILE_HAVE_AVX2)
  static const bool available = cpu_has_avx2();
  return available ? &kAvx2 : nullptr;
#else
  return nullptr;
#endif
}

const KernelTable& active() {
  static const KernelTable& table = select();
  return table;
}

}  // namespace mvexpectile::kernels
