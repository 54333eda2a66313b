#include <cstdlib>
#include <cstring>

#include "kernels_internal.hpp"
#include "vtv/simd/kernels.hpp"

namespace vtv::simd {

namespace {

const KernelTable kScalar{
    "scalar",
    &detail::dot_scalar,
    &detail::axpy_scalar,
    &detail::mul_inplace_scalar,
    &detail::point_segment_dist2_scalar,
};

#if defined(VTV_HAVE_AVX2)
const KernelTable kAvx2{
    "avx2",
    &detail::dot_avx2,
    &detail::axpy_avx2,
    &detail::mul_inplace_avx2,
    &detail::point_segment_dist2_avx2,
};
#endif

const KernelTable& resolve() noexcept {
  if (const char* env = std::getenv("VTV_SIMD");
      env != nullptr && std::strcmp(env, "scalar") == 0) {
    return kScalar;
  }
  if (const KernelTable* t = avx2_kernels()) return *t;
  return kScalar;
}

}  // namespace

const KernelTable& scalar_kernels() noexcept { return kScalar; }

const KernelTable* avx2_kernels() noexcept {
#if defined(VTV_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  static const bool supported =
      __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  return supported ? &kAvx2 : nullptr;
#else
  return nullptr;
#endif
}

const KernelTable& active() noexcept {
  static const KernelTable& table = resolve();
  return table;
}

void gemv(const double* w, std::size_t rows, std::size_t cols, const double* x,
          const double* bias, double* y) {
  const KernelTable& k = active();
  for (std::size_t r = 0; r < rows; ++r) {
    y[r] = k.dot(w + r * cols, x, cols) + (bias != nullptr ? bias[r] : 0.0);
  }
}

void gemv_backward(const double* w, std::size_t rows, std::size_t cols,
                   const double* x, const double* g, double* x_grad,
                   double* w_grad) {
  const KernelTable& k = active();
  for (std::size_t r = 0; r < rows; ++r) {
    if (g[r] == 0.0) continue;
    if (x_grad != nullptr) k.axpy(g[r], w + r * cols, x_grad, cols);
    if (w_grad != nullptr) k.axpy(g[r], x, w_grad + r * cols, cols);
  }
}

}  // namespace vtv::simd
