#pragma once

// Data-parallel inner loops shared by the geometry and network code.
//
// Every kernel has a portable scalar reference implementation; an AVX2/FMA
// variant is compiled into its own translation unit and picked at runtime
// when the CPU supports it. Setting VTV_SIMD=scalar in the environment forces
// the reference path.

#include <cstddef>
#include <span>
#include <string_view>

namespace vtv::simd {

struct KernelTable {
  std::string_view name;

  // sum_i a[i] * b[i]
  double (*dot)(const double* a, const double* b, std::size_t n);

  // y[i] += alpha * x[i]
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);

  // y[i] = y[i] * x[i]  (elementwise, in place)
  void (*mul_inplace)(const double* x, double* y, std::size_t n);

  // out[k] = squared distance from (px, py) to segment (ax[k],ay[k])-(bx[k],by[k])
  void (*point_segment_dist2)(double px, double py, const double* ax,
                              const double* ay, const double* bx,
                              const double* by, double* out, std::size_t n);
};

const KernelTable& scalar_kernels() noexcept;

// nullptr when the binary was built without AVX2 support or the host CPU
// lacks AVX2/FMA.
const KernelTable* avx2_kernels() noexcept;

// The table used by the library. Resolved once on first use.
const KernelTable& active() noexcept;

inline double dot(std::span<const double> a, std::span<const double> b) {
  return active().dot(a.data(), b.data(), a.size());
}

inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  active().axpy(alpha, x.data(), y.data(), x.size());
}

// y = W x + bias, W row-major rows x cols.
void gemv(const double* w, std::size_t rows, std::size_t cols, const double* x,
          const double* bias, double* y);

// x_grad += W^T g ; w_grad += g x^T
void gemv_backward(const double* w, std::size_t rows, std::size_t cols,
                   const double* x, const double* g, double* x_grad,
                   double* w_grad);

}  // namespace vtv::simd
