#include "vtv/simd/kernels.hpp"

#include "kernels_internal.hpp"

namespace vtv::simd::detail {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void mul_inplace_scalar(const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] *= x[i];
}

void point_segment_dist2_scalar(double px, double py, const double* ax,
                                const double* ay, const double* bx,
                                const double* by, double* out, std::size_t n) {
  for (std::size_t k = 0; k < n; ++k) {
    const double ux = bx[k] - ax[k];
    const double uy = by[k] - ay[k];
    const double wx = px - ax[k];
    const double wy = py - ay[k];
    const double len2 = ux * ux + uy * uy;
    double t = len2 > 0.0 ? (wx * ux + wy * uy) / len2 : 0.0;
    t = t < 0.0 ? 0.0 : (t > 1.0 ? 1.0 : t);
    const double dx = wx - t * ux;
    const double dy = wy - t * uy;
    out[k] = dx * dx + dy * dy;
  }
}

}  // namespace vtv::simd::detail
