#pragma once

#include <cstddef>

namespace vtv::simd::detail {

double dot_scalar(const double* a, const double* b, std::size_t n);
void axpy_scalar(double alpha, const double* x, double* y, std::size_t n);
void mul_inplace_scalar(const double* x, double* y, std::size_t n);
void point_segment_dist2_scalar(double px, double py, const double* ax,
                                const double* ay, const double* bx,
                                const double* by, double* out, std::size_t n);

#if defined(VTV_HAVE_AVX2)
double dot_avx2(const double* a, const double* b, std::size_t n);
void axpy_avx2(double alpha, const double* x, double* y, std::size_t n);
void mul_inplace_avx2(const double* x, double* y, std::size_t n);
void point_segment_dist2_avx2(double px, double py, const double* ax,
                              const double* ay, const double* bx,
                              const double* by, double* out, std::size_t n);
#endif

}  // namespace vtv::simd::detail
