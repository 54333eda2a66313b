// AVX2/FMA variants. This file is compiled with -mavx2 -mfma and must only be
// entered after the dispatcher has confirmed CPU support.

#include <immintrin.h>

#include "kernels_internal.hpp"

namespace vtv::simd::detail {

namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

}  // namespace

double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4),
                           _mm256_loadu_pd(b + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  }
  double acc = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i),
                                            _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void mul_inplace_avx2(const double* x, double* y, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i,
                     _mm256_mul_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] *= x[i];
}

// Same operation order as the scalar reference (no fused multiply-add), so
// the two paths agree bitwise.
void point_segment_dist2_avx2(double px, double py, const double* ax,
                              const double* ay, const double* bx,
                              const double* by, double* out, std::size_t n) {
  const __m256d vpx = _mm256_set1_pd(px);
  const __m256d vpy = _mm256_set1_pd(py);
  const __m256d zero = _mm256_setzero_pd();
  const __m256d one = _mm256_set1_pd(1.0);
  std::size_t k = 0;
  for (; k + 4 <= n; k += 4) {
    const __m256d vax = _mm256_loadu_pd(ax + k);
    const __m256d vay = _mm256_loadu_pd(ay + k);
    const __m256d ux = _mm256_sub_pd(_mm256_loadu_pd(bx + k), vax);
    const __m256d uy = _mm256_sub_pd(_mm256_loadu_pd(by + k), vay);
    const __m256d wx = _mm256_sub_pd(vpx, vax);
    const __m256d wy = _mm256_sub_pd(vpy, vay);
    const __m256d len2 =
        _mm256_add_pd(_mm256_mul_pd(ux, ux), _mm256_mul_pd(uy, uy));
    const __m256d proj =
        _mm256_add_pd(_mm256_mul_pd(wx, ux), _mm256_mul_pd(wy, uy));
    const __m256d positive = _mm256_cmp_pd(len2, zero, _CMP_GT_OQ);
    // Degenerate segments divide by 1 and are then masked to t = 0.
    const __m256d safe_len2 = _mm256_blendv_pd(one, len2, positive);
    __m256d t = _mm256_blendv_pd(zero, _mm256_div_pd(proj, safe_len2), positive);
    t = _mm256_min_pd(_mm256_max_pd(t, zero), one);
    const __m256d dx = _mm256_sub_pd(wx, _mm256_mul_pd(t, ux));
    const __m256d dy = _mm256_sub_pd(wy, _mm256_mul_pd(t, uy));
    _mm256_storeu_pd(out + k,
                     _mm256_add_pd(_mm256_mul_pd(dx, dx), _mm256_mul_pd(dy, dy)));
  }
  if (k < n) {
    point_segment_dist2_scalar(px, py, ax + k, ay + k, bx + k, by + k, out + k,
                               n - k);
  }
}

}  // namespace vtv::simd::detail
