#include <doctest.h>

#include <cmath>
#include <vector>

#include "vtv/random.hpp"
#include "vtv/simd/kernels.hpp"

using namespace vtv;

namespace {

std::vector<double> random_vector(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(-3, 3);
  return v;
}

}  // namespace

TEST_CASE("active table is one of the compiled variants") {
  const auto& t = simd::active();
  CHECK((t.name == "scalar" || t.name == "avx2"));
  if (simd::avx2_kernels() == nullptr) CHECK(t.name == "scalar");
}

TEST_CASE("AVX2 kernels match the scalar reference") {
  const simd::KernelTable* fast = simd::avx2_kernels();
  if (fast == nullptr) {
    MESSAGE("AVX2 unavailable on this host; equivalence not exercised");
    return;
  }
  const simd::KernelTable& ref = simd::scalar_kernels();
  Rng rng(1);
  for (std::size_t n : {0u, 1u, 3u, 4u, 5u, 7u, 8u, 9u, 15u, 16u, 17u, 31u, 64u, 100u, 1023u}) {
    const auto a = random_vector(rng, n);
    const auto b = random_vector(rng, n);
    double norm = 0.0;
    for (std::size_t i = 0; i < n; ++i) norm += std::abs(a[i] * b[i]);
    CHECK(std::abs(fast->dot(a.data(), b.data(), n) - ref.dot(a.data(), b.data(), n)) <= 1e-12 * (norm + 1));

    auto y1 = b, y2 = b;
    fast->axpy(0.75, a.data(), y1.data(), n);
    ref.axpy(0.75, a.data(), y2.data(), n);
    for (std::size_t i = 0; i < n; ++i) CHECK(y1[i] == doctest::Approx(y2[i]).epsilon(1e-15));

    auto m1 = b, m2 = b;
    fast->mul_inplace(a.data(), m1.data(), n);
    ref.mul_inplace(a.data(), m2.data(), n);
    CHECK(m1 == m2);

    const auto ax = random_vector(rng, n), ay = random_vector(rng, n);
    auto bx = random_vector(rng, n), by = random_vector(rng, n);
    if (n > 2) {
      bx[1] = ax[1];  // zero-length segment
      by[1] = ay[1];
    }
    std::vector<double> d1(n), d2(n);
    fast->point_segment_dist2(0.3, -0.7, ax.data(), ay.data(), bx.data(), by.data(), d1.data(), n);
    ref.point_segment_dist2(0.3, -0.7, ax.data(), ay.data(), bx.data(), by.data(), d2.data(), n);
    for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(d1[i] - d2[i]) <= 1e-12 * (1 + d2[i]));
  }
}

TEST_CASE("scalar point-segment distance") {
  const double ax[] = {0, 0, 0};
  const double ay[] = {0, 0, 0};
  const double bx[] = {10, 0, 10};
  const double by[] = {0, 0, 0};
  double out[3];
  simd::scalar_kernels().point_segment_dist2(5, 3, ax, ay, bx, by, out, 3);
  CHECK(out[0] == 9.0);
  CHECK(out[1] == 34.0);  // degenerate segment: distance to its point
  CHECK(out[2] == 9.0);
  simd::scalar_kernels().point_segment_dist2(-4, 3, ax, ay, bx, by, out, 1);
  CHECK(out[0] == 25.0);
}

TEST_CASE("gemv and its transpose products") {
  Rng rng(2);
  const std::size_t rows = 7, cols = 13;
  const auto w = random_vector(rng, rows * cols);
  const auto x = random_vector(rng, cols);
  const auto bias = random_vector(rng, rows);
  std::vector<double> y(rows);
  simd::gemv(w.data(), rows, cols, x.data(), bias.data(), y.data());
  for (std::size_t r = 0; r < rows; ++r) {
    double ref = bias[r];
    for (std::size_t c = 0; c < cols; ++c) ref += w[r * cols + c] * x[c];
    CHECK(y[r] == doctest::Approx(ref).epsilon(1e-13));
  }
  const auto g = random_vector(rng, rows);
  std::vector<double> xg(cols, 0.0), wg(rows * cols, 0.0);
  simd::gemv_backward(w.data(), rows, cols, x.data(), g.data(), xg.data(), wg.data());
  for (std::size_t c = 0; c < cols; ++c) {
    double ref = 0.0;
    for (std::size_t r = 0; r < rows; ++r) ref += w[r * cols + c] * g[r];
    CHECK(xg[c] == doctest::Approx(ref).epsilon(1e-13));
  }
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) CHECK(wg[r * cols + c] == doctest::Approx(g[r] * x[c]).epsilon(1e-15));
  }
}
