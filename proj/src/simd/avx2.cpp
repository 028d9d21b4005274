// Compiled with -mavx2 -mfma -ffp-contract=off; only reached after a runtime
// CPU check.
#include "labelshift/simd.hpp"

#include <immintrin.h>

namespace labelshift::simd::detail {
namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

// Two accumulators per vector, 8 doubles per step. dot() goes through the same
// path so dot(a, b) == dot_multi(a, {b}) bit for bit.
template <std::size_t K>
void dot_group(const double* a, const double* const* bs, std::size_t n, double* out) {
  __m256d acc0[K];
  __m256d acc1[K];
  for (std::size_t c = 0; c < K; ++c) {
    acc0[c] = _mm256_setzero_pd();
    acc1[c] = _mm256_setzero_pd();
  }
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256d a0 = _mm256_loadu_pd(a + i);
    const __m256d a1 = _mm256_loadu_pd(a + i + 4);
    for (std::size_t c = 0; c < K; ++c) {
      acc0[c] = _mm256_fmadd_pd(a0, _mm256_loadu_pd(bs[c] + i), acc0[c]);
      acc1[c] = _mm256_fmadd_pd(a1, _mm256_loadu_pd(bs[c] + i + 4), acc1[c]);
    }
  }
  for (std::size_t c = 0; c < K; ++c) {
    double s = hsum(_mm256_add_pd(acc0[c], acc1[c]));
    for (std::size_t r = i; r < n; ++r) s += a[r] * bs[c][r];
    out[c] = s;
  }
}

void dot_multi(const double* a, const double* const* bs, std::size_t k, std::size_t n,
               double* out) {
  std::size_t c = 0;
  for (; c + 4 <= k; c += 4) dot_group<4>(a, bs + c, n, out + c);
  switch (k - c) {
    case 3: dot_group<3>(a, bs + c, n, out + c); break;
    case 2: dot_group<2>(a, bs + c, n, out + c); break;
    case 1: dot_group<1>(a, bs + c, n, out + c); break;
    default: break;
  }
}

double dot(const double* a, const double* b, std::size_t n) {
  double out = 0.0;
  dot_group<1>(a, &b, n, &out);
  return out;
}

void sq_dist_row(const double* x, const double* cols_t, std::size_t m, std::size_t d,
                 double* out) {
  std::size_t j = 0;
  for (; j + 4 <= m; j += 4) {
    __m256d acc = _mm256_setzero_pd();
    for (std::size_t k = 0; k < d; ++k) {
      const __m256d diff =
          _mm256_sub_pd(_mm256_set1_pd(x[k]), _mm256_loadu_pd(cols_t + k * m + j));
      acc = _mm256_add_pd(acc, _mm256_mul_pd(diff, diff));
    }
    _mm256_storeu_pd(out + j, acc);
  }
  for (; j < m; ++j) {
    double acc = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
      const double diff = x[k] - cols_t[k * m + j];
      acc += diff * diff;
    }
    out[j] = acc;
  }
}

}  // namespace

const Kernels kAvx2{Isa::Avx2, &dot, &dot_multi, &sq_dist_row};

}  // namespace labelshift::simd::detail
