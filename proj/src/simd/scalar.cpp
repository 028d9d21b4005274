#include "labelshift/simd.hpp"

namespace labelshift::simd::detail {
namespace {

double dot(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

void dot_multi(const double* a, const double* const* bs, std::size_t k, std::size_t n,
               double* out) {
  for (std::size_t c = 0; c < k; ++c) out[c] = dot(a, bs[c], n);
}

void sq_dist_row(const double* x, const double* cols_t, std::size_t m, std::size_t d,
                 double* out) {
  for (std::size_t j = 0; j < m; ++j) {
    double acc = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
      const double diff = x[k] - cols_t[k * m + j];
      acc += diff * diff;
    }
    out[j] = acc;
  }
}

}  // namespace

const Kernels kScalar{Isa::Scalar, &dot, &dot_multi, &sq_dist_row};

}  // namespace labelshift::simd::detail
