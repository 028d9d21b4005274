#pragma once

// Inner-loop kernels with a portable scalar reference and vectorized variants.
// The variant is picked once at startup from CPU features and can be
// overridden with LABELSHIFT_SIMD=scalar|avx2 or set_active().
//
// sq_dist_row is bit-identical across variants (no FMA, same summation order
// over dimensions). dot/dot_multi reassociate the sum, so variants agree only
// to rounding.

#include <cstddef>
#include <string_view>

namespace labelshift::simd {

enum class Isa { Scalar, Avx2 };

struct Kernels {
  Isa isa;
  // sum_i a[i] * b[i]
  double (*dot)(const double* a, const double* b, std::size_t n);
  // out[c] = dot(a, bs[c], n) for c < k; reads `a` once per group of vectors.
  void (*dot_multi)(const double* a, const double* const* bs, std::size_t k, std::size_t n,
                    double* out);
  // out[j] = sum_k (x[k] - cols_t[k * m + j])^2 for j < m. cols_t is
  // dimension-major: the k-th coordinate of every column point is contiguous.
  void (*sq_dist_row)(const double* x, const double* cols_t, std::size_t m, std::size_t d,
                      double* out);
};

bool supported(Isa isa);
const Kernels& kernels(Isa isa);
const Kernels& active();
void set_active(Isa isa);
std::string_view name(Isa isa);
Isa parse_isa(std::string_view s);

namespace detail {
extern const Kernels kScalar;
#if defined(__x86_64__) || defined(_M_X64)
extern const Kernels kAvx2;
#endif
}  // namespace detail

}  // namespace labelshift::simd
