#include "labelshift/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "labelshift/simd.hpp"

namespace labelshift {

KernelParams::KernelParams(double gamma_sq_inv) : g_(gamma_sq_inv) {
  require(std::isfinite(g_) && g_ > 0.0,
          "kernel coefficient must be positive and finite, got " + std::to_string(g_));
}

double kernel_eval(std::span<const double> x, std::span<const double> y,
                   const KernelParams& params) {
  require(x.size() == y.size(), "kernel_eval: dimension mismatch");
  double sq = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double diff = x[k] - y[k];
    sq += diff * diff;
  }
  return std::exp(-params.gamma_sq_inv() * sq);
}

GramMatrix gram(const Matrix& rows, const Matrix& cols, const KernelParams& params) {
  require(rows.rows() > 0 && cols.rows() > 0, "gram: empty point set");
  require(rows.cols() == cols.cols(), "gram: dimension mismatch");
  const std::size_t m = cols.rows();
  const std::size_t d = cols.cols();
  const Matrix cols_t = cols.transposed();
  const auto& k = simd::active();
  const double g = params.gamma_sq_inv();

  GramMatrix out{Matrix(rows.rows(), m), &rows == &cols};
  for (std::size_t i = 0; i < rows.rows(); ++i) {
    double* dst = out.values.row(i).data();
    k.sq_dist_row(rows.row(i).data(), cols_t.data().data(), m, d, dst);
    for (std::size_t j = 0; j < m; ++j) dst[j] = std::exp(-g * dst[j]);
  }
  return out;
}

GramMatrix self_gram(const Matrix& points, const KernelParams& params) {
  return gram(points, points, params);
}

GramMatrix gram_block(const GramMatrix& full, std::span<const std::size_t> row_idx,
                      std::span<const std::size_t> col_idx) {
  GramMatrix out{Matrix(row_idx.size(), col_idx.size()), false};
  for (std::size_t a = 0; a < row_idx.size(); ++a) {
    require(row_idx[a] < full.rows(), "gram_block: row index out of range");
    const auto src = full.values.row(row_idx[a]);
    auto dst = out.values.row(a);
    for (std::size_t b = 0; b < col_idx.size(); ++b) dst[b] = src[col_idx[b]];
  }
  out.self = full.self && std::equal(row_idx.begin(), row_idx.end(), col_idx.begin(),
                                     col_idx.end());
  return out;
}

Matrix multiply_transposed(const Matrix& a, const Matrix& bt) {
  require(a.cols() == bt.cols(), "multiply_transposed: inner dimension mismatch");
  const std::size_t k = bt.rows();
  std::vector<const double*> vecs(k);
  for (std::size_t c = 0; c < k; ++c) vecs[c] = bt.row(c).data();
  const auto& kern = simd::active();
  Matrix out(a.rows(), k);
  for (std::size_t i = 0; i < a.rows(); ++i)
    kern.dot_multi(a.row(i).data(), vecs.data(), k, a.cols(), out.row(i).data());
  return out;
}

}  // namespace labelshift
