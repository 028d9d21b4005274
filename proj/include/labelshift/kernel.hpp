#pragma once

#include <span>

#include "labelshift/matrix.hpp"

namespace labelshift {

/// Gaussian RBF kernel k(x, x') = exp(-g * ||x - x'||^2).
///
/// `g` plays the role of 1/gamma^2 for a bandwidth gamma. The grid values used
/// by cross-validation are values of g directly.
class KernelParams {
 public:
  explicit KernelParams(double gamma_sq_inv);
  double gamma_sq_inv() const { return g_; }
  friend bool operator==(const KernelParams&, const KernelParams&) = default;

 private:
  double g_;
};

double kernel_eval(std::span<const double> x, std::span<const double> y, const KernelParams& params);

/// Dense kernel matrix between two point sets. `self` is set when both sets
/// were the same object, in which case values are exactly symmetric with a
/// unit diagonal.
struct GramMatrix {
  Matrix values;
  bool self = false;

  std::size_t rows() const { return values.rows(); }
  std::size_t cols() const { return values.cols(); }
};

GramMatrix gram(const Matrix& rows, const Matrix& cols, const KernelParams& params);
GramMatrix self_gram(const Matrix& points, const KernelParams& params);

/// Principal submatrix / cross block of a precomputed Gram matrix.
GramMatrix gram_block(const GramMatrix& full, std::span<const std::size_t> row_idx,
                      std::span<const std::size_t> col_idx);

/// out(i, c) = sum_j a(i, j) * bt(c, j). `bt` holds one vector per row, so this is
/// a * bt^T with every inner product running over contiguous memory.
Matrix multiply_transposed(const Matrix& a, const Matrix& bt);

}  // namespace labelshift
