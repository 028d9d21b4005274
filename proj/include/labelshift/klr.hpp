#pragma once

// Truncated multiclass kernel logistic regression.
//
// Scores f_m(x) = sum_j alpha(j, m) k(x_j, x) for m < M-1 and f_{M-1} = 0.
// Fitting minimizes the untruncated objective
//   lambda * sum_m alpha_m' K alpha_m + (1/n) sum_i -log softmax(f(x_i))_{y_i}
// and the truncation floor is applied only when predicting. The solver is
// L-BFGS on alpha started at zero, with the inverse Gram matrix as its initial
// inverse Hessian (free, since the gradient is K times a residual that the
// objective already computes).

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "labelshift/dataset.hpp"
#include "labelshift/kernel.hpp"
#include "labelshift/lbfgsb.hpp"
#include "labelshift/matrix.hpp"

namespace labelshift {

/// n x M matrix of conditional class probabilities; every row is on the simplex.
struct ProbMatrix {
  Matrix values;

  std::size_t rows() const { return values.rows(); }
  std::size_t classes() const { return values.cols(); }
  std::span<const double> row(std::size_t i) const { return values.row(i); }
};

struct KlrFitOptions {
  double grad_tolerance = 1e-6;
  std::size_t max_iterations = 500;
  std::size_t memory = 10;
};

struct KlrFitSummary {
  std::size_t iterations = 0;
  double objective = 0.0;
  double grad_sup_norm = 0.0;
  LbfgsStatus status = LbfgsStatus::MaxIterations;
};

struct KlrModel {
  Matrix support;  // n x d training inputs
  Matrix alpha;    // n x (M-1) dual coefficients
  KernelParams kernel{1.0};
  double lambda = 0.0;
  double trunc_t = 1e-8;
  int num_classes = 2;
  KlrFitSummary fit;

  std::size_t dim() const { return support.cols(); }
  // Stable 64-bit hash of everything that affects predictions.
  std::uint64_t fingerprint() const;
};

/// exp(s_m) / sum_j exp(s_j) with max subtraction. Throws on non-finite input.
Vector softmax_scores(std::span<const double> scores);

/// Raises entries below t to t and shrinks the others proportionally to their
/// excess over t, so the result stays on the simplex with every entry >= t.
/// Requires 0 < t < 1/M and p on the simplex (sum within 1e-9).
Vector truncate_simplex(std::span<const double> p, double t);

/// Model thresholds are held to the tighter range (0, 1/(2M)).
void validate_trunc_t(double t, int num_classes);

double klr_objective(const Matrix& alpha, const GramMatrix& gram, std::span<const int> labels,
                     double lambda);
Matrix klr_gradient(const Matrix& alpha, const GramMatrix& gram, std::span<const int> labels,
                    double lambda);

KlrModel klr_fit(const Dataset& data, const KernelParams& kernel, double lambda, double trunc_t,
                 const KlrFitOptions& options = {});
// Same, reusing a precomputed self-Gram of data.features.
KlrModel klr_fit(const Dataset& data, const GramMatrix& gram, const KernelParams& kernel,
                 double lambda, double trunc_t, const KlrFitOptions& options = {});

ProbMatrix klr_predict(const KlrModel& model, const Matrix& points);
// `cross` holds k(points_i, support_j).
ProbMatrix klr_predict_gram(const KlrModel& model, const GramMatrix& cross);

/// Untruncated softmax probabilities for a model (used for checks against the
/// truncated output).
ProbMatrix klr_predict_raw(const KlrModel& model, const Matrix& points);

/// Hyperparameter grid for cross-validation. C maps to lambda = 1 / (C * n_train).
struct CvGrid {
  std::vector<double> c_values;
  std::vector<double> g_values;
  std::size_t folds = 5;
  double trunc_t = 1e-8;

  // 7 log-spaced C in [1e-6, 1], 7 log-spaced g in [2^-6, 1], 5 folds, t = 1e-8.
  static CvGrid defaults();
  void validate() const;
};

Vector log_spaced(double lo, double hi, std::size_t count);

struct CvCell {
  double c = 0.0;
  double g = 0.0;
  double mean_ce = 0.0;
  std::vector<double> fold_ce;
};

struct CvResult {
  KernelParams kernel{1.0};
  double c = 0.0;
  double lambda = 0.0;
  KlrModel model;
  std::vector<CvCell> table;  // g-major, then C, both ascending
};

/// Stratified fold assignment: fold id per sample. Throws if some class has
/// fewer than two samples (a training fold would miss it).
std::vector<std::size_t> stratified_folds(std::span<const int> labels, int num_classes,
                                          std::size_t folds, std::uint64_t seed);

/// Grid search by stratified k-fold CV on mean truncated cross-entropy, then a
/// refit on all of `data` with the winning pair. Ties go to the larger lambda
/// (smaller C), then the smaller g. `threads` caps worker threads; results do
/// not depend on it.
CvResult cv_select(const Dataset& data, const CvGrid& grid, std::uint64_t seed,
                   std::size_t threads = 1, const KlrFitOptions& options = {});

double lambda_from_c(double c, std::size_t n_train);

/// Mean of -log p(y_i | x_i) over rows.
double mean_cross_entropy(const ProbMatrix& probs, std::span<const int> labels);

}  // namespace labelshift
