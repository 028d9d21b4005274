#pragma once

// Comparison estimators of the class probability ratio. All three treat the
// fitted source KLR model as a black-box predictor.

#include <cstddef>
#include <span>
#include <vector>

#include "labelshift/cpm.hpp"
#include "labelshift/dataset.hpp"
#include "labelshift/klr.hpp"

namespace labelshift {

/// values(i, j): joint probability that the predictor says i while the truth is j.
struct ConfusionMatrix {
  Matrix values;
  std::size_t classes() const { return values.rows(); }
};

ConfusionMatrix confusion_estimate(const KlrModel& model, const Dataset& holdout, bool soft);
ConfusionMatrix confusion_from_probs(const ProbMatrix& probs, std::span<const int> labels,
                                     int num_classes, bool soft);

/// Predicted-class distribution on target: hard label frequencies, or mean
/// posteriors when `soft`.
Vector predicted_distribution(const ProbMatrix& target_probs, bool soft);

struct LinearShiftEstimate {
  WeightVector w;
  Vector raw;  // solution before clipping
  bool ill_conditioned = false;
  bool degenerate = false;  // every component clipped; w reset to all ones
};

/// Least-squares solve of C w = mu, negative entries clipped to zero. Falls back
/// to the pseudo-inverse (and flags it) when sigma_min(C) < 1e-10.
LinearShiftEstimate bbse_solve(const ConfusionMatrix& c, std::span<const double> target_pred_dist);

/// RLLS-style: w = 1 + theta, theta = argmin ||C theta - (mu - C 1)||^2 + reg ||theta||^2,
/// then projected onto w >= 0.
LinearShiftEstimate rlls_solve(const ConfusionMatrix& c, std::span<const double> target_pred_dist,
                               double reg);
double rlls_default_reg(const ConfusionMatrix& c);

struct MllsOptions {
  double tol = 1e-8;
  std::size_t max_iter = 10000;
  bool record_trace = false;
};

struct MllsResult {
  WeightVector w;
  Vector q;  // estimated target priors
  std::size_t iterations = 0;
  bool converged = false;
  std::vector<double> log_likelihood;  // per iterate, when recorded
  std::vector<Vector> q_trace;          // per iterate, when recorded
};

/// EM on the target class priors through fixed source posteriors, started at
/// the source priors.
MllsResult mlls_em(const ProbMatrix& target_probs, std::span<const double> source_priors,
                   const MllsOptions& options = {});

/// (1/n) sum_i log sum_m q(m) p(m|x_i) / p(m).
double mlls_log_likelihood(const ProbMatrix& target_probs, std::span<const double> source_priors,
                           std::span<const double> q);

}  // namespace labelshift
