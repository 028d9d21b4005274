#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "labelshift/cpm.hpp"
#include "labelshift/dataset.hpp"
#include "labelshift/klr.hpp"

namespace labelshift {

/// Source posterior model plus the estimated class probability ratio.
struct AdaptedModel {
  KlrModel source_model;
  WeightVector weights;
  Vector source_priors;

  void validate() const;
};

/// w_y p_y / sum_m w_m p_m. Throws if the denominator is zero.
Vector reweight_posterior(std::span<const double> p_row, const WeightVector& w);

/// Per-row argmax; ties go to the smallest class index.
std::vector<int> argmax_rows(const ProbMatrix& probs);

struct TargetPrediction {
  ProbMatrix probs;
  std::vector<int> labels;
};

TargetPrediction predict_target(const AdaptedModel& model, const Matrix& points);

/// Normalized w_y p(y): the implied target class distribution.
Vector target_class_probs(const AdaptedModel& model);
Vector target_class_probs(const WeightVector& w, std::span<const double> source_priors);

/// Everything the pipeline computed along the way, for audit.
struct AdaptResult {
  AdaptedModel model;
  CvResult cv;
  ProbMatrix target_probs;  // truncated source posteriors on the target sample
  CpmSolution solution;
};

/// Source frequencies, CV + KLR fit, posteriors on target, CPM solve.
AdaptResult adapt_pipeline(const Dataset& source, const Matrix& target_unlabeled,
                           const CvGrid& grid, std::uint64_t seed, std::size_t threads = 1);

/// The last three steps with an already fitted source model.
AdaptResult adapt_with_model(const KlrModel& model, std::span<const int> source_labels,
                             const Matrix& target_unlabeled);

}  // namespace labelshift
