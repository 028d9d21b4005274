#include "labelshift/adapt.hpp"

#include <cmath>

#include "labelshift/error.hpp"

namespace labelshift {

void AdaptedModel::validate() const {
  const auto m = static_cast<std::size_t>(source_model.num_classes);
  require(weights.size() == m, "adapted model: weight count does not match class count");
  require(source_priors.size() == m, "adapted model: prior count does not match class count");
  require(source_model.alpha.cols() + 1 == m, "adapted model: coefficient columns do not match class count");
}

Vector reweight_posterior(std::span<const double> p_row, const WeightVector& w) {
  require(p_row.size() == w.size(), "reweight_posterior: length mismatch");
  double denom = 0.0;
  for (std::size_t k = 0; k < p_row.size(); ++k) denom += w[k] * p_row[k];
  require(denom > 0.0, "reweight_posterior: zero denominator");
  Vector out(p_row.size());
  for (std::size_t k = 0; k < p_row.size(); ++k) out[k] = w[k] * p_row[k] / denom;
  return out;
}

std::vector<int> argmax_rows(const ProbMatrix& probs) {
  std::vector<int> out(probs.rows());
  for (std::size_t i = 0; i < probs.rows(); ++i) {
    const auto row = probs.row(i);
    std::size_t best = 0;
    for (std::size_t k = 1; k < row.size(); ++k)
      if (row[k] > row[best]) best = k;
    out[i] = static_cast<int>(best);
  }
  return out;
}

TargetPrediction predict_target(const AdaptedModel& model, const Matrix& points) {
  model.validate();
  ProbMatrix p = klr_predict(model.source_model, points);
  for (std::size_t i = 0; i < p.rows(); ++i) {
    const Vector q = reweight_posterior(p.row(i), model.weights);
    std::copy(q.begin(), q.end(), p.values.row(i).begin());
  }
  auto labels = argmax_rows(p);
  return {std::move(p), std::move(labels)};
}

Vector target_class_probs(const WeightVector& w, std::span<const double> source_priors) {
  return reweight_posterior(source_priors, w);
}

Vector target_class_probs(const AdaptedModel& model) {
  return target_class_probs(model.weights, model.source_priors);
}

AdaptResult adapt_with_model(const KlrModel& model, std::span<const int> source_labels,
                             const Matrix& target_unlabeled) {
  require(target_unlabeled.rows() >= 1, "adapt: target sample is empty");
  Vector p_hat = empirical_class_probs(source_labels, model.num_classes);
  ProbMatrix target_probs = klr_predict(model, target_unlabeled);
  MatchProblem problem{p_hat, target_probs, 1e-12};
  CpmSolution sol = cpm_solve(problem);
  AdaptResult out{AdaptedModel{model, sol.w, std::move(p_hat)}, CvResult{}, std::move(target_probs),
                  std::move(sol)};
  out.cv.model = model;
  out.cv.kernel = model.kernel;
  out.cv.lambda = model.lambda;
  return out;
}

AdaptResult adapt_pipeline(const Dataset& source, const Matrix& target_unlabeled,
                           const CvGrid& grid, std::uint64_t seed, std::size_t threads) {
  source.validate();
  require(target_unlabeled.rows() >= 1, "adapt: target sample is empty");
  require(target_unlabeled.cols() == source.dim(), "adapt: target has " +
                                                       std::to_string(target_unlabeled.cols()) +
                                                       " features, source has " +
                                                       std::to_string(source.dim()));
  const Vector p_hat = empirical_class_probs(source.labels, source.num_classes);
  for (std::size_t k = 0; k < p_hat.size(); ++k)
    require(p_hat[k] > 0.0, "adapt: class " + source.class_name(static_cast<int>(k)) +
                                " is absent from the source sample");
  CvResult cv = cv_select(source, grid, seed, threads);
  AdaptResult out = adapt_with_model(cv.model, source.labels, target_unlabeled);
  out.cv = std::move(cv);
  return out;
}

}  // namespace labelshift
