#pragma once

// Class probability matching: pick w >= 0 so that the source class frequencies
// match the target average of source posteriors reweighted by w,
//   r_y(w) = (1/n_q) sum_i p(y|x_i) / sum_m w_m p(m|x_i).

#include <span>
#include <vector>

#include "labelshift/klr.hpp"
#include "labelshift/lbfgsb.hpp"
#include "labelshift/matrix.hpp"

namespace labelshift {

/// Nonnegative class probability ratio estimate, at least one entry positive.
class WeightVector {
 public:
  explicit WeightVector(Vector w);
  static WeightVector ones(std::size_t m) { return WeightVector(Vector(m, 1.0)); }

  std::size_t size() const { return w_.size(); }
  double operator[](std::size_t i) const { return w_[i]; }
  const Vector& values() const { return w_; }

 private:
  Vector w_;
};

struct MatchProblem {
  Vector p_hat;             // source class frequencies
  ProbMatrix target_probs;  // source posteriors at the unlabeled target points
  double floor_s = 1e-12;   // lower clamp on sum_m w_m p(m|x_i)

  std::size_t classes() const { return p_hat.size(); }
  void validate() const;
};

struct CpmSolveOptions {
  std::size_t max_iterations = 1000;
  double pg_tolerance = 1e-8;
  double decrease_tolerance = 1e-12;
  bool record_trace = false;
};

struct CpmSolution {
  WeightVector w;
  double objective = 0.0;
  double initial_objective = 0.0;
  LbfgsStatus status = LbfgsStatus::MaxIterations;
  std::size_t iterations = 0;
  std::vector<double> trace;
};

/// Fraction of labels equal to each class in [0, num_classes).
Vector empirical_class_probs(std::span<const int> labels, int num_classes);

// Entries of w are taken as given (no sign check) so the objective can be
// probed by finite differences; only the all-zero vector is rejected.
Vector reweighted_target_probs(const MatchProblem& problem, std::span<const double> w);
double cpm_objective(const MatchProblem& problem, std::span<const double> w);
Vector cpm_gradient(const MatchProblem& problem, std::span<const double> w);

/// Box-constrained (w >= 0) quasi-Newton minimization of cpm_objective from
/// w = 1. Throws NumericalError if the objective at the start is not finite.
CpmSolution cpm_solve(const MatchProblem& problem, const CpmSolveOptions& options = {});

}  // namespace labelshift
