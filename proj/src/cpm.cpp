#include "labelshift/cpm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "labelshift/error.hpp"

namespace labelshift {

WeightVector::WeightVector(Vector w) : w_(std::move(w)) {
  require(!w_.empty(), "weight vector is empty");
  bool any_positive = false;
  for (double v : w_) {
    require(std::isfinite(v) && v >= 0.0, "weights must be finite and nonnegative");
    any_positive = any_positive || v > 0.0;
  }
  require(any_positive, "weights must have a positive entry");
}

void MatchProblem::validate() const {
  require(!p_hat.empty(), "match problem: no classes");
  require(target_probs.classes() == p_hat.size(), "match problem: class count mismatch");
  require(target_probs.rows() >= 1, "match problem: no target points");
  require(floor_s > 0.0, "match problem: floor must be positive");
  double total = 0.0;
  for (double v : p_hat) {
    require(v >= 0.0, "match problem: negative source frequency");
    total += v;
  }
  require(std::abs(total - 1.0) <= 1e-10, "match problem: source frequencies do not sum to 1");
}

Vector empirical_class_probs(std::span<const int> labels, int num_classes) {
  require(!labels.empty(), "empirical_class_probs: no labels");
  require(num_classes >= 1, "empirical_class_probs: class count must be positive");
  std::vector<std::size_t> counts(static_cast<std::size_t>(num_classes), 0);
  for (int y : labels) {
    require(y >= 0 && y < num_classes, "empirical_class_probs: label outside range");
    ++counts[static_cast<std::size_t>(y)];
  }
  Vector p(counts.size());
  const double n = static_cast<double>(labels.size());
  for (std::size_t k = 0; k < counts.size(); ++k) p[k] = static_cast<double>(counts[k]) / n;
  return p;
}

namespace {

void check_weights(const MatchProblem& problem, std::span<const double> w) {
  require(w.size() == problem.classes(), "weight vector length does not match class count");
  require(std::any_of(w.begin(), w.end(), [](double v) { return v != 0.0; }),
          "weight vector is all zero");
}

// Shared pass over the target rows. Fills r and, when `grad` is non-empty,
// the Jacobian-vector product needed by the gradient.
double evaluate(const MatchProblem& problem, std::span<const double> w, Vector& r,
                std::span<double> grad) {
  const std::size_t m = problem.classes();
  const std::size_t n = problem.target_probs.rows();
  const double inv_n = 1.0 / static_cast<double>(n);
  r.assign(m, 0.0);
  Vector s(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = problem.target_probs.row(i);
    double si = 0.0;
    for (std::size_t k = 0; k < m; ++k) si += w[k] * row[k];
    s[i] = si;
    const double denom = std::max(si, problem.floor_s);
    for (std::size_t k = 0; k < m; ++k) r[k] += row[k] / denom;
  }
  for (auto& v : r) v *= inv_n;
  double f = 0.0;
  for (std::size_t k = 0; k < m; ++k) f += (problem.p_hat[k] - r[k]) * (problem.p_hat[k] - r[k]);
  if (grad.empty()) return f;

  // d r_y / d w_k = -(1/n) sum_i p_iy p_ik / s_i^2 where s_i is above the floor.
  std::fill(grad.begin(), grad.end(), 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (s[i] < problem.floor_s) continue;
    const auto row = problem.target_probs.row(i);
    double proj = 0.0;  // sum_y (p_hat_y - r_y) p_iy
    for (std::size_t y = 0; y < m; ++y) proj += (problem.p_hat[y] - r[y]) * row[y];
    const double c = 2.0 * inv_n * proj / (s[i] * s[i]);
    for (std::size_t k = 0; k < m; ++k) grad[k] += c * row[k];
  }
  return f;
}

}  // namespace

Vector reweighted_target_probs(const MatchProblem& problem, std::span<const double> w) {
  problem.validate();
  check_weights(problem, w);
  Vector r;
  evaluate(problem, w, r, {});
  return r;
}

double cpm_objective(const MatchProblem& problem, std::span<const double> w) {
  problem.validate();
  check_weights(problem, w);
  Vector r;
  return evaluate(problem, w, r, {});
}

Vector cpm_gradient(const MatchProblem& problem, std::span<const double> w) {
  problem.validate();
  check_weights(problem, w);
  Vector r, g(problem.classes());
  evaluate(problem, w, r, g);
  return g;
}

CpmSolution cpm_solve(const MatchProblem& problem, const CpmSolveOptions& options) {
  problem.validate();
  const std::size_t m = problem.classes();
  Vector r;
  auto fn = [&](std::span<const double> w, std::span<double> grad) {
    // The solver can only reach w = 0 by projection; the objective there is
    // the clamped value, which is finite but huge, so it is never accepted.
    return evaluate(problem, w, r, grad);
  };
  LbfgsOptions lo;
  lo.max_iterations = options.max_iterations;
  lo.pg_tolerance = options.pg_tolerance;
  lo.decrease_tolerance = options.decrease_tolerance;
  lo.record_trace = true;
  const Vector lower(m, 0.0);
  const Vector upper(m, std::numeric_limits<double>::infinity());
  const auto res = minimize_box(fn, Vector(m, 1.0), lower, upper, lo);
  if (!std::isfinite(res.f)) throw NumericalError("cpm_solve: objective is not finite");
  if (std::all_of(res.x.begin(), res.x.end(), [](double v) { return v == 0.0; }))
    throw NumericalError("cpm_solve: solver collapsed to w = 0");

  CpmSolution out{WeightVector(res.x), res.f, res.trace.front(), res.status, res.iterations, {}};
  if (options.record_trace) out.trace = res.trace;
  return out;
}

}  // namespace labelshift
