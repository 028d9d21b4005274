#pragma once

// Label-shift experiment harness: scenario sampling from a labeled pool, the
// ACC / MSE metrics, and the repeated-trial benchmark.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "labelshift/dataset.hpp"
#include "labelshift/klr.hpp"

namespace labelshift {

struct ShiftSpec {
  double alpha = 1.0;   // Dirichlet concentration
  int m_q = 1;          // number of classes supported in the target
  std::size_t n_p = 0;  // source size
  std::size_t n_q = 0;  // unlabeled target size
  std::size_t n_t = 0;  // labeled test size
  std::uint64_t seed = 0;

  void validate(int num_classes) const;
};

struct Scenario {
  Dataset source;
  Matrix target_unlabeled;
  std::vector<int> target_labels;  // withheld from every estimator
  Dataset test;
  Vector q_true;
  std::vector<int> target_classes;  // the m_q supported classes, ascending
  std::vector<std::size_t> source_index, target_index, test_index;  // rows of the pool
};

/// Source rows with uniform class counts n_p / M, the remainder going to the
/// lowest class indices. Throws naming the class if the pool is short.
std::vector<std::size_t> draw_source_indices(const Dataset& pool, const ShiftSpec& spec,
                                             std::size_t source_rep);

/// Target and test drawn from the pool minus `source_index`: m_q classes chosen
/// at random, q over them ~ Dirichlet(alpha), multinomial class counts, then
/// uniform rows within each class, all without replacement.
Scenario draw_target(const Dataset& pool, const ShiftSpec& spec,
                     std::span<const std::size_t> source_index, std::size_t source_rep,
                     std::size_t target_rep);

Scenario sample_shift_scenario(const Dataset& pool, const ShiftSpec& spec, std::size_t source_rep = 0,
                               std::size_t target_rep = 0);

double metric_acc(std::span<const int> predicted, std::span<const int> truth);
/// (1/M) sum_y (q_hat_y - q_true_y)^2; both arguments must be on the simplex.
double metric_mse(std::span<const double> q_hat, std::span<const double> q_true);

enum class Method { Cpmkm, Bbse, Rlls, Mlls };
std::string_view method_name(Method m);
Method parse_method(std::string_view s);

struct EvalReport {
  Method method = Method::Cpmkm;
  std::size_t source_rep = 0;
  std::size_t target_rep = 0;
  double acc = 0.0;
  double mse = 0.0;
  Vector w_hat;
  Vector q_hat;
  Vector q_true;
  std::uint64_t model_fingerprint = 0;
  bool ill_conditioned = false;
};

struct MethodSummary {
  Method method = Method::Cpmkm;
  std::size_t count = 0;
  double acc_mean = 0.0, acc_std = 0.0;
  double mse_mean = 0.0, mse_std = 0.0;
};

struct SourceFit {
  std::size_t source_rep = 0;
  double c = 0.0;
  double g = 0.0;
  double lambda = 0.0;
  std::uint64_t model_fingerprint = 0;
  std::size_t iterations = 0;
};

struct BenchmarkOptions {
  CvGrid grid = CvGrid::defaults();
  double holdout_fraction = 0.25;  // stratified source share kept for confusion matrices
  bool soft_confusion = false;
  std::optional<double> rlls_reg;  // default: 1e-3 * tr(C) / M
  std::size_t threads = 1;
};

struct BenchmarkResult {
  std::vector<EvalReport> reports;  // ordered by (source_rep, target_rep, method)
  std::vector<MethodSummary> summary;
  std::vector<SourceFit> fits;
};

/// For each source resample the KLR model is fit once (on the non-holdout part)
/// and shared by every method and every target resample.
BenchmarkResult run_benchmark(const Dataset& pool, const ShiftSpec& spec,
                              std::span<const Method> methods, std::size_t source_reps,
                              std::size_t target_reps, const BenchmarkOptions& options = {});

std::vector<MethodSummary> summarize(std::span<const EvalReport> reports,
                                     std::span<const Method> methods);

/// Stratified split: returns (train, holdout) row indices.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> stratified_holdout(
    const Dataset& data, double fraction, std::uint64_t seed, std::size_t rep);

}  // namespace labelshift
