#include "labelshift/klr.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <set>
#include <string>

#include "labelshift/error.hpp"
#include "labelshift/parallel.hpp"
#include "labelshift/rng.hpp"

namespace labelshift {
namespace {

void check_labels(std::span<const int> labels, int num_classes, std::size_t n) {
  require(labels.size() == n, "label count does not match the Gram matrix");
  for (int y : labels)
    require(y >= 0 && y < num_classes, "label " + std::to_string(y) + " outside [0, " +
                                           std::to_string(num_classes) + ")");
}

// Objective and gradient in the solver's flat layout: x[m * n + i] = alpha(i, m).
class KlrProblem {
 public:
  KlrProblem(const GramMatrix& gram, std::span<const int> labels, double lambda, int num_classes)
      : gram_(gram), labels_(labels), lambda_(lambda), k_(static_cast<std::size_t>(num_classes - 1)) {}

  double operator()(std::span<const double> x, std::span<double> grad) const { return (*this)(x, grad, {}); }

  // `resid` receives r with grad = K r per class column, i.e. the gradient
  // mapped through the inverse Gram matrix.
  double operator()(std::span<const double> x, std::span<double> grad, std::span<double> resid_out) const {
    const std::size_t n = gram_.rows();
    const Matrix at(k_, n, std::vector<double>(x.begin(), x.end()));
    const Matrix scores = multiply_transposed(gram_.values, at);

    double penalty = 0.0;
    for (std::size_t m = 0; m < k_; ++m)
      for (std::size_t i = 0; i < n; ++i) penalty += at(m, i) * scores(i, m);
    penalty *= lambda_;

    Matrix resid(k_, n);
    const double inv_n = 1.0 / static_cast<double>(n);
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double mx = 0.0;  // the pinned last score
      for (std::size_t m = 0; m < k_; ++m) mx = std::max(mx, scores(i, m));
      double sum = std::exp(-mx);
      for (std::size_t m = 0; m < k_; ++m) sum += std::exp(scores(i, m) - mx);
      const double lse = mx + std::log(sum);
      const auto y = static_cast<std::size_t>(labels_[i]);
      loss += lse - (y < k_ ? scores(i, y) : 0.0);
      if (!grad.empty() || !resid_out.empty()) {
        for (std::size_t m = 0; m < k_; ++m) {
          const double pi = std::exp(scores(i, m) - lse);
          resid(m, i) = 2.0 * lambda_ * at(m, i) + (pi - (m == y ? 1.0 : 0.0)) * inv_n;
        }
      }
    }
    if (!resid_out.empty()) std::copy(resid.data().begin(), resid.data().end(), resid_out.begin());
    if (!grad.empty()) {
      const Matrix g = multiply_transposed(gram_.values, resid);
      for (std::size_t m = 0; m < k_; ++m)
        for (std::size_t i = 0; i < n; ++i) grad[m * n + i] = g(i, m);
    }
    return penalty + loss * inv_n;
  }

 private:
  const GramMatrix& gram_;
  std::span<const int> labels_;
  double lambda_;
  std::size_t k_;
};

std::vector<double> flatten(const Matrix& alpha) {
  std::vector<double> x(alpha.rows() * alpha.cols());
  for (std::size_t i = 0; i < alpha.rows(); ++i)
    for (std::size_t m = 0; m < alpha.cols(); ++m) x[m * alpha.rows() + i] = alpha(i, m);
  return x;
}

Matrix unflatten(std::span<const double> x, std::size_t n, std::size_t k) {
  Matrix alpha(n, k);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t m = 0; m < k; ++m) alpha(i, m) = x[m * n + i];
  return alpha;
}

void check_gram(const GramMatrix& gram) {
  require(gram.rows() == gram.cols() && gram.rows() > 0, "expected a square, non-empty self-Gram matrix");
}

ProbMatrix probs_from_scores(const Matrix& scores, int num_classes, double trunc_t, bool truncate) {
  const auto k = static_cast<std::size_t>(num_classes - 1);
  ProbMatrix out{Matrix(scores.rows(), static_cast<std::size_t>(num_classes))};
  Vector s(static_cast<std::size_t>(num_classes));
  for (std::size_t i = 0; i < scores.rows(); ++i) {
    for (std::size_t m = 0; m < k; ++m) s[m] = scores(i, m);
    s[k] = 0.0;
    Vector p = softmax_scores(s);
    if (truncate) p = truncate_simplex(p, trunc_t);
    std::copy(p.begin(), p.end(), out.values.row(i).begin());
  }
  return out;
}

}  // namespace

std::uint64_t KlrModel::fingerprint() const {
  std::uint64_t h = fnv1a64(std::as_bytes(support.data()));
  h = fnv1a64(std::as_bytes(alpha.data()), h);
  const double scalars[] = {kernel.gamma_sq_inv(), lambda, trunc_t, static_cast<double>(num_classes)};
  return fnv1a64(std::as_bytes(std::span(scalars)), h);
}

Vector softmax_scores(std::span<const double> scores) {
  require(!scores.empty(), "softmax: empty score vector");
  double mx = -std::numeric_limits<double>::infinity();
  for (double s : scores) {
    require(std::isfinite(s), "softmax: non-finite score");
    mx = std::max(mx, s);
  }
  Vector out(scores.size());
  double sum = 0.0;
  for (std::size_t m = 0; m < scores.size(); ++m) sum += (out[m] = std::exp(scores[m] - mx));
  for (auto& v : out) v /= sum;
  return out;
}

void validate_trunc_t(double t, int num_classes) {
  require(num_classes >= 1, "class count must be positive");
  require(std::isfinite(t) && t > 0.0 && t < 1.0 / (2.0 * num_classes),
          "truncation threshold must lie in (0, 1/(2M)), got " + std::to_string(t));
}

Vector truncate_simplex(std::span<const double> p, double t) {
  require(!p.empty(), "truncate_simplex: empty vector");
  require(std::isfinite(t) && t > 0.0 && t * static_cast<double>(p.size()) < 1.0,
          "truncate_simplex: threshold must lie in (0, 1/M), got " + std::to_string(t));
  double total = 0.0;
  for (double v : p) {
    require(std::isfinite(v) && v >= 0.0 && v <= 1.0, "truncate_simplex: entry outside [0, 1]");
    total += v;
  }
  require(std::abs(total - 1.0) <= 1e-9, "truncate_simplex: input does not sum to 1");

  double deficit = 0.0;  // mass needed to lift small entries to t
  double excess = 0.0;   // mass available above t
  for (double v : p) {
    if (v < t)
      deficit += t - v;
    else
      excess += v - t;
  }
  Vector out(p.begin(), p.end());
  if (deficit == 0.0) return out;
  // excess - deficit = 1 - M t > 1/2, so keep = 1 - deficit/excess lies in (0, 1].
  // Writing the update as t + (p - t) * keep keeps it monotone in p and >= t in
  // floating point.
  const double keep = 1.0 - deficit / excess;
  for (auto& v : out) v = v < t ? t : t + (v - t) * keep;
  return out;
}

double klr_objective(const Matrix& alpha, const GramMatrix& gram, std::span<const int> labels,
                     double lambda) {
  check_gram(gram);
  require(alpha.rows() == gram.rows() && alpha.cols() >= 1, "klr_objective: alpha shape mismatch");
  require(lambda >= 0.0, "klr_objective: lambda must be nonnegative");
  const int m = static_cast<int>(alpha.cols()) + 1;
  check_labels(labels, m, gram.rows());
  const auto x = flatten(alpha);
  return KlrProblem(gram, labels, lambda, m)(x, {});
}

Matrix klr_gradient(const Matrix& alpha, const GramMatrix& gram, std::span<const int> labels,
                    double lambda) {
  check_gram(gram);
  require(alpha.rows() == gram.rows() && alpha.cols() >= 1, "klr_gradient: alpha shape mismatch");
  require(lambda >= 0.0, "klr_gradient: lambda must be nonnegative");
  const int m = static_cast<int>(alpha.cols()) + 1;
  check_labels(labels, m, gram.rows());
  const auto x = flatten(alpha);
  std::vector<double> g(x.size());
  KlrProblem(gram, labels, lambda, m)(x, g);
  return unflatten(g, alpha.rows(), alpha.cols());
}

KlrModel klr_fit(const Dataset& data, const KernelParams& kernel, double lambda, double trunc_t,
                 const KlrFitOptions& options) {
  data.validate();
  return klr_fit(data, self_gram(data.features, kernel), kernel, lambda, trunc_t, options);
}

KlrModel klr_fit(const Dataset& data, const GramMatrix& gram, const KernelParams& kernel,
                 double lambda, double trunc_t, const KlrFitOptions& options) {
  data.validate();
  check_gram(gram);
  require(gram.rows() == data.size(), "klr_fit: Gram matrix does not match the data");
  require(data.num_classes >= 2, "klr_fit: need at least two classes");
  require(std::isfinite(lambda) && lambda > 0.0, "klr_fit: lambda must be positive");
  validate_trunc_t(trunc_t, data.num_classes);
  require(data.size() >= static_cast<std::size_t>(data.num_classes),
          "klr_fit: fewer samples than classes");
  const auto counts = data.class_counts();
  for (std::size_t c = 0; c < counts.size(); ++c)
    require(counts[c] > 0, "klr_fit: class " + data.class_name(static_cast<int>(c)) +
                               " has no source examples");

  const std::size_t n = data.size();
  const auto k = static_cast<std::size_t>(data.num_classes - 1);
  KlrProblem problem(gram, data.labels, lambda, data.num_classes);
  LbfgsOptions lo;
  lo.max_iterations = options.max_iterations;
  lo.pg_tolerance = options.grad_tolerance;
  lo.memory = options.memory;
  const auto res = minimize_preconditioned(
      [&problem](std::span<const double> x, std::span<double> g, std::span<double> h) { return problem(x, g, h); },
      std::vector<double>(n * k, 0.0), lo);
  if (!std::isfinite(res.f)) throw NumericalError("klr_fit: objective diverged");

  KlrModel model{data.features, unflatten(res.x, n, k), kernel, lambda, trunc_t, data.num_classes, {}};
  model.fit = {res.iterations, res.f, res.pg_norm, res.status};
  return model;
}

ProbMatrix klr_predict_gram(const KlrModel& model, const GramMatrix& cross) {
  require(cross.cols() == model.support.rows(), "klr_predict: cross-Gram does not match the support");
  return probs_from_scores(multiply_transposed(cross.values, model.alpha.transposed()),
                           model.num_classes, model.trunc_t, true);
}

ProbMatrix klr_predict(const KlrModel& model, const Matrix& points) {
  require(points.cols() == model.dim(), "klr_predict: expected " + std::to_string(model.dim()) +
                                            " features, got " + std::to_string(points.cols()));
  if (points.rows() == 0) return ProbMatrix{Matrix(0, static_cast<std::size_t>(model.num_classes))};
  return klr_predict_gram(model, gram(points, model.support, model.kernel));
}

ProbMatrix klr_predict_raw(const KlrModel& model, const Matrix& points) {
  require(points.cols() == model.dim(), "klr_predict: dimension mismatch");
  const auto cross = gram(points, model.support, model.kernel);
  return probs_from_scores(multiply_transposed(cross.values, model.alpha.transposed()),
                           model.num_classes, model.trunc_t, false);
}

Vector log_spaced(double lo, double hi, std::size_t count) {
  require(lo > 0.0 && hi >= lo && count >= 1, "log_spaced: invalid range");
  Vector out(count);
  if (count == 1) {
    out[0] = lo;
    return out;
  }
  const double a = std::log10(lo), b = std::log10(hi);
  for (std::size_t i = 0; i < count; ++i)
    out[i] = std::pow(10.0, a + (b - a) * static_cast<double>(i) / static_cast<double>(count - 1));
  out.front() = lo;
  out.back() = hi;
  return out;
}

CvGrid CvGrid::defaults() {
  return CvGrid{log_spaced(1e-6, 1.0, 7), log_spaced(std::ldexp(1.0, -6), 1.0, 7), 5, 1e-8};
}

void CvGrid::validate() const {
  require(!c_values.empty() && !g_values.empty(), "CV grid must not be empty");
  for (double c : c_values) require(std::isfinite(c) && c > 0.0, "CV grid: C values must be positive");
  for (double g : g_values) require(std::isfinite(g) && g > 0.0, "CV grid: g values must be positive");
  require(folds >= 2, "CV grid: need at least two folds");
  require(std::isfinite(trunc_t) && trunc_t > 0.0, "CV grid: truncation threshold must be positive");
}

double lambda_from_c(double c, std::size_t n_train) {
  require(c > 0.0 && n_train > 0, "lambda_from_c: invalid arguments");
  return 1.0 / (c * static_cast<double>(n_train));
}

double mean_cross_entropy(const ProbMatrix& probs, std::span<const int> labels) {
  require(probs.rows() == labels.size() && !labels.empty(), "mean_cross_entropy: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i)
    s -= std::log(probs.values(i, static_cast<std::size_t>(labels[i])));
  return s / static_cast<double>(labels.size());
}

std::vector<std::size_t> stratified_folds(std::span<const int> labels, int num_classes,
                                          std::size_t folds, std::uint64_t seed) {
  require(folds >= 2 && folds <= labels.size(), "stratified_folds: need 2 <= folds <= n");
  std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(num_classes));
  for (std::size_t i = 0; i < labels.size(); ++i) by_class.at(static_cast<std::size_t>(labels[i])).push_back(i);
  std::vector<std::size_t> fold(labels.size(), 0);
  std::size_t pos = 0;
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    auto& idx = by_class[c];
    require(idx.size() >= 2, "stratified_folds: class #" + std::to_string(c) + " has " +
                                 std::to_string(idx.size()) + " samples; every training fold needs each class");
    Rng rng(seed, "cv-folds", {c});
    rng.shuffle(std::span(idx));
    for (auto i : idx) fold[i] = pos++ % folds;
  }
  return fold;
}

CvResult cv_select(const Dataset& data, const CvGrid& grid, std::uint64_t seed,
                   std::size_t threads, const KlrFitOptions& options) {
  data.validate();
  grid.validate();
  validate_trunc_t(grid.trunc_t, data.num_classes);
  require(data.size() >= grid.folds, "cv_select: fewer samples than folds");

  const std::set<double> cset(grid.c_values.begin(), grid.c_values.end());
  const std::set<double> gset(grid.g_values.begin(), grid.g_values.end());
  const std::vector<double> cs(cset.begin(), cset.end());
  const std::vector<double> gs(gset.begin(), gset.end());

  CvResult result;
  result.table.resize(gs.size() * cs.size());
  for (std::size_t gi = 0; gi < gs.size(); ++gi)
    for (std::size_t ci = 0; ci < cs.size(); ++ci) {
      auto& cell = result.table[gi * cs.size() + ci];
      cell.c = cs[ci];
      cell.g = gs[gi];
    }

  std::size_t best = 0;
  if (result.table.size() == 1) {
    result.table[0].mean_ce = std::numeric_limits<double>::quiet_NaN();
  } else {
    const auto fold_of = stratified_folds(data.labels, data.num_classes, grid.folds, seed);
    std::vector<std::vector<std::size_t>> train(grid.folds), val(grid.folds);
    for (std::size_t i = 0; i < data.size(); ++i)
      for (std::size_t f = 0; f < grid.folds; ++f) (f == fold_of[i] ? val : train)[f].push_back(i);

    for (auto& cell : result.table) cell.fold_ce.assign(grid.folds, 0.0);
    for (std::size_t gi = 0; gi < gs.size(); ++gi) {
      const KernelParams kernel(gs[gi]);
      const GramMatrix full = self_gram(data.features, kernel);
      for (std::size_t f = 0; f < grid.folds; ++f) {
        if (val[f].empty()) continue;
        const Dataset train_set = data.subset(train[f]);
        const GramMatrix k_train = gram_block(full, train[f], train[f]);
        const GramMatrix k_val = gram_block(full, val[f], train[f]);
        std::vector<int> val_labels;
        for (auto i : val[f]) val_labels.push_back(data.labels[i]);
        parallel_for(cs.size(), threads, [&](std::size_t ci) {
          const double lambda = lambda_from_c(cs[ci], train[f].size());
          const KlrModel m = klr_fit(train_set, k_train, kernel, lambda, grid.trunc_t, options);
          result.table[gi * cs.size() + ci].fold_ce[f] =
              mean_cross_entropy(klr_predict_gram(m, k_val), val_labels);
        });
      }
    }
    for (auto& cell : result.table) {
      double s = 0.0;
      std::size_t used = 0;
      for (std::size_t f = 0; f < grid.folds; ++f)
        if (!val[f].empty()) {
          s += cell.fold_ce[f];
          ++used;
        }
      cell.mean_ce = s / static_cast<double>(used);
    }
    // Visit C ascending, then g ascending; a strict < keeps the largest lambda
    // and then the smallest g among exact ties.
    for (std::size_t ci = 0; ci < cs.size(); ++ci)
      for (std::size_t gi = 0; gi < gs.size(); ++gi) {
        const std::size_t idx = gi * cs.size() + ci;
        if (!std::isfinite(result.table[idx].mean_ce))
          throw NumericalError("cv_select: non-finite CV score");
        if (result.table[idx].mean_ce < result.table[best].mean_ce) best = idx;
      }
  }

  const CvCell& win = result.table[best];
  result.kernel = KernelParams(win.g);
  result.c = win.c;
  result.lambda = lambda_from_c(win.c, data.size());
  result.model = klr_fit(data, result.kernel, result.lambda, grid.trunc_t, options);
  return result;
}

}  // namespace labelshift
