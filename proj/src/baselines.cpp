#include "labelshift/baselines.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "labelshift/adapt.hpp"
#include "labelshift/error.hpp"

namespace labelshift {
namespace {

Eigen::MatrixXd to_eigen(const Matrix& m) {
  Eigen::MatrixXd out(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) out(i, j) = m(i, j);
  return out;
}

LinearShiftEstimate finish(const Eigen::VectorXd& sol, bool ill) {
  Vector raw(sol.data(), sol.data() + sol.size());
  Vector clipped = raw;
  for (auto& v : clipped) v = std::isfinite(v) ? std::max(v, 0.0) : 0.0;
  const bool degenerate = std::none_of(clipped.begin(), clipped.end(), [](double v) { return v > 0.0; });
  if (degenerate) std::fill(clipped.begin(), clipped.end(), 1.0);
  return {WeightVector(std::move(clipped)), std::move(raw), ill, degenerate};
}

constexpr double kSigmaFloor = 1e-10;

}  // namespace

ConfusionMatrix confusion_from_probs(const ProbMatrix& probs, std::span<const int> labels,
                                     int num_classes, bool soft) {
  require(probs.rows() == labels.size() && !labels.empty(), "confusion: size mismatch");
  require(probs.classes() == static_cast<std::size_t>(num_classes), "confusion: class count mismatch");
  const auto m = static_cast<std::size_t>(num_classes);
  std::vector<std::size_t> counts(m, 0);
  for (int y : labels) {
    require(y >= 0 && y < num_classes, "confusion: label out of range");
    ++counts[static_cast<std::size_t>(y)];
  }
  for (std::size_t k = 0; k < m; ++k)
    require(counts[k] > 0, "confusion: class #" + std::to_string(k) + " missing from holdout");

  ConfusionMatrix c{Matrix(m, m, 0.0)};
  const double inv_n = 1.0 / static_cast<double>(labels.size());
  const auto hard = soft ? std::vector<int>{} : argmax_rows(probs);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto j = static_cast<std::size_t>(labels[i]);
    if (soft) {
      for (std::size_t k = 0; k < m; ++k) c.values(k, j) += probs.values(i, k) * inv_n;
    } else {
      c.values(static_cast<std::size_t>(hard[i]), j) += inv_n;
    }
  }
  return c;
}

ConfusionMatrix confusion_estimate(const KlrModel& model, const Dataset& holdout, bool soft) {
  holdout.validate();
  require(holdout.num_classes == model.num_classes, "confusion: class count mismatch");
  return confusion_from_probs(klr_predict(model, holdout.features), holdout.labels,
                              holdout.num_classes, soft);
}

Vector predicted_distribution(const ProbMatrix& target_probs, bool soft) {
  require(target_probs.rows() > 0, "predicted_distribution: no rows");
  Vector mu(target_probs.classes(), 0.0);
  const double inv_n = 1.0 / static_cast<double>(target_probs.rows());
  if (soft) {
    for (std::size_t i = 0; i < target_probs.rows(); ++i)
      for (std::size_t k = 0; k < mu.size(); ++k) mu[k] += target_probs.values(i, k) * inv_n;
  } else {
    for (int y : argmax_rows(target_probs)) mu[static_cast<std::size_t>(y)] += inv_n;
  }
  return mu;
}

LinearShiftEstimate bbse_solve(const ConfusionMatrix& c, std::span<const double> mu) {
  const std::size_t m = c.classes();
  require(c.values.cols() == m && mu.size() == m, "bbse: dimension mismatch");
  const Eigen::MatrixXd a = to_eigen(c.values);
  const Eigen::VectorXd b = Eigen::Map<const Eigen::VectorXd>(mu.data(), static_cast<Eigen::Index>(m));
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const double smin = svd.singularValues().minCoeff();
  const bool ill = smin < kSigmaFloor;
  if (ill) svd.setThreshold(kSigmaFloor / std::max(svd.singularValues().maxCoeff(), kSigmaFloor));
  return finish(svd.solve(b), ill);
}

double rlls_default_reg(const ConfusionMatrix& c) {
  double tr = 0.0;
  for (std::size_t k = 0; k < c.classes(); ++k) tr += c.values(k, k);
  return 1e-3 * tr / static_cast<double>(c.classes());
}

LinearShiftEstimate rlls_solve(const ConfusionMatrix& c, std::span<const double> mu, double reg) {
  const std::size_t m = c.classes();
  require(c.values.cols() == m && mu.size() == m, "rlls: dimension mismatch");
  require(reg >= 0.0 && !std::isnan(reg), "rlls: regularization must be nonnegative");
  if (std::isinf(reg)) return finish(Eigen::VectorXd::Ones(static_cast<Eigen::Index>(m)), false);

  const auto mi = static_cast<Eigen::Index>(m);
  const Eigen::MatrixXd a = to_eigen(c.values);
  const Eigen::VectorXd b =
      Eigen::Map<const Eigen::VectorXd>(mu.data(), mi) - a * Eigen::VectorXd::Ones(mi);
  // Ridge as an augmented least-squares problem so reg = 0 reduces to the plain solve.
  Eigen::MatrixXd aug(2 * mi, mi);
  aug << a, std::sqrt(reg) * Eigen::MatrixXd::Identity(mi, mi);
  Eigen::VectorXd rhs(2 * mi);
  rhs << b, Eigen::VectorXd::Zero(mi);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(aug, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const bool ill = svd.singularValues().minCoeff() < kSigmaFloor;
  if (ill) svd.setThreshold(kSigmaFloor / std::max(svd.singularValues().maxCoeff(), kSigmaFloor));
  const Eigen::VectorXd theta = svd.solve(rhs);
  return finish(Eigen::VectorXd::Ones(mi) + theta, ill);
}

double mlls_log_likelihood(const ProbMatrix& target_probs, std::span<const double> source_priors,
                           std::span<const double> q) {
  const std::size_t m = source_priors.size();
  double ll = 0.0;
  for (std::size_t i = 0; i < target_probs.rows(); ++i) {
    double s = 0.0;
    for (std::size_t k = 0; k < m; ++k) s += q[k] * target_probs.values(i, k) / source_priors[k];
    ll += std::log(s);
  }
  return ll / static_cast<double>(target_probs.rows());
}

MllsResult mlls_em(const ProbMatrix& target_probs, std::span<const double> source_priors,
                   const MllsOptions& options) {
  const std::size_t m = source_priors.size();
  const std::size_t n = target_probs.rows();
  require(n >= 1, "mlls: no target points");
  require(target_probs.classes() == m, "mlls: class count mismatch");
  for (double p : source_priors) require(p > 0.0, "mlls: source priors must be positive");
  for (double v : target_probs.values.data())
    require(std::isfinite(v) && v >= 0.0, "mlls: posteriors must be finite and nonnegative");

  Vector q(source_priors.begin(), source_priors.end());
  Vector next(m), resp(m);
  MllsResult out{WeightVector::ones(m), {}, 0, false, {}, {}};
  auto record = [&] {
    if (!options.record_trace) return;
    const double ll = mlls_log_likelihood(target_probs, source_priors, q);
    if (!std::isfinite(ll)) throw NumericalError("mlls: non-finite likelihood");
    out.log_likelihood.push_back(ll);
    out.q_trace.push_back(q);
  };
  record();
  for (std::size_t it = 0; it < options.max_iter; ++it) {
    std::fill(next.begin(), next.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t k = 0; k < m; ++k) s += (resp[k] = q[k] * target_probs.values(i, k) / source_priors[k]);
      if (!(s > 0.0) || !std::isfinite(s)) throw NumericalError("mlls: non-finite likelihood");
      for (std::size_t k = 0; k < m; ++k) next[k] += resp[k] / s;
    }
    double delta = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
      next[k] /= static_cast<double>(n);
      delta += std::abs(next[k] - q[k]);
    }
    q.swap(next);
    out.iterations = it + 1;
    record();
    if (delta <= options.tol) {
      out.converged = true;
      break;
    }
  }
  if (!std::isfinite(mlls_log_likelihood(target_probs, source_priors, q)))
    throw NumericalError("mlls: non-finite likelihood");
  Vector w(m);
  for (std::size_t k = 0; k < m; ++k) w[k] = q[k] / source_priors[k];
  out.w = WeightVector(std::move(w));
  out.q = std::move(q);
  return out;
}

}  // namespace labelshift
