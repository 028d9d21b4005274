#include "labelshift/shiftlab.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "labelshift/adapt.hpp"
#include "labelshift/baselines.hpp"
#include "labelshift/cpm.hpp"
#include "labelshift/error.hpp"
#include "labelshift/rng.hpp"

namespace labelshift {

void ShiftSpec::validate(int num_classes) const {
  require(std::isfinite(alpha) && alpha > 0.0, "shift spec: alpha must be positive");
  require(m_q >= 1 && m_q <= num_classes,
          "shift spec: m_q must lie in [1, " + std::to_string(num_classes) + "]");
  require(n_p >= 1 && n_q >= 1 && n_t >= 1, "shift spec: sample sizes must be positive");
}

namespace {

std::vector<std::vector<std::size_t>> rows_by_class(const Dataset& pool) {
  std::vector<std::vector<std::size_t>> out(static_cast<std::size_t>(pool.num_classes));
  for (std::size_t i = 0; i < pool.size(); ++i) out[static_cast<std::size_t>(pool.labels[i])].push_back(i);
  return out;
}

std::vector<std::size_t> multinomial_counts(Rng& rng, std::span<const double> q, std::size_t n) {
  std::vector<std::size_t> counts(q.size(), 0);
  // Last class with positive mass absorbs round-off in the cumulative sum.
  std::size_t last = 0;
  for (std::size_t k = 0; k < q.size(); ++k)
    if (q[k] > 0.0) last = k;
  for (std::size_t i = 0; i < n; ++i) {
    const double u = rng.uniform();
    double acc = 0.0;
    std::size_t c = last;
    for (std::size_t k = 0; k < q.size(); ++k) {
      if (q[k] <= 0.0) continue;
      acc += q[k];
      if (u < acc) {
        c = k;
        break;
      }
    }
    ++counts[c];
  }
  return counts;
}

}  // namespace

std::vector<std::size_t> draw_source_indices(const Dataset& pool, const ShiftSpec& spec,
                                             std::size_t source_rep) {
  pool.validate();
  spec.validate(pool.num_classes);
  const auto by_class = rows_by_class(pool);
  const auto m = static_cast<std::size_t>(pool.num_classes);
  std::vector<std::size_t> out;
  out.reserve(spec.n_p);
  for (std::size_t c = 0; c < m; ++c) {
    const std::size_t want = spec.n_p / m + (c < spec.n_p % m ? 1 : 0);
    auto rows = by_class[c];
    if (rows.size() < want)
      throw ValidationError("pool has " + std::to_string(rows.size()) + " rows of class " +
                            pool.class_name(static_cast<int>(c)) + ", source needs " +
                            std::to_string(want));
    Rng rng(spec.seed, "source-rows", {source_rep, c});
    rng.shuffle(std::span(rows));
    out.insert(out.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(want));
  }
  return out;
}

Scenario draw_target(const Dataset& pool, const ShiftSpec& spec,
                     std::span<const std::size_t> source_index, std::size_t source_rep,
                     std::size_t target_rep) {
  pool.validate();
  spec.validate(pool.num_classes);
  const auto m = static_cast<std::size_t>(pool.num_classes);

  std::vector<char> used(pool.size(), 0);
  for (auto i : source_index) used.at(i) = 1;
  auto by_class = rows_by_class(pool);
  for (auto& rows : by_class) std::erase_if(rows, [&](std::size_t i) { return used[i] != 0; });

  Scenario sc;
  sc.source_index.assign(source_index.begin(), source_index.end());
  sc.source = pool.subset(source_index);

  Rng class_rng(spec.seed, "target-classes", {source_rep, target_rep});
  std::vector<int> classes(m);
  std::iota(classes.begin(), classes.end(), 0);
  for (std::size_t k = 0; k < static_cast<std::size_t>(spec.m_q); ++k)
    std::swap(classes[k], classes[k + class_rng.index(m - k)]);
  classes.resize(static_cast<std::size_t>(spec.m_q));
  std::sort(classes.begin(), classes.end());
  sc.target_classes = classes;

  Rng dir_rng(spec.seed, "target-dirichlet", {source_rep, target_rep});
  const Vector q_sub = dirichlet(dir_rng, classes.size(), spec.alpha);
  sc.q_true.assign(m, 0.0);
  for (std::size_t k = 0; k < classes.size(); ++k) sc.q_true[static_cast<std::size_t>(classes[k])] = q_sub[k];

  Rng count_rng(spec.seed, "target-counts", {source_rep, target_rep});
  const auto target_counts = multinomial_counts(count_rng, sc.q_true, spec.n_q);
  const auto test_counts = multinomial_counts(count_rng, sc.q_true, spec.n_t);

  for (std::size_t c = 0; c < m; ++c) {
    auto& rows = by_class[c];
    if (rows.size() < target_counts[c] + test_counts[c])
      throw ValidationError("pool has " + std::to_string(rows.size()) + " unused rows of class " +
                            pool.class_name(static_cast<int>(c)) + ", target and test need " +
                            std::to_string(target_counts[c] + test_counts[c]));
    Rng rng(spec.seed, "target-rows", {source_rep, target_rep, c});
    rng.shuffle(std::span(rows));
    const auto a = static_cast<std::ptrdiff_t>(target_counts[c]);
    const auto b = static_cast<std::ptrdiff_t>(test_counts[c]);
    sc.target_index.insert(sc.target_index.end(), rows.begin(), rows.begin() + a);
    sc.test_index.insert(sc.test_index.end(), rows.begin() + a, rows.begin() + a + b);
  }
  sc.target_unlabeled = pool.features.select_rows(sc.target_index);
  for (auto i : sc.target_index) sc.target_labels.push_back(pool.labels[i]);
  sc.test = pool.subset(sc.test_index);
  return sc;
}

Scenario sample_shift_scenario(const Dataset& pool, const ShiftSpec& spec, std::size_t source_rep,
                               std::size_t target_rep) {
  const auto src = draw_source_indices(pool, spec, source_rep);
  return draw_target(pool, spec, src, source_rep, target_rep);
}

double metric_acc(std::span<const int> predicted, std::span<const int> truth) {
  require(predicted.size() == truth.size(), "accuracy: length mismatch");
  require(!truth.empty(), "accuracy: empty input");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hits += predicted[i] == truth[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

namespace {
void require_simplex(std::span<const double> v, const char* what) {
  double s = 0.0;
  for (double x : v) {
    require(std::isfinite(x) && x >= 0.0, std::string(what) + " has a negative or non-finite entry");
    s += x;
  }
  require(std::abs(s - 1.0) <= 1e-9, std::string(what) + " does not sum to 1");
}
}  // namespace

double metric_mse(std::span<const double> q_hat, std::span<const double> q_true) {
  require(q_hat.size() == q_true.size() && !q_hat.empty(), "mse: length mismatch");
  require_simplex(q_hat, "mse: estimate");
  require_simplex(q_true, "mse: truth");
  double s = 0.0;
  for (std::size_t k = 0; k < q_hat.size(); ++k) s += (q_hat[k] - q_true[k]) * (q_hat[k] - q_true[k]);
  return s / static_cast<double>(q_hat.size());
}

std::string_view method_name(Method m) {
  switch (m) {
    case Method::Cpmkm: return "cpmkm";
    case Method::Bbse: return "bbse";
    case Method::Rlls: return "rlls";
    case Method::Mlls: return "mlls";
  }
  return "unknown";
}

Method parse_method(std::string_view s) {
  for (Method m : {Method::Cpmkm, Method::Bbse, Method::Rlls, Method::Mlls})
    if (method_name(m) == s) return m;
  throw ValidationError("unknown method '" + std::string(s) + "' (expected cpmkm, bbse, rlls, mlls)");
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> stratified_holdout(
    const Dataset& data, double fraction, std::uint64_t seed, std::size_t rep) {
  require(fraction > 0.0 && fraction < 1.0, "holdout fraction must lie in (0, 1)");
  auto by_class = rows_by_class(data);
  std::vector<std::size_t> train, hold;
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    auto& rows = by_class[c];
    require(rows.size() >= 2, "holdout split: class " + data.class_name(static_cast<int>(c)) +
                                  " needs at least two source rows");
    Rng rng(seed, "holdout", {rep, c});
    rng.shuffle(std::span(rows));
    auto k = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(rows.size())));
    k = std::clamp<std::size_t>(k, 1, rows.size() - 1);
    hold.insert(hold.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(k));
    train.insert(train.end(), rows.begin() + static_cast<std::ptrdiff_t>(k), rows.end());
  }
  std::sort(train.begin(), train.end());
  std::sort(hold.begin(), hold.end());
  return {train, hold};
}

std::vector<MethodSummary> summarize(std::span<const EvalReport> reports,
                                     std::span<const Method> methods) {
  std::vector<MethodSummary> out;
  for (Method m : methods) {
    MethodSummary s{m};
    std::vector<double> acc, mse;
    for (const auto& r : reports)
      if (r.method == m) {
        acc.push_back(r.acc);
        mse.push_back(r.mse);
      }
    s.count = acc.size();
    auto mean_std = [](const std::vector<double>& v, double& mean, double& sd) {
      mean = sd = 0.0;
      if (v.empty()) return;
      for (double x : v) mean += x;
      mean /= static_cast<double>(v.size());
      if (v.size() < 2) return;
      for (double x : v) sd += (x - mean) * (x - mean);
      sd = std::sqrt(sd / static_cast<double>(v.size() - 1));
    };
    mean_std(acc, s.acc_mean, s.acc_std);
    mean_std(mse, s.mse_mean, s.mse_std);
    out.push_back(s);
  }
  return out;
}

BenchmarkResult run_benchmark(const Dataset& pool, const ShiftSpec& spec,
                              std::span<const Method> methods, std::size_t source_reps,
                              std::size_t target_reps, const BenchmarkOptions& options) {
  pool.validate();
  spec.validate(pool.num_classes);
  require(!methods.empty(), "benchmark: no methods");
  require(source_reps >= 1 && target_reps >= 1, "benchmark: repetition counts must be positive");
  options.grid.validate();

  BenchmarkResult out;
  for (std::size_t s = 0; s < source_reps; ++s) {
    const auto src_idx = draw_source_indices(pool, spec, s);
    const Dataset source = pool.subset(src_idx);
    const auto [train_idx, hold_idx] = stratified_holdout(source, options.holdout_fraction, spec.seed, s);
    const Dataset train = source.subset(train_idx);
    const Dataset holdout = source.subset(hold_idx);

    Rng cv_rng(spec.seed, "cv", {s});
    const CvResult cv = cv_select(train, options.grid, cv_rng.next(), options.threads);
    const KlrModel& model = cv.model;
    const std::uint64_t fp = model.fingerprint();
    out.fits.push_back({s, cv.c, cv.kernel.gamma_sq_inv(), cv.lambda, fp, model.fit.iterations});

    const Vector p_hat = empirical_class_probs(train.labels, train.num_classes);
    const ConfusionMatrix conf = confusion_estimate(model, holdout, options.soft_confusion);

    for (std::size_t t = 0; t < target_reps; ++t) {
      const Scenario sc = draw_target(pool, spec, src_idx, s, t);
      const ProbMatrix target_probs = klr_predict(model, sc.target_unlabeled);
      const ProbMatrix test_probs = klr_predict(model, sc.test.features);
      const Vector mu = predicted_distribution(target_probs, options.soft_confusion);

      for (Method m : methods) {
        EvalReport r;
        r.method = m;
        r.source_rep = s;
        r.target_rep = t;
        r.model_fingerprint = fp;
        r.q_true = sc.q_true;
        std::optional<WeightVector> w;
        switch (m) {
          case Method::Cpmkm:
            w = cpm_solve(MatchProblem{p_hat, target_probs, 1e-12}).w;
            break;
          case Method::Bbse: {
            auto est = bbse_solve(conf, mu);
            r.ill_conditioned = est.ill_conditioned;
            w = est.w;
            break;
          }
          case Method::Rlls: {
            auto est = rlls_solve(conf, mu, options.rlls_reg.value_or(rlls_default_reg(conf)));
            r.ill_conditioned = est.ill_conditioned;
            w = est.w;
            break;
          }
          case Method::Mlls:
            w = mlls_em(target_probs, p_hat).w;
            break;
        }
        r.w_hat = w->values();
        r.q_hat = target_class_probs(*w, p_hat);
        std::vector<int> pred(test_probs.rows());
        for (std::size_t i = 0; i < test_probs.rows(); ++i) {
          const Vector q = reweight_posterior(test_probs.row(i), *w);
          pred[i] = static_cast<int>(std::max_element(q.begin(), q.end()) - q.begin());
        }
        r.acc = metric_acc(pred, sc.test.labels);
        r.mse = metric_mse(r.q_hat, r.q_true);
        out.reports.push_back(std::move(r));
      }
    }
  }
  out.summary = summarize(out.reports, methods);
  return out;
}

}  // namespace labelshift
