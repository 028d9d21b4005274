#include "labelshift/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "labelshift/error.hpp"

namespace labelshift::io {

namespace {

Json matrix_json(const Matrix& m) {
  return Json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", m.storage()}};
}

Matrix matrix_from(const Json& j, const char* what) {
  const auto rows = j.at("rows").get<std::size_t>();
  const auto cols = j.at("cols").get<std::size_t>();
  auto data = j.at("data").get<std::vector<double>>();
  require(data.size() == rows * cols, std::string(what) + ": data length does not match rows * cols");
  return Matrix(rows, cols, std::move(data));
}

template <class F>
auto guarded(const char* what, F&& f) {
  try {
    return f();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string(what) + ": " + e.what());
  }
}

}  // namespace

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

Json to_json(const KlrModel& model) {
  return Json{{"format_version", kModelFormatVersion},
              {"num_classes", model.num_classes},
              {"dim", model.dim()},
              {"g", model.kernel.gamma_sq_inv()},
              {"lambda", model.lambda},
              {"trunc_t", model.trunc_t},
              {"support", matrix_json(model.support)},
              {"alpha", matrix_json(model.alpha)},
              {"fingerprint", hex64(model.fingerprint())}};
}

KlrModel klr_model_from_json(const Json& j) {
  return guarded("model json", [&] {
    const int version = j.at("format_version").get<int>();
    require(version == kModelFormatVersion,
            "model json: unsupported format_version " + std::to_string(version));
    KlrModel m;
    m.num_classes = j.at("num_classes").get<int>();
    require(m.num_classes >= 2, "model json: num_classes must be at least 2");
    m.kernel = KernelParams(j.at("g").get<double>());
    m.lambda = j.at("lambda").get<double>();
    m.trunc_t = j.at("trunc_t").get<double>();
    validate_trunc_t(m.trunc_t, m.num_classes);
    m.support = matrix_from(j.at("support"), "model json support");
    m.alpha = matrix_from(j.at("alpha"), "model json alpha");
    require(m.support.rows() == m.alpha.rows() &&
                m.alpha.cols() == static_cast<std::size_t>(m.num_classes - 1),
            "model json: alpha shape does not match support and num_classes");
    require(m.support.cols() == j.at("dim").get<std::size_t>(), "model json: dim mismatch");
    return m;
  });
}

Json to_json(const SavedModel& saved) {
  Json j{{"schema_version", kSchemaVersion},
         {"source_model", to_json(saved.model.source_model)},
         {"weights", saved.model.weights.values()},
         {"source_priors", saved.model.source_priors},
         {"class_values", saved.class_values}};
  if (saved.standardizer)
    j["standardizer"] = Json{{"mean", saved.standardizer->mean}, {"scale", saved.standardizer->scale}};
  else
    j["standardizer"] = nullptr;
  return j;
}

SavedModel saved_model_from_json(const Json& j) {
  return guarded("adapted model json", [&] {
    SavedModel s{AdaptedModel{klr_model_from_json(j.at("source_model")),
                              WeightVector(j.at("weights").get<Vector>()),
                              j.at("source_priors").get<Vector>()},
                 std::nullopt,
                 {}};
    if (j.contains("class_values")) s.class_values = j.at("class_values").get<std::vector<std::int64_t>>();
    const auto& st = j.at("standardizer");
    if (!st.is_null()) {
      s.standardizer = Standardizer{st.at("mean").get<Vector>(), st.at("scale").get<Vector>()};
      require(s.standardizer->mean.size() == s.model.source_model.dim() &&
                  s.standardizer->scale.size() == s.model.source_model.dim(),
              "adapted model json: standardizer length does not match model dim");
    }
    s.model.validate();
    return s;
  });
}

Json to_json(const ShiftSpec& spec) {
  return Json{{"alpha", spec.alpha}, {"m_q", spec.m_q}, {"n_p", spec.n_p},
              {"n_q", spec.n_q},     {"n_t", spec.n_t}, {"seed", spec.seed}};
}

Json to_json(const EvalReport& r) {
  return Json{{"method", method_name(r.method)},
              {"source_rep", r.source_rep},
              {"target_rep", r.target_rep},
              {"acc", r.acc},
              {"mse", r.mse},
              {"w_hat", r.w_hat},
              {"q_hat", r.q_hat},
              {"q_true", r.q_true},
              {"model_fingerprint", hex64(r.model_fingerprint)},
              {"ill_conditioned", r.ill_conditioned}};
}

Json to_json(const MethodSummary& s) {
  return Json{{"method", method_name(s.method)}, {"count", s.count},
              {"acc_mean", s.acc_mean},          {"acc_std", s.acc_std},
              {"mse_mean", s.mse_mean},          {"mse_std", s.mse_std}};
}

Json benchmark_json(const BenchmarkRun& run, const std::string& timestamp) {
  Json methods = Json::array();
  for (Method m : run.methods) methods.push_back(method_name(m));
  const auto& g = run.options.grid;
  Json config{{"spec", to_json(run.spec)},
              {"methods", methods},
              {"source_reps", run.source_reps},
              {"target_reps", run.target_reps},
              {"c_grid", g.c_values},
              {"g_grid", g.g_values},
              {"folds", g.folds},
              {"trunc_t", g.trunc_t},
              {"holdout_fraction", run.options.holdout_fraction},
              {"soft_confusion", run.options.soft_confusion},
              {"rlls_reg", run.options.rlls_reg ? Json(*run.options.rlls_reg) : Json(nullptr)}};
  Json fits = Json::array();
  for (const auto& f : run.result.fits)
    fits.push_back(Json{{"source_rep", f.source_rep},
                        {"c", f.c},
                        {"g", f.g},
                        {"lambda", f.lambda},
                        {"model_fingerprint", hex64(f.model_fingerprint)},
                        {"iterations", f.iterations}});
  Json reports = Json::array();
  for (const auto& r : run.result.reports) reports.push_back(to_json(r));
  Json summary = Json::array();
  for (const auto& s : run.result.summary) summary.push_back(to_json(s));
  return Json{{"schema_version", kSchemaVersion},
              {"timestamp", timestamp},
              {"config", config},
              {"fits", fits},
              {"reports", reports},
              {"summary", summary}};
}

std::string benchmark_csv(const BenchmarkResult& result, int num_classes) {
  std::ostringstream out;
  out.precision(17);
  out << "method,source_rep,target_rep,acc,mse";
  for (int k = 0; k < num_classes; ++k) out << ",q_hat_" << k;
  for (int k = 0; k < num_classes; ++k) out << ",q_true_" << k;
  for (int k = 0; k < num_classes; ++k) out << ",w_hat_" << k;
  out << '\n';
  for (const auto& r : result.reports) {
    out << method_name(r.method) << ',' << r.source_rep << ',' << r.target_rep << ',' << r.acc << ','
        << r.mse;
    for (double v : r.q_hat) out << ',' << v;
    for (double v : r.q_true) out << ',' << v;
    for (double v : r.w_hat) out << ',' << v;
    out << '\n';
  }
  return out.str();
}

Json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << text;
  if (!out) throw ValidationError("write failed: " + path.string());
}

void write_json(const std::filesystem::path& path, const Json& j) { write_text(path, j.dump(2) + "\n"); }

}  // namespace labelshift::io
