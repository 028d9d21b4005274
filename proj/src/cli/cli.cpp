#include <algorithm>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <map>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "commands.hpp"
#include "labelshift/adapt.hpp"
#include "labelshift/error.hpp"
#include "labelshift/io.hpp"
#include "labelshift/shiftlab.hpp"
#include "labelshift/simd.hpp"
#include "labelshift/synthetic.hpp"

namespace labelshift::cli {

namespace fs = std::filesystem;
using io::Json;

namespace {

struct CommonArgs {
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  std::string simd = "auto";
  std::string label_column = "label";
  bool no_standardize = false;
};

struct GridArgs {
  std::vector<double> c_grid;
  std::vector<double> g_grid;
  std::size_t folds = 5;
  double trunc_t = 1e-8;

  CvGrid build() const {
    CvGrid g = CvGrid::defaults();
    if (!c_grid.empty()) g.c_values = c_grid;
    if (!g_grid.empty()) g.g_values = g_grid;
    g.folds = folds;
    g.trunc_t = trunc_t;
    g.validate();
    return g;
  }
};

struct PoolArgs {
  std::string pool;
  bool synthetic = false;
  std::size_t synthetic_per_class = 5000;
  double synthetic_side = 1.0;
  double synthetic_sigma = 1.0;
};

struct SpecArgs {
  double alpha = 1.0;
  int mq = 0;  // 0: all classes
  std::size_t np = 2000, nq = 1000, nt = 1000;

  ShiftSpec build(int num_classes, std::uint64_t seed) const {
    ShiftSpec s{alpha, mq == 0 ? num_classes : mq, np, nq, nt, seed};
    s.validate(num_classes);
    return s;
  }
};

void add_grid(CLI::App* cmd, GridArgs& g) {
  cmd->add_option("--c-grid", g.c_grid, "Comma-separated C values (default: 7 log-spaced in [1e-6, 1])")
      ->delimiter(',');
  cmd->add_option("--g-grid", g.g_grid, "Comma-separated g values (default: 7 log-spaced in [2^-6, 1])")
      ->delimiter(',');
  cmd->add_option("--folds", g.folds, "Cross-validation folds")->capture_default_str();
  cmd->add_option("--trunc-t", g.trunc_t, "Truncation threshold t")->capture_default_str();
}

void add_pool(CLI::App* cmd, PoolArgs& p) {
  cmd->add_option("--pool", p.pool, "Labeled pool CSV");
  cmd->add_flag("--synthetic", p.synthetic, "Use a 3-class Gaussian triangle pool instead of --pool");
  cmd->add_option("--synthetic-per-class", p.synthetic_per_class, "Synthetic pool rows per class")
      ->capture_default_str();
  cmd->add_option("--synthetic-side", p.synthetic_side, "Distance between synthetic class means")
      ->capture_default_str();
  cmd->add_option("--synthetic-sigma", p.synthetic_sigma, "Synthetic class standard deviation")
      ->capture_default_str();
}

void add_spec(CLI::App* cmd, SpecArgs& s) {
  cmd->add_option("--alpha", s.alpha, "Dirichlet concentration")->capture_default_str();
  cmd->add_option("--mq", s.mq, "Classes supported in the target (0: all)")->capture_default_str();
  cmd->add_option("--np", s.np, "Source size")->capture_default_str();
  cmd->add_option("--nq", s.nq, "Unlabeled target size")->capture_default_str();
  cmd->add_option("--nt", s.nt, "Labeled test size")->capture_default_str();
}

LoadedDataset load_pool(const PoolArgs& p, const CommonArgs& c, bool standardize) {
  require(p.synthetic != !p.pool.empty(), "give exactly one of --pool and --synthetic");
  if (!p.synthetic) return load_csv(p.pool, c.label_column, standardize);
  require(p.synthetic_per_class >= 1, "--synthetic-per-class must be positive");
  const auto gm = GaussianMixture::triangle(p.synthetic_side, p.synthetic_sigma);
  Rng rng(c.seed, "synthetic-pool");
  const std::vector<std::size_t> counts(3, p.synthetic_per_class);
  return LoadedDataset{gm.sample(rng, counts), std::nullopt};
}

std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::int64_t class_value(const Dataset& d, int k) {
  return d.class_values.empty() ? k : d.class_values[static_cast<std::size_t>(k)];
}

std::vector<std::int64_t> class_values_of(const Dataset& d) {
  std::vector<std::int64_t> v(static_cast<std::size_t>(d.num_classes));
  for (int k = 0; k < d.num_classes; ++k) v[static_cast<std::size_t>(k)] = class_value(d, k);
  return v;
}

void write_label_column(const fs::path& path, const std::string& column, std::span<const std::int64_t> labels) {
  std::string text = column + "\n";
  for (auto v : labels) text += std::to_string(v) + "\n";
  io::write_text(path, text);
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ValidationError("cannot create directory " + dir.string() + ": " + ec.message());
}

// ---- adapt -----------------------------------------------------------------

struct AdaptArgs {
  std::string source, target, out_dir;
  GridArgs grid;
};

int cmd_adapt(const AdaptArgs& a, const CommonArgs& c, std::ostream& out) {
  const CvGrid grid = a.grid.build();
  LoadedDataset src = load_csv(a.source, c.label_column, !c.no_standardize);
  FeatureTable tgt = load_feature_csv(a.target, c.label_column);
  require(tgt.features.cols() == src.data.dim(),
          a.target + ": " + std::to_string(tgt.features.cols()) + " feature columns, source has " +
              std::to_string(src.data.dim()));
  const Matrix tx = src.standardizer ? src.standardizer->apply(tgt.features) : tgt.features;

  const AdaptResult r = adapt_pipeline(src.data, tx, grid, c.seed, c.threads);
  const TargetPrediction pred = predict_target(r.model, tx);
  const Vector q_hat = target_class_probs(r.model);
  const auto values = class_values_of(src.data);

  const fs::path dir(a.out_dir);
  ensure_dir(dir);
  io::write_json(dir / "model.json", io::to_json(io::SavedModel{r.model, src.standardizer, values}));

  Json cv_table = Json::array();
  for (const auto& cell : r.cv.table)
    cv_table.push_back(Json{{"c", cell.c}, {"g", cell.g}, {"mean_ce", cell.mean_ce}});
  Json summary{{"schema_version", io::kSchemaVersion},
               {"class_values", values},
               {"weights", r.model.weights.values()},
               {"target_class_probs", q_hat},
               {"source_priors", r.model.source_priors},
               {"selected", Json{{"c", r.cv.c}, {"g", r.cv.kernel.gamma_sq_inv()}, {"lambda", r.cv.lambda}}},
               {"cv_table", cv_table},
               {"solver",
                Json{{"status", to_string(r.solution.status)},
                     {"iterations", r.solution.iterations},
                     {"objective", r.solution.objective}}}};
  io::write_json(dir / "adapt.json", summary);

  std::vector<std::int64_t> labels;
  labels.reserve(pred.labels.size());
  for (int k : pred.labels) labels.push_back(values[static_cast<std::size_t>(k)]);
  write_label_column(dir / "predictions.csv", c.label_column, labels);

  out << "class   w_hat        q_hat\n";
  for (std::size_t k = 0; k < values.size(); ++k) {
    char line[96];
    std::snprintf(line, sizeof line, "%-7lld %-12.6f %.6f\n", static_cast<long long>(values[k]),
                  r.model.weights[k], q_hat[k]);
    out << line;
  }
  out << "wrote " << (dir / "model.json").string() << ", " << (dir / "adapt.json").string() << ", "
      << (dir / "predictions.csv").string() << '\n';
  return kExitOk;
}

// ---- benchmark -------------------------------------------------------------

struct BenchArgs {
  PoolArgs pool;
  SpecArgs spec;
  GridArgs grid;
  std::vector<std::string> methods{"cpmkm", "bbse", "rlls", "mlls"};
  std::size_t source_reps = 10, target_reps = 10;
  bool soft_confusion = false;
  double holdout = 0.25;
  std::optional<double> rlls_reg;
  std::string out, csv, timestamp;
};

int cmd_benchmark(const BenchArgs& a, const CommonArgs& c, std::ostream& out) {
  std::vector<Method> methods;
  for (const auto& m : a.methods) methods.push_back(parse_method(m));
  require(!methods.empty(), "--methods is empty");
  for (std::size_t i = 0; i < methods.size(); ++i)
    for (std::size_t j = 0; j < i; ++j)
      require(methods[i] != methods[j], "--methods lists " + a.methods[i] + " twice");
  BenchmarkOptions opt;
  opt.grid = a.grid.build();
  opt.holdout_fraction = a.holdout;
  opt.soft_confusion = a.soft_confusion;
  opt.rlls_reg = a.rlls_reg;
  opt.threads = c.threads;
  if (a.rlls_reg) require(*a.rlls_reg >= 0.0, "--rlls-reg must be nonnegative");

  const LoadedDataset pool = load_pool(a.pool, c, !c.no_standardize);
  const ShiftSpec spec = a.spec.build(pool.data.num_classes, c.seed);

  io::BenchmarkRun run{spec, methods, a.source_reps, a.target_reps, opt, {}};
  run.result = run_benchmark(pool.data, spec, methods, a.source_reps, a.target_reps, opt);
  const std::string stamp = a.timestamp.empty() ? utc_timestamp() : a.timestamp;
  io::write_json(a.out, io::benchmark_json(run, stamp));
  if (!a.csv.empty()) io::write_text(a.csv, io::benchmark_csv(run.result, pool.data.num_classes));

  out << "method  reps  acc (std)          mse (std)\n";
  for (const auto& s : run.result.summary) {
    char line[128];
    std::snprintf(line, sizeof line, "%-7s %-5zu %.4f (%.4f)    %.3e (%.3e)\n",
                  std::string(method_name(s.method)).c_str(), s.count, s.acc_mean, s.acc_std, s.mse_mean,
                  s.mse_std);
    out << line;
  }
  out << "wrote " << a.out << '\n';
  return kExitOk;
}

// ---- simulate --------------------------------------------------------------

struct SimArgs {
  PoolArgs pool;
  SpecArgs spec;
  std::size_t source_rep = 0, target_rep = 0;
  std::string out_dir;
};

int cmd_simulate(const SimArgs& a, const CommonArgs& c, std::ostream& out) {
  const LoadedDataset pool = load_pool(a.pool, c, false);
  const Dataset& d = pool.data;
  const ShiftSpec spec = a.spec.build(d.num_classes, c.seed);
  const Scenario sc = sample_shift_scenario(d, spec, a.source_rep, a.target_rep);
  const auto values = class_values_of(d);
  auto original = [&](std::span<const int> labels) {
    std::vector<std::int64_t> v;
    for (int k : labels) v.push_back(values[static_cast<std::size_t>(k)]);
    return v;
  };

  const fs::path dir(a.out_dir);
  ensure_dir(dir);
  const auto src_labels = original(sc.source.labels);
  const auto test_labels = original(sc.test.labels);
  write_csv(dir / "source.csv", sc.source.features, d.feature_names, &src_labels, c.label_column);
  write_csv(dir / "target.csv", sc.target_unlabeled, d.feature_names, nullptr, c.label_column);
  write_label_column(dir / "target_labels.csv", c.label_column, original(sc.target_labels));
  write_csv(dir / "test.csv", sc.test.features, d.feature_names, &test_labels, c.label_column);

  Json target_classes = Json::array();
  for (int k : sc.target_classes) target_classes.push_back(values[static_cast<std::size_t>(k)]);
  io::write_json(dir / "scenario.json", Json{{"schema_version", io::kSchemaVersion},
                                             {"spec", io::to_json(spec)},
                                             {"source_rep", a.source_rep},
                                             {"target_rep", a.target_rep},
                                             {"class_values", values},
                                             {"target_classes", target_classes},
                                             {"q_true", sc.q_true},
                                             {"source_index", sc.source_index},
                                             {"target_index", sc.target_index},
                                             {"test_index", sc.test_index}});
  out << "source " << sc.source.size() << " rows, target " << sc.target_unlabeled.rows() << " rows, test "
      << sc.test.size() << " rows\nwrote " << dir.string() << '\n';
  return kExitOk;
}

// ---- evaluate --------------------------------------------------------------

struct EvalArgs {
  std::string predictions, truth, pred_column = "label";
  std::string adapt_json, scenario;
  std::string out;
};

std::vector<std::int64_t> read_label_column(const std::string& path, const std::string& column) {
  FeatureTable t = load_feature_csv(path, "");
  const auto it = std::find(t.names.begin(), t.names.end(), column);
  require(it != t.names.end(), path + ": no column named '" + column + "'");
  const auto col = static_cast<std::size_t>(it - t.names.begin());
  std::vector<std::int64_t> out(t.features.rows());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double v = t.features(i, col);
    require(v == std::floor(v) && std::abs(v) < 9e15,
            path + ": line " + std::to_string(i + 2) + ": label is not an integer");
    out[i] = static_cast<std::int64_t>(v);
  }
  return out;
}

int cmd_evaluate(const EvalArgs& a, const CommonArgs& c, std::ostream& out) {
  const auto pred = read_label_column(a.predictions, a.pred_column);
  const auto truth = read_label_column(a.truth, c.label_column);
  require(pred.size() == truth.size(), "predictions have " + std::to_string(pred.size()) +
                                           " rows, truth has " + std::to_string(truth.size()));
  std::vector<int> p(pred.size()), t(truth.size());
  std::map<std::int64_t, int> codes;
  auto code = [&](std::int64_t v) { return codes.try_emplace(v, static_cast<int>(codes.size())).first->second; };
  for (std::size_t i = 0; i < pred.size(); ++i) {
    p[i] = code(pred[i]);
    t[i] = code(truth[i]);
  }
  Json result{{"schema_version", io::kSchemaVersion}, {"n", pred.size()}, {"acc", metric_acc(p, t)}};

  require(a.adapt_json.empty() == a.scenario.empty(), "--adapt-json and --scenario go together");
  if (!a.adapt_json.empty()) {
    const Json aj = io::read_json(a.adapt_json);
    const Json sj = io::read_json(a.scenario);
    try {
      const auto q_hat = aj.at("target_class_probs").get<Vector>();
      const auto q_true = sj.at("q_true").get<Vector>();
      require(aj.at("class_values") == sj.at("class_values"),
              "class values differ between " + a.adapt_json + " and " + a.scenario);
      result["mse"] = metric_mse(q_hat, q_true);
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(std::string("evaluate: ") + e.what());
    }
  }
  const std::string text = result.dump(2) + "\n";
  if (!a.out.empty()) io::write_text(a.out, text);
  out << text;
  return kExitOk;
}

// ---- plot-data -------------------------------------------------------------

struct PlotArgs {
  std::vector<std::string> inputs;
  std::string metric = "mse";
  std::string out;
};

int cmd_plot_data(const PlotArgs& a, std::ostream& out) {
  require(a.metric == "mse" || a.metric == "acc", "--metric must be mse or acc");
  struct Row {
    std::string method;
    std::size_t n_q;
    double mean, sd;
  };
  std::vector<Row> rows;
  for (const auto& path : a.inputs) {
    const Json j = io::read_json(path);
    try {
      const auto n_q = j.at("config").at("spec").at("n_q").get<std::size_t>();
      for (const auto& s : j.at("summary"))
        rows.push_back({s.at("method").get<std::string>(), n_q, s.at(a.metric + "_mean").get<double>(),
                        s.at(a.metric + "_std").get<double>()});
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(path + ": not a benchmark report: " + e.what());
    }
  }
  std::stable_sort(rows.begin(), rows.end(), [](const Row& x, const Row& y) {
    return std::tie(x.method, x.n_q) < std::tie(y.method, y.n_q);
  });
  std::ostringstream csv;
  csv.precision(17);
  csv << "method,n_q," << a.metric << "_mean," << a.metric << "_std\n";
  for (const auto& r : rows) csv << r.method << ',' << r.n_q << ',' << r.mean << ',' << r.sd << '\n';
  if (a.out.empty())
    out << csv.str();
  else
    io::write_text(a.out, csv.str());
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Label-shift adaptation by class probability matching with kernel logistic regression",
               "labelshift"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "TOML/INI file with option values; command-line flags take precedence");
  app.allow_config_extras(CLI::config_extras_mode::error);

  CommonArgs common;
  app.add_option("--seed", common.seed, "Run seed; every random stream derives from it")->capture_default_str();
  app.add_option("--threads", common.threads, "Maximum worker threads")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app.add_option("--simd", common.simd, "Kernel variant: auto, scalar or avx2")->capture_default_str();
  app.add_option("--label-column", common.label_column, "Name of the label column")->capture_default_str();
  app.add_flag("--no-standardize", common.no_standardize, "Keep raw feature scales");

  AdaptArgs adapt;
  auto* c_adapt = app.add_subcommand("adapt", "Fit on labeled source, estimate the class ratio on unlabeled target");
  c_adapt->add_option("--source", adapt.source, "Labeled source CSV")->required();
  c_adapt->add_option("--target", adapt.target, "Unlabeled target CSV")->required();
  c_adapt->add_option("--out-dir", adapt.out_dir, "Output directory")->required();
  add_grid(c_adapt, adapt.grid);

  BenchArgs bench;
  auto* c_bench = app.add_subcommand("benchmark", "Repeated label-shift trials over a labeled pool");
  add_pool(c_bench, bench.pool);
  add_spec(c_bench, bench.spec);
  add_grid(c_bench, bench.grid);
  c_bench->add_option("--methods", bench.methods, "Comma-separated subset of cpmkm,bbse,rlls,mlls")
      ->delimiter(',');
  c_bench->add_option("--source-reps", bench.source_reps, "Source resamples")->capture_default_str();
  c_bench->add_option("--target-reps", bench.target_reps, "Target resamples per source")->capture_default_str();
  c_bench->add_option("--holdout", bench.holdout, "Source share held out for confusion matrices")
      ->capture_default_str();
  c_bench->add_flag("--soft-confusion", bench.soft_confusion, "Soft confusion matrices for bbse and rlls");
  c_bench->add_option("--rlls-reg", bench.rlls_reg, "RLLS ridge weight (default 1e-3 tr(C)/M)");
  c_bench->add_option("--out", bench.out, "Report JSON")->required();
  c_bench->add_option("--csv", bench.csv, "Optional per-report CSV");
  c_bench->add_option("--timestamp", bench.timestamp)->group("");

  SimArgs sim;
  auto* c_sim = app.add_subcommand("simulate", "Write one shift scenario as CSV files");
  add_pool(c_sim, sim.pool);
  add_spec(c_sim, sim.spec);
  c_sim->add_option("--source-rep", sim.source_rep, "Source resample index")->capture_default_str();
  c_sim->add_option("--target-rep", sim.target_rep, "Target resample index")->capture_default_str();
  c_sim->add_option("--out-dir", sim.out_dir, "Output directory")->required();

  EvalArgs eval;
  auto* c_eval = app.add_subcommand("evaluate", "Accuracy and class-probability MSE from saved outputs");
  c_eval->add_option("--predictions", eval.predictions, "CSV with predicted labels")->required();
  c_eval->add_option("--pred-column", eval.pred_column, "Prediction column name")->capture_default_str();
  c_eval->add_option("--truth", eval.truth, "CSV with true labels (column --label-column)")->required();
  c_eval->add_option("--adapt-json", eval.adapt_json, "adapt.json holding target_class_probs");
  c_eval->add_option("--scenario", eval.scenario, "scenario.json holding q_true");
  c_eval->add_option("--out", eval.out, "Optional JSON output path");

  bool inject_fault = false;
  auto* c_self = app.add_subcommand("selftest", "Run the fast invariant suite");
  c_self->add_flag("--inject-fault", inject_fault)->group("");

  PlotArgs plot;
  auto* c_plot = app.add_subcommand("plot-data", "Per-method (n_q, mean, std) rows from benchmark reports");
  c_plot->add_option("--inputs", plot.inputs, "Benchmark JSON files")->required();
  c_plot->add_option("--metric", plot.metric, "mse or acc")->capture_default_str();
  c_plot->add_option("--out", plot.out, "CSV path (default: stdout)");

  for (auto* sub : app.get_subcommands({})) sub->allow_config_extras(CLI::config_extras_mode::error);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (common.simd != "auto") simd::set_active(simd::parse_isa(common.simd));
    if (*c_adapt) return cmd_adapt(adapt, common, out);
    if (*c_bench) return cmd_benchmark(bench, common, out);
    if (*c_sim) return cmd_simulate(sim, common, out);
    if (*c_eval) return cmd_evaluate(eval, common, out);
    if (*c_self) return run_selftest(out, inject_fault);
    if (*c_plot) return cmd_plot_data(plot, out);
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "failure: " << e.what() << '\n';
    return kExitNumerical;
  }
  return kExitValidation;
}

}  // namespace labelshift::cli
