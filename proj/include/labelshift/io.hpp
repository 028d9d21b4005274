#pragma once

// JSON persistence for fitted models and benchmark reports.

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "labelshift/adapt.hpp"
#include "labelshift/dataset.hpp"
#include "labelshift/klr.hpp"
#include "labelshift/shiftlab.hpp"

namespace labelshift::io {

inline constexpr int kSchemaVersion = 1;
inline constexpr int kModelFormatVersion = 1;

using Json = nlohmann::ordered_json;

Json to_json(const KlrModel& model);
KlrModel klr_model_from_json(const Json& j);

struct SavedModel {
  AdaptedModel model;
  std::optional<Standardizer> standardizer;
  std::vector<std::int64_t> class_values;
};

Json to_json(const SavedModel& saved);
SavedModel saved_model_from_json(const Json& j);

Json to_json(const ShiftSpec& spec);
Json to_json(const EvalReport& report);
Json to_json(const MethodSummary& summary);

struct BenchmarkRun {
  ShiftSpec spec;
  std::vector<Method> methods;
  std::size_t source_reps = 0;
  std::size_t target_reps = 0;
  BenchmarkOptions options;
  BenchmarkResult result;
};

/// Full report. `timestamp` is metadata only and never feeds computation.
Json benchmark_json(const BenchmarkRun& run, const std::string& timestamp);

/// One CSV row per report: method, reps, acc, mse, then q_hat and w_hat columns.
std::string benchmark_csv(const BenchmarkResult& result, int num_classes);

std::string hex64(std::uint64_t v);

Json read_json(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);
void write_json(const std::filesystem::path& path, const Json& j);

}  // namespace labelshift::io
