#include "labelshift/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "labelshift/error.hpp"

namespace labelshift {

void Dataset::validate() const {
  require(!labels.empty(), "dataset is empty");
  require(features.rows() == labels.size(), "dataset: feature rows do not match label count");
  require(num_classes >= 1, "dataset: class count must be positive");
  for (std::size_t i = 0; i < labels.size(); ++i)
    require(labels[i] >= 0 && labels[i] < num_classes,
            "dataset: label out of range at row " + std::to_string(i));
  for (double v : features.data()) require(std::isfinite(v), "dataset: non-finite feature value");
}

Dataset Dataset::subset(std::span<const std::size_t> idx) const {
  Dataset out;
  out.features = features.select_rows(idx);
  out.labels.reserve(idx.size());
  for (auto i : idx) out.labels.push_back(labels.at(i));
  out.num_classes = num_classes;
  out.feature_names = feature_names;
  out.class_values = class_values;
  return out;
}

std::vector<std::size_t> Dataset::class_counts() const {
  std::vector<std::size_t> counts(static_cast<std::size_t>(num_classes), 0);
  for (int y : labels) ++counts.at(static_cast<std::size_t>(y));
  return counts;
}

std::string Dataset::class_name(int k) const {
  if (static_cast<std::size_t>(k) < class_values.size())
    return std::to_string(class_values[static_cast<std::size_t>(k)]);
  return "#" + std::to_string(k);
}

Standardizer Standardizer::fit(const Matrix& x) {
  require(x.rows() > 0, "standardize: empty matrix");
  const std::size_t n = x.rows(), d = x.cols();
  Standardizer s{Vector(d, 0.0), Vector(d, 0.0)};
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) s.mean[j] += x(i, j);
  for (auto& m : s.mean) m /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      const double c = x(i, j) - s.mean[j];
      s.scale[j] += c * c;
    }
  for (auto& v : s.scale) v = std::sqrt(std::max(v / static_cast<double>(n), 1e-12));
  return s;
}

Matrix Standardizer::apply(const Matrix& x) const {
  require(x.cols() == mean.size(), "standardize: column count mismatch");
  Matrix out = x;
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.cols(); ++j) out(i, j) = (x(i, j) - mean[j]) / scale[j];
  return out;
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\"");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\"");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(',', start);
    out.push_back(trim(std::string_view(line).substr(start, pos - start)));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string where(const std::filesystem::path& path, std::size_t line, std::size_t col) {
  return path.string() + ":" + std::to_string(line) + ": column " + std::to_string(col);
}

double parse_double(const std::string& cell, const std::filesystem::path& path, std::size_t line,
                    std::size_t col) {
  double v = 0.0;
  const auto* end = cell.data() + cell.size();
  auto [ptr, ec] = std::from_chars(cell.data(), end, v);
  if (cell.empty() || ec != std::errc() || ptr != end || !std::isfinite(v))
    throw ValidationError(where(path, line, col) + ": cannot parse '" + cell + "' as a number");
  return v;
}

std::int64_t parse_int(const std::string& cell, const std::filesystem::path& path, std::size_t line,
                       std::size_t col) {
  std::int64_t v = 0;
  const auto* end = cell.data() + cell.size();
  auto [ptr, ec] = std::from_chars(cell.data(), end, v);
  if (cell.empty() || ec != std::errc() || ptr != end)
    throw ValidationError(where(path, line, col) + ": cannot parse label '" + cell + "' as an integer");
  return v;
}

struct RawTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;
};

RawTable read_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open file: " + path.string());
  RawTable t;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    auto cells = split(line);
    if (t.header.empty()) {
      t.header = std::move(cells);
      continue;
    }
    if (cells.size() != t.header.size())
      throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": expected " +
                            std::to_string(t.header.size()) + " cells, found " +
                            std::to_string(cells.size()));
    t.rows.push_back(std::move(cells));
    t.line_numbers.push_back(lineno);
  }
  if (t.header.empty()) throw ValidationError(path.string() + ": file is empty");
  if (t.rows.empty()) throw ValidationError(path.string() + ": no data rows after the header");
  return t;
}

}  // namespace

LoadedDataset load_csv(const std::filesystem::path& path, const std::string& label_column,
                       bool standardize) {
  const RawTable t = read_table(path);
  const auto it = std::find(t.header.begin(), t.header.end(), label_column);
  if (it == t.header.end())
    throw ValidationError(path.string() + ": label column '" + label_column + "' not in header");
  const std::size_t label_col = static_cast<std::size_t>(it - t.header.begin());
  const std::size_t d = t.header.size() - 1;
  require(d >= 1, path.string() + ": no feature columns");

  LoadedDataset out;
  Dataset& ds = out.data;
  for (std::size_t j = 0; j < t.header.size(); ++j)
    if (j != label_col) ds.feature_names.push_back(t.header[j]);

  ds.features = Matrix(t.rows.size(), d);
  std::vector<std::int64_t> raw_labels(t.rows.size());
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    std::size_t c = 0;
    for (std::size_t j = 0; j < t.header.size(); ++j) {
      if (j == label_col) {
        raw_labels[i] = parse_int(t.rows[i][j], path, t.line_numbers[i], j + 1);
      } else {
        ds.features(i, c++) = parse_double(t.rows[i][j], path, t.line_numbers[i], j + 1);
      }
    }
  }

  std::map<std::int64_t, int> code;
  for (auto v : raw_labels) code.emplace(v, 0);
  if (code.size() < 2) throw ValidationError(path.string() + ": file contains a single class");
  int next = 0;
  for (auto& [value, k] : code) {
    k = next++;
    ds.class_values.push_back(value);
  }
  ds.num_classes = next;
  ds.labels.reserve(raw_labels.size());
  for (auto v : raw_labels) ds.labels.push_back(code[v]);

  if (standardize) {
    out.standardizer = Standardizer::fit(ds.features);
    ds.features = out.standardizer->apply(ds.features);
  }
  ds.validate();
  return out;
}

FeatureTable load_feature_csv(const std::filesystem::path& path, const std::string& drop_column) {
  const RawTable t = read_table(path);
  FeatureTable out;
  std::vector<std::size_t> keep;
  for (std::size_t j = 0; j < t.header.size(); ++j) {
    if (t.header[j] == drop_column) continue;
    keep.push_back(j);
    out.names.push_back(t.header[j]);
  }
  require(!keep.empty(), path.string() + ": no feature columns");
  out.features = Matrix(t.rows.size(), keep.size());
  for (std::size_t i = 0; i < t.rows.size(); ++i)
    for (std::size_t c = 0; c < keep.size(); ++c)
      out.features(i, c) = parse_double(t.rows[i][keep[c]], path, t.line_numbers[i], keep[c] + 1);
  return out;
}

void write_csv(const std::filesystem::path& path, const Matrix& features,
               const std::vector<std::string>& names, const std::vector<std::int64_t>* labels,
               const std::string& label_column) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write file: " + path.string());
  require(names.size() == features.cols(), "write_csv: header size mismatch");
  for (std::size_t j = 0; j < names.size(); ++j) out << (j ? "," : "") << names[j];
  if (labels) out << "," << label_column;
  out << '\n';
  char buf[32];
  for (std::size_t i = 0; i < features.rows(); ++i) {
    for (std::size_t j = 0; j < features.cols(); ++j) {
      auto [end, ec] = std::to_chars(buf, buf + sizeof buf, features(i, j));
      out << (j ? "," : "") << std::string_view(buf, static_cast<std::size_t>(end - buf));
    }
    if (labels) out << "," << (*labels).at(i);
    out << '\n';
  }
}

}  // namespace labelshift
