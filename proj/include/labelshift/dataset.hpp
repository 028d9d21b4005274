#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "labelshift/matrix.hpp"

namespace labelshift {

/// Labeled sample. Class indices are 0-based; `class_values` records the
/// original label value of each class when the data came from a file.
struct Dataset {
  Matrix features;
  std::vector<int> labels;
  int num_classes = 0;
  std::vector<std::string> feature_names;
  std::vector<std::int64_t> class_values;

  std::size_t size() const { return labels.size(); }
  std::size_t dim() const { return features.cols(); }

  // Throws ValidationError unless n >= 1, labels are in range and features are finite.
  void validate() const;
  Dataset subset(std::span<const std::size_t> idx) const;
  std::vector<std::size_t> class_counts() const;
  // Human-readable class name for messages: the original label if known.
  std::string class_name(int k) const;
};

/// Per-column affine map to zero mean and unit variance. Variances are floored
/// at 1e-12, so constant columns map to all zeros.
struct Standardizer {
  Vector mean;
  Vector scale;

  static Standardizer fit(const Matrix& x);
  Matrix apply(const Matrix& x) const;
};

struct LoadedDataset {
  Dataset data;
  std::optional<Standardizer> standardizer;
};

/// Reads a headered CSV with one integer label column. Labels are re-encoded to
/// 0..M-1 in ascending order of their values. Errors carry the 1-based line and
/// column of the offending cell.
LoadedDataset load_csv(const std::filesystem::path& path, const std::string& label_column,
                       bool standardize);

struct FeatureTable {
  Matrix features;
  std::vector<std::string> names;
};

/// Reads an unlabeled CSV. If `drop_column` is present in the header it is skipped.
FeatureTable load_feature_csv(const std::filesystem::path& path, const std::string& drop_column);

/// Writes features (and labels, when given, as the last column `label_column`).
void write_csv(const std::filesystem::path& path, const Matrix& features,
               const std::vector<std::string>& names, const std::vector<std::int64_t>* labels,
               const std::string& label_column);

}  // namespace labelshift
