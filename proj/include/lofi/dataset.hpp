#pragma once

#include <filesystem>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "lofi/linalg.hpp"

namespace lofi {

/// Inputs x_mu (one per row) with scalar labels y_mu.
struct Dataset {
  Matrix x;
  Vector y;
  bool centered = false;
  std::string name;

  Index size() const { return x.rows(); }
  Index dim() const { return x.cols(); }
};

/// Throws InvalidInput when the shapes disagree or the dataset is empty.
void validate(const Dataset& ds);

/// y - mean(y); sets `centered`.
Dataset center_labels(Dataset ds);

/// +1 for labels in `positive`, -1 otherwise. Throws DegenerateLabels when
/// either class ends up empty.
Vector binarize_labels(const std::vector<int>& classes, const std::set<int>& positive);

/// Seeded random partition into a train part of round(fraction * n) rows and
/// a test part with the rest.
std::pair<Dataset, Dataset> split(const Dataset& ds, double train_fraction, Rng& rng);

/// Per-feature z-scoring statistics, fitted on one dataset and applied to others.
struct Standardizer {
  Vector mean;
  Vector scale;  // standard deviation, with constant features mapped to 1

  static Standardizer fit(const Matrix& x);
  Matrix apply(const Matrix& x) const;
};

/// Reads a numeric CSV (decimal point only). Optionally skips one header row.
Matrix read_csv(const std::filesystem::path& path, bool skip_header = false);

/// Dataset files: an LFMT (or CSV) matrix whose last column holds the labels.
Dataset load_dataset(const std::filesystem::path& path, bool skip_header = false);
void save_dataset(const Dataset& ds, const std::filesystem::path& path);

Matrix join_labels(const Dataset& ds);

}  // namespace lofi
