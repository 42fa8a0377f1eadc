#include "lofi/dataset.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "lofi/errors.hpp"
#include "lofi/lfmt.hpp"

namespace lofi {

void validate(const Dataset& ds) {
  if (ds.x.rows() < 1) throw InvalidInput("dataset has no rows");
  if (ds.x.rows() != ds.y.size()) throw InvalidInput("dataset inputs and labels differ in length");
  require_finite(ds.x, "dataset inputs");
  require_finite(ds.y, "dataset labels");
}

Dataset center_labels(Dataset ds) {
  if (ds.y.size() < 1) throw InvalidInput("center_labels: empty label vector");
  ds.y.array() -= ds.y.mean();
  ds.centered = true;
  return ds;
}

Vector binarize_labels(const std::vector<int>& classes, const std::set<int>& positive) {
  if (positive.empty()) throw DegenerateLabels("positive class set is empty");
  Vector out(static_cast<Index>(classes.size()));
  Index n_pos = 0;
  for (std::size_t i = 0; i < classes.size(); ++i) {
    const bool pos = positive.count(classes[i]) > 0;
    out(static_cast<Index>(i)) = pos ? 1.0 : -1.0;
    n_pos += pos ? 1 : 0;
  }
  if (n_pos == 0 || n_pos == out.size()) {
    throw DegenerateLabels("binarized labels contain a single class");
  }
  return out;
}

std::pair<Dataset, Dataset> split(const Dataset& ds, double train_fraction, Rng& rng) {
  validate(ds);
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw InvalidInput("train fraction must lie strictly between 0 and 1");
  }
  const Index n = ds.size();
  const auto n_train = static_cast<Index>(std::llround(train_fraction * static_cast<double>(n)));
  if (n_train < 1 || n_train >= n) throw InvalidInput("split would leave an empty part");

  const auto perm = rng.permutation(static_cast<std::size_t>(n));
  auto take = [&](Index from, Index to, const std::string& suffix) {
    Dataset part;
    part.x.resize(to - from, ds.dim());
    part.y.resize(to - from);
    for (Index i = from; i < to; ++i) {
      const auto r = static_cast<Index>(perm[static_cast<std::size_t>(i)]);
      part.x.row(i - from) = ds.x.row(r);
      part.y(i - from) = ds.y(r);
    }
    part.centered = false;
    part.name = ds.name + suffix;
    return part;
  };
  return {take(0, n_train, ":train"), take(n_train, n, ":test")};
}

Standardizer Standardizer::fit(const Matrix& x) {
  Standardizer s;
  s.mean = x.colwise().mean().transpose();
  s.scale.resize(x.cols());
  for (Index c = 0; c < x.cols(); ++c) {
    const double var = (x.col(c).array() - s.mean(c)).square().mean();
    s.scale(c) = var > 0.0 ? std::sqrt(var) : 1.0;
  }
  return s;
}

Matrix Standardizer::apply(const Matrix& x) const {
  if (x.cols() != mean.size()) throw InvalidInput("standardizer dimension mismatch");
  return (x.rowwise() - mean.transpose()).array().rowwise() / scale.transpose().array();
}

Matrix read_csv(const std::filesystem::path& path, bool skip_header) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  std::uint64_t offset = 0;
  bool first = true;
  while (std::getline(in, line)) {
    const std::uint64_t line_start = offset;
    offset += line.size() + 1;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (first && skip_header) {
      first = false;
      continue;
    }
    first = false;
    if (line.find_first_not_of(" \t") == std::string::npos) continue;

    std::vector<double> values;
    std::size_t pos = 0;
    while (pos <= line.size()) {
      const std::size_t comma = std::min(line.find(',', pos), line.size());
      std::size_t a = line.find_first_not_of(" \t", pos);
      std::size_t b = comma;
      while (b > pos && (line[b - 1] == ' ' || line[b - 1] == '\t')) --b;
      double v = 0.0;
      const char* first_char = line.data() + std::min(a, b);
      const auto res = std::from_chars(first_char, line.data() + b, v);
      if (a >= b || res.ec != std::errc() || res.ptr != line.data() + b) {
        throw FormatError("unparsable CSV field", line_start + std::min(a, b));
      }
      values.push_back(v);
      pos = comma + 1;
    }
    if (!rows.empty() && values.size() != rows.front().size()) {
      throw FormatError("CSV row has a different column count", line_start);
    }
    rows.push_back(std::move(values));
  }
  if (rows.empty()) throw FormatError("CSV file has no data rows", 0);

  Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      m(static_cast<Index>(r), static_cast<Index>(c)) = rows[r][c];
    }
  }
  return m;
}

namespace {

bool is_csv(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  for (auto& ch : ext) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return ext == ".csv";
}

}  // namespace

Dataset load_dataset(const std::filesystem::path& path, bool skip_header) {
  const Matrix m = is_csv(path) ? read_csv(path, skip_header) : load_lfmt(path);
  if (m.cols() < 2) throw InvalidInput("dataset file needs at least one feature and one label column");
  Dataset ds;
  ds.x = m.leftCols(m.cols() - 1);
  ds.y = m.col(m.cols() - 1);
  ds.name = path.stem().string();
  validate(ds);
  return ds;
}

Matrix join_labels(const Dataset& ds) {
  Matrix m(ds.size(), ds.dim() + 1);
  m.leftCols(ds.dim()) = ds.x;
  m.col(ds.dim()) = ds.y;
  return m;
}

void save_dataset(const Dataset& ds, const std::filesystem::path& path) {
  validate(ds);
  save_lfmt(join_labels(ds), path);
}

}  // namespace lofi
