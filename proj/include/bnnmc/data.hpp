#pragma once

#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "bnnmc/errors.hpp"
#include "bnnmc/linalg.hpp"
#include "bnnmc/rng.hpp"

namespace bnnmc {

enum class TaskKind { Classification, Regression };

struct Dataset {
  Matrix inputs;                        // n x d
  std::vector<int> class_targets;       // classification labels in [0, C)
  Matrix real_targets;                  // regression targets, n x outputs
  std::vector<std::string> feature_names;
  TaskKind task = TaskKind::Classification;
  int num_classes = 0;

  std::size_t rows() const { return inputs.rows; }
  std::size_t cols() const { return inputs.cols; }
  std::size_t output_dim() const {
    return task == TaskKind::Classification ? static_cast<std::size_t>(num_classes)
                                            : real_targets.cols;
  }
};

// Gaussian clusters, one per class, centered on a circle of the given radius
// for d = 2 and on scaled coordinate axes for d > 2. Classes are balanced and
// rows are class-major.
inline Dataset make_blobs(std::size_t per_class, std::size_t classes, std::size_t dim,
                          double separation, std::uint64_t seed) {
  require(per_class >= 1 && classes >= 1 && dim >= 1, ErrorCode::InvalidConfig,
          "make_blobs: counts must be >= 1");
  require(dim == 2 || classes <= 2 * dim, ErrorCode::InvalidConfig,
          "make_blobs: too many classes for the input dimension");
  Rng rng(seed);
  Dataset ds;
  ds.task = TaskKind::Classification;
  ds.num_classes = static_cast<int>(classes);
  ds.inputs = Matrix(per_class * classes, dim);
  ds.class_targets.resize(per_class * classes);
  for (std::size_t j = 0; j < dim; ++j) ds.feature_names.push_back("x" + std::to_string(j));

  std::vector<std::vector<double>> centers(classes, std::vector<double>(dim, 0.0));
  for (std::size_t c = 0; c < classes; ++c) {
    if (dim == 2) {
      const double angle = 2.0 * 3.14159265358979323846 * static_cast<double>(c) /
                           static_cast<double>(classes);
      centers[c][0] = separation * std::cos(angle);
      centers[c][1] = separation * std::sin(angle);
    } else {
      const double sign = c < dim ? 1.0 : -1.0;
      centers[c][c % dim] = sign * separation;
    }
  }

  std::size_t r = 0;
  for (std::size_t c = 0; c < classes; ++c) {
    for (std::size_t i = 0; i < per_class; ++i, ++r) {
      for (std::size_t j = 0; j < dim; ++j) {
        ds.inputs(r, j) = centers[c][j] + rng.normal();
      }
      ds.class_targets[r] = static_cast<int>(c);
    }
  }
  return ds;
}

// Regression toy: x uniform on [-1, 1], y = sin(2 pi x) + noise.
inline Dataset make_sine(std::size_t n, double noise, std::uint64_t seed) {
  require(n >= 1, ErrorCode::InvalidConfig, "make_sine: n must be >= 1");
  require(noise >= 0.0, ErrorCode::InvalidConfig, "make_sine: noise must be >= 0");
  Rng rng(seed);
  Dataset ds;
  ds.task = TaskKind::Regression;
  ds.inputs = Matrix(n, 1);
  ds.real_targets = Matrix(n, 1);
  ds.feature_names = {"x"};
  for (std::size_t i = 0; i < n; ++i) {
    const double x = rng.uniform(-1.0, 1.0);
    ds.inputs(i, 0) = x;
    ds.real_targets(i, 0) = std::sin(2.0 * 3.14159265358979323846 * x) +
                            (noise > 0.0 ? noise * rng.normal() : 0.0);
  }
  return ds;
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      cells.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  cells.push_back(cur);
  return cells;
}

inline double parse_cell(const std::string& cell, std::size_t row, std::size_t col) {
  double value = 0.0;
  const char* begin = cell.data();
  const char* end = begin + cell.size();
  while (begin != end && (*begin == ' ' || *begin == '\t')) ++begin;
  while (end != begin && (*(end - 1) == ' ' || *(end - 1) == '\t')) --end;
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc{} || ptr != end || begin == end) {
    fail(ErrorCode::ParseError, "row " + std::to_string(row) + ", column " +
                                    std::to_string(col) + ": cannot parse '" + cell + "'");
  }
  return value;
}

}  // namespace detail

// Comma-separated numeric file with a mandatory header row. Row order is
// preserved and cells are parsed as exact 64-bit decimals.
inline Dataset load_csv(const std::string& path, const std::string& target_column,
                        TaskKind task) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::MissingFile, path);

  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorCode::ParseError,
          path + ": missing header row");
  const std::vector<std::string> header = detail::split_csv_line(line);
  std::size_t target_idx = header.size();
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (header[j] == target_column) target_idx = j;
  }
  require(target_idx < header.size(), ErrorCode::UnknownColumn,
          "no column named '" + target_column + "' in " + path);

  Dataset ds;
  ds.task = task;
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (j != target_idx) ds.feature_names.push_back(header[j]);
  }

  std::vector<double> values;
  std::vector<double> targets;
  std::size_t rows = 0;
  for (std::size_t row = 1; std::getline(in, line); ++row) {
    if (line.empty()) continue;
    const std::vector<std::string> cells = detail::split_csv_line(line);
    require(cells.size() == header.size(), ErrorCode::ParseError,
            "row " + std::to_string(row) + ": expected " + std::to_string(header.size()) +
                " cells, got " + std::to_string(cells.size()));
    for (std::size_t j = 0; j < cells.size(); ++j) {
      const double v = detail::parse_cell(cells[j], row, j);
      if (j == target_idx) {
        targets.push_back(v);
      } else {
        values.push_back(v);
      }
    }
    ++rows;
  }
  require(rows >= 1, ErrorCode::ParseError, path + ": no data rows");

  ds.inputs = Matrix(rows, header.size() - 1);
  ds.inputs.data = std::move(values);
  if (task == TaskKind::Classification) {
    int max_label = 0;
    for (double t : targets) {
      const int label = static_cast<int>(std::lround(t));
      require(label >= 0 && std::abs(t - label) < 1e-9, ErrorCode::ParseError,
              "class labels must be non-negative integers, got " + std::to_string(t));
      ds.class_targets.push_back(label);
      max_label = std::max(max_label, label);
    }
    ds.num_classes = max_label + 1;
  } else {
    ds.real_targets = Matrix(rows, 1);
    ds.real_targets.data = std::move(targets);
  }
  return ds;
}

// Writes a dataset back out in the exact format load_csv reads; values keep
// full round-trip precision.
inline void save_csv(const Dataset& ds, const std::string& path,
                     const std::string& target_column = "target") {
  std::ofstream out(path);
  require(out.good(), ErrorCode::IoError, "cannot open " + path + " for writing");
  for (std::size_t j = 0; j < ds.cols(); ++j) {
    out << (j ? "," : "")
        << (j < ds.feature_names.size() ? ds.feature_names[j] : "x" + std::to_string(j));
  }
  out << (ds.cols() ? "," : "") << target_column << "\n";
  char buf[64];
  for (std::size_t i = 0; i < ds.rows(); ++i) {
    for (std::size_t j = 0; j < ds.cols(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", ds.inputs(i, j));
      out << buf << ",";
    }
    if (ds.task == TaskKind::Classification) {
      out << ds.class_targets[i];
    } else {
      std::snprintf(buf, sizeof(buf), "%.17g", ds.real_targets(i, 0));
      out << buf;
    }
    out << "\n";
  }
  require(out.good(), ErrorCode::IoError, "write failed for " + path);
}

namespace detail {

inline Dataset take_rows(const Dataset& ds, std::span<const std::size_t> idx) {
  Dataset out;
  out.task = ds.task;
  out.num_classes = ds.num_classes;
  out.feature_names = ds.feature_names;
  out.inputs = Matrix(idx.size(), ds.cols());
  if (ds.task == TaskKind::Classification) {
    out.class_targets.resize(idx.size());
  } else {
    out.real_targets = Matrix(idx.size(), ds.real_targets.cols);
  }
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const std::size_t r = idx[i];
    for (std::size_t j = 0; j < ds.cols(); ++j) out.inputs(i, j) = ds.inputs(r, j);
    if (ds.task == TaskKind::Classification) {
      out.class_targets[i] = ds.class_targets[r];
    } else {
      for (std::size_t j = 0; j < ds.real_targets.cols; ++j) {
        out.real_targets(i, j) = ds.real_targets(r, j);
      }
    }
  }
  return out;
}

}  // namespace detail

// Seeded permutation split into (train, test).
inline std::pair<Dataset, Dataset> split(const Dataset& ds, double train_fraction,
                                         std::uint64_t seed) {
  require(train_fraction > 0.0 && train_fraction < 1.0, ErrorCode::InvalidConfig,
          "split: fraction must lie in (0, 1)");
  const std::size_t n = ds.rows();
  const std::size_t train_n = static_cast<std::size_t>(train_fraction * static_cast<double>(n));
  require(train_n >= 1 && train_n < n, ErrorCode::DegenerateSplit,
          "split leaves an empty side (n = " + std::to_string(n) + ")");
  Rng rng(seed);
  const std::vector<std::size_t> perm = rng.permutation(n);
  return {detail::take_rows(ds, std::span<const std::size_t>(perm.data(), train_n)),
          detail::take_rows(ds, std::span<const std::size_t>(perm.data() + train_n,
                                                             n - train_n))};
}

// Distribution shift: adds a constant offset to every input row.
inline Dataset ood_shift(const Dataset& ds, std::span<const double> offset) {
  require(offset.size() == ds.cols(), ErrorCode::DimensionMismatch,
          "ood_shift: offset length must equal input dimension");
  Dataset out = ds;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    for (std::size_t j = 0; j < out.cols(); ++j) out.inputs(i, j) += offset[j];
  }
  return out;
}

// Configuration mirror of the CLI's --data flag; kept serializable so an
// archive records exactly how to regenerate its dataset.
struct DataConfig {
  enum class Kind { Blobs, Sine, Csv };
  Kind kind = Kind::Blobs;
  std::size_t per_class = 64;
  std::size_t classes = 2;
  std::size_t dim = 2;
  double separation = 3.0;
  std::size_t n = 128;      // sine
  double noise = 0.1;       // sine
  std::string path;         // csv
  std::string target_column = "target";
  TaskKind task = TaskKind::Classification;
  std::uint64_t seed = 0;
};

inline Dataset make_dataset(const DataConfig& cfg) {
  switch (cfg.kind) {
    case DataConfig::Kind::Blobs:
      return make_blobs(cfg.per_class, cfg.classes, cfg.dim, cfg.separation, cfg.seed);
    case DataConfig::Kind::Sine:
      return make_sine(cfg.n, cfg.noise, cfg.seed);
    case DataConfig::Kind::Csv:
      return load_csv(cfg.path, cfg.target_column, cfg.task);
  }
  fail(ErrorCode::InvalidConfig, "unknown data kind");
}

}  // namespace bnnmc
