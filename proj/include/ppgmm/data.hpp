#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "ppgmm/error.hpp"
#include "ppgmm/linalg.hpp"
#include "ppgmm/rng.hpp"

namespace ppgmm {

/// n x p numeric data with column names and optional per-row class tags.
/// Labels are carried for display only; no computation branches on them.
struct Dataset {
  Matrix values;
  std::vector<std::string> feature_names;
  std::optional<std::vector<std::string>> labels;

  Dataset() = default;
  Dataset(Matrix x, std::vector<std::string> names,
          std::optional<std::vector<std::string>> tags = std::nullopt)
      : values(std::move(x)), feature_names(std::move(names)), labels(std::move(tags)) {
    if (feature_names.empty()) feature_names = default_names(values.cols());
    if (static_cast<Eigen::Index>(feature_names.size()) != values.cols()) {
      throw DataError("feature_names has " + std::to_string(feature_names.size()) +
                      " entries but the data has " + std::to_string(values.cols()) +
                      " columns");
    }
    if (labels && static_cast<Eigen::Index>(labels->size()) != values.rows()) {
      throw DataError("labels length does not match the number of rows");
    }
    if (!values.allFinite()) throw DataError("dataset contains non-finite values");
  }

  Eigen::Index n() const { return values.rows(); }
  Eigen::Index p() const { return values.cols(); }

  static std::vector<std::string> default_names(Eigen::Index p) {
    std::vector<std::string> names;
    names.reserve(static_cast<std::size_t>(p));
    for (Eigen::Index j = 0; j < p; ++j) names.push_back("x" + std::to_string(j + 1));
    return names;
  }
};

// ---------------------------------------------------------------------------
// CSV

namespace detail {

inline std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    std::string_view cell = line.substr(start, comma == std::string_view::npos
                                                   ? std::string_view::npos
                                                   : comma - start);
    while (!cell.empty() && (cell.front() == ' ' || cell.front() == '\t')) cell.remove_prefix(1);
    while (!cell.empty() && (cell.back() == ' ' || cell.back() == '\t' || cell.back() == '\r')) {
      cell.remove_suffix(1);
    }
    cells.emplace_back(cell);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return cells;
}

inline std::optional<double> parse_real(std::string_view text) {
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(value)) {
    return std::nullopt;
  }
  return value;
}

}  // namespace detail

/// Formats a double with 17 significant digits, enough to round-trip.
inline std::string format_real(double value) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

/// Parses comma-separated numeric data. With `label_column`, the named column
/// (which requires a header) is moved into the labels and may hold any text.
inline Dataset parse_csv(std::istream& in, bool has_header,
                         const std::optional<std::string>& label_column = std::nullopt,
                         const std::string& source = "<stream>", Eigen::Index min_columns = 2) {
  if (label_column && !has_header) {
    throw UsageError("a label column can only be named when the file has a header");
  }
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    if (line.front() == '#') continue;
    auto cells = detail::split_csv_line(line);
    if (has_header && header.empty()) {
      header = std::move(cells);
      continue;
    }
    rows.push_back(std::move(cells));
    line_numbers.push_back(line_no);
  }
  if (rows.empty()) throw DataError(source + ": no data rows");

  const std::size_t width = has_header ? header.size() : rows.front().size();
  std::optional<std::size_t> label_index;
  if (label_column) {
    for (std::size_t j = 0; j < header.size(); ++j) {
      if (header[j] == *label_column) label_index = j;
    }
    if (!label_index) throw DataError(source + ": no column named '" + *label_column + "'");
  }

  const std::size_t p = width - (label_index ? 1 : 0);
  if (p < min_columns) {
    throw DataError(source + ": need at least " + std::to_string(min_columns) + " numeric columns, found " +
                    std::to_string(p));
  }
  if (rows.size() < 2) throw DataError(source + ": need at least 2 data rows");

  Matrix values(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(p));
  std::vector<std::string> labels;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& cells = rows[i];
    if (cells.size() != width) {
      throw DataError(source + ": line " + std::to_string(line_numbers[i]) + " has " +
                      std::to_string(cells.size()) + " fields, expected " + std::to_string(width));
    }
    Eigen::Index col = 0;
    for (std::size_t j = 0; j < width; ++j) {
      if (label_index && j == *label_index) {
        labels.push_back(cells[j]);
        continue;
      }
      const auto value = detail::parse_real(cells[j]);
      if (!value) {
        throw DataError(source + ": line " + std::to_string(line_numbers[i]) + ", column " +
                        std::to_string(j + 1) + ": '" + cells[j] + "' is not a finite number");
      }
      values(static_cast<Eigen::Index>(i), col++) = *value;
    }
  }

  std::vector<std::string> names;
  if (has_header) {
    for (std::size_t j = 0; j < width; ++j) {
      if (!(label_index && j == *label_index)) names.push_back(header[j]);
    }
  }
  std::optional<std::vector<std::string>> tags;
  if (label_index) tags = std::move(labels);
  return Dataset(std::move(values), std::move(names), std::move(tags));
}

inline Dataset load_csv(const std::string& path, bool has_header,
                        const std::optional<std::string>& label_column = std::nullopt,
                        Eigen::Index min_columns = 2) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  return parse_csv(in, has_header, label_column, path, min_columns);
}

/// Writes a header row, then one row per observation; labels go last in a
/// column named `label_name`.
inline void write_csv(std::ostream& out, const Dataset& data,
                      const std::string& label_name = "class") {
  for (std::size_t j = 0; j < data.feature_names.size(); ++j) {
    if (j) out << ',';
    out << data.feature_names[j];
  }
  if (data.labels) out << ',' << label_name;
  out << '\n';
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    for (Eigen::Index j = 0; j < data.p(); ++j) {
      if (j) out << ',';
      out << format_real(data.values(i, j));
    }
    if (data.labels) out << ',' << (*data.labels)[static_cast<std::size_t>(i)];
    out << '\n';
  }
}

inline void save_csv(const std::string& path, const Dataset& data,
                     const std::string& label_name = "class") {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path + "'");
  write_csv(out, data, label_name);
  if (!out) throw DataError("write to '" + path + "' failed");
}

// ---------------------------------------------------------------------------
// Centering and scaling

enum class PreprocessMode { center, center_scale };

inline std::string to_string(PreprocessMode mode) {
  return mode == PreprocessMode::center ? "center" : "center_scale";
}

inline PreprocessMode parse_preprocess_mode(std::string_view text) {
  if (text == "center") return PreprocessMode::center;
  if (text == "center_scale") return PreprocessMode::center_scale;
  throw UsageError("unknown preprocessing mode '" + std::string(text) +
                   "' (expected center or center_scale)");
}

/// Column location and scale. `scale` is all ones in center mode.
struct Preprocessor {
  PreprocessMode mode = PreprocessMode::center;
  Vector mean;
  Vector scale;

  Eigen::Index p() const { return mean.size(); }
};

inline Preprocessor fit_preprocessor(const Dataset& data, PreprocessMode mode) {
  if (data.n() < 2) throw DataError("need at least 2 rows to estimate column scales");
  Preprocessor pre;
  pre.mode = mode;
  pre.mean = data.values.colwise().mean().transpose();
  pre.scale = Vector::Ones(data.p());
  if (mode == PreprocessMode::center_scale) {
    const Matrix centered = data.values.rowwise() - pre.mean.transpose();
    const double divisor = static_cast<double>(data.n() - 1);
    for (Eigen::Index j = 0; j < data.p(); ++j) {
      const double var = centered.col(j).squaredNorm() / divisor;
      if (!(var > 0.0)) {
        throw DataError("column '" + data.feature_names[static_cast<std::size_t>(j)] +
                        "' has zero variance and cannot be scaled");
      }
      pre.scale(j) = std::sqrt(var);
    }
  }
  return pre;
}

inline Dataset apply_preprocessor(const Preprocessor& pre, const Dataset& data) {
  if (data.p() != pre.p()) {
    throw DataError("preprocessor expects " + std::to_string(pre.p()) + " columns, data has " +
                    std::to_string(data.p()));
  }
  Matrix out = (data.values.rowwise() - pre.mean.transpose()).array().rowwise() /
               pre.scale.transpose().array();
  return Dataset(std::move(out), data.feature_names, data.labels);
}

inline Dataset invert_preprocessor(const Preprocessor& pre, const Dataset& data) {
  if (data.p() != pre.p()) throw DataError("preprocessor dimension mismatch");
  Matrix out = (data.values.array().rowwise() * pre.scale.transpose().array()).matrix();
  out.rowwise() += pre.mean.transpose();
  return Dataset(std::move(out), data.feature_names, data.labels);
}

// ---------------------------------------------------------------------------
// Simulated data

/// Three spherical clusters (covariance 0.1 I) at the vertices (-1,-1), (0,1),
/// (1,-1) in the first two coordinates, equal weights; coordinates 3..p are
/// independent standard normals. Labels give the component of origin (1..3).
inline Dataset simulate_triangle(Eigen::Index n, Eigen::Index p, std::uint64_t seed) {
  if (n < 1) throw UsageError("simulate_triangle: n must be at least 1");
  if (p < 2) throw UsageError("simulate_triangle: p must be at least 2");
  static constexpr double kVertices[3][2] = {{-1.0, -1.0}, {0.0, 1.0}, {1.0, -1.0}};
  const double sd = std::sqrt(0.1);
  Rng rng(seed);
  Matrix x(n, p);
  std::vector<std::string> labels;
  labels.reserve(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    const std::size_t g = rng.index(3);
    x(i, 0) = kVertices[g][0] + sd * rng.normal();
    x(i, 1) = kVertices[g][1] + sd * rng.normal();
    for (Eigen::Index j = 2; j < p; ++j) x(i, j) = rng.normal();
    labels.push_back(std::to_string(g + 1));
  }
  return Dataset(std::move(x), Dataset::default_names(p), std::move(labels));
}

/// Triangular base waveform max(6 - |j - 11|, 0) on j = 1..21, shifted by
/// `shift` (w2 uses shift -4, w3 uses +4).
inline double base_waveform(int j, int shift = 0) {
  const int k = j + shift;
  return std::max(6.0 - std::abs(k - 11), 0.0);
}

inline double waveform(int which, int j) {
  switch (which) {
    case 1: return base_waveform(j);
    case 2: return base_waveform(j, -4);
    case 3: return base_waveform(j, 4);
    default: throw UsageError("waveform index must be 1, 2 or 3");
  }
}

struct WaveformOptions {
  bool noise = true;
  std::optional<double> fixed_mixing;  // test hook: use this u for every row
};

/// 21-feature, 3-class waveform data: class g mixes two shifted triangles with
/// u ~ U[0,1] and adds independent N(0,1) noise per feature.
inline Dataset simulate_waveform(Eigen::Index n, std::uint64_t seed,
                                 const WaveformOptions& options = {}) {
  if (n < 1) throw UsageError("simulate_waveform: n must be at least 1");
  static constexpr int kPairs[3][2] = {{1, 2}, {2, 3}, {3, 1}};
  constexpr int p = 21;
  Rng rng(seed);
  Matrix x(n, p);
  std::vector<std::string> labels;
  labels.reserve(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    const std::size_t g = rng.index(3);
    const double drawn = rng.uniform();
    const double u = options.fixed_mixing.value_or(drawn);
    for (int j = 1; j <= p; ++j) {
      const double signal = u * waveform(kPairs[g][0], j) + (1.0 - u) * waveform(kPairs[g][1], j);
      const double eps = rng.normal();
      x(i, j - 1) = signal + (options.noise ? eps : 0.0);
    }
    labels.push_back(std::to_string(g + 1));
  }
  return Dataset(std::move(x), Dataset::default_names(p), std::move(labels));
}

}  // namespace ppgmm
