#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ppgmm/data.hpp"
#include "ppgmm/projection.hpp"

namespace ppgmm {

struct PlotOptions {
  int width = 640;
  int height = 480;
  std::optional<Basis> biplot;              // arrows from the rows of B (d = 2)
  std::vector<std::string> arrow_names;     // one per row of B
  int bins = 0;                             // histogram bins; 0 picks Sturges
  std::string title;
};

namespace svg_detail {

inline const char* palette(std::size_t k) {
  static constexpr const char* colors[] = {"#1b9e77", "#d95f02", "#7570b3", "#e7298a",
                                           "#66a61e", "#e6ab02", "#a6761d", "#666666"};
  return colors[k % 8];
}

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string escape(const std::string& text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

/// Sorted distinct labels and each row's group index.
inline std::pair<std::vector<std::string>, std::vector<std::size_t>> groups(const Dataset& data) {
  std::vector<std::string> names;
  std::vector<std::size_t> index(static_cast<std::size_t>(data.n()), 0);
  if (!data.labels) return {{""}, index};
  names = *data.labels;
  std::sort(names.begin(), names.end());
  names.erase(std::unique(names.begin(), names.end()), names.end());
  for (std::size_t i = 0; i < index.size(); ++i) {
    index[i] = static_cast<std::size_t>(std::lower_bound(names.begin(), names.end(), (*data.labels)[i]) - names.begin());
  }
  return {names, index};
}

struct Frame {
  double x0, x1, y0, y1;     // data range
  double left, right, top, bottom;  // pixel box
  double px(double x) const { return left + (x - x0) / (x1 - x0) * (right - left); }
  double py(double y) const { return bottom - (y - y0) / (y1 - y0) * (bottom - top); }
};

inline void pad(double& lo, double& hi) {
  if (!(hi > lo)) {
    lo -= 1.0;
    hi += 1.0;
  }
  const double m = 0.05 * (hi - lo);
  lo -= m;
  hi += m;
}

inline void header(std::ostringstream& out, const PlotOptions& opt) {
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << opt.width << "\" height=\""
      << opt.height << "\" viewBox=\"0 0 " << opt.width << ' ' << opt.height << "\">\n"
      << "<rect x=\"0\" y=\"0\" width=\"" << opt.width << "\" height=\"" << opt.height << "\" fill=\"white\"/>\n";
  if (!opt.title.empty()) {
    out << "<text x=\"" << opt.width / 2 << "\" y=\"20\" text-anchor=\"middle\" font-family=\"sans-serif\" "
        << "font-size=\"14\">" << escape(opt.title) << "</text>\n";
  }
}

inline void axes(std::ostringstream& out, const Frame& f, const std::string& xlabel, const std::string& ylabel) {
  out << "<rect x=\"" << num(f.left) << "\" y=\"" << num(f.top) << "\" width=\"" << num(f.right - f.left)
      << "\" height=\"" << num(f.bottom - f.top) << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double xv = f.x0 + (f.x1 - f.x0) * k / 4.0;
    const double yv = f.y0 + (f.y1 - f.y0) * k / 4.0;
    out << "<text x=\"" << num(f.px(xv)) << "\" y=\"" << num(f.bottom + 16)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">" << num(xv) << "</text>\n";
    out << "<text x=\"" << num(f.left - 6) << "\" y=\"" << num(f.py(yv) + 3)
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">" << num(yv) << "</text>\n";
  }
  out << "<text x=\"" << num((f.left + f.right) / 2) << "\" y=\"" << num(f.bottom + 34)
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" << escape(xlabel) << "</text>\n";
  out << "<text x=\"14\" y=\"" << num((f.top + f.bottom) / 2) << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
      << "font-size=\"12\" transform=\"rotate(-90 14 " << num((f.top + f.bottom) / 2) << ")\">" << escape(ylabel)
      << "</text>\n";
}

inline void legend(std::ostringstream& out, const std::vector<std::string>& names, const Frame& f) {
  if (names.size() == 1 && names.front().empty()) return;
  for (std::size_t k = 0; k < names.size(); ++k) {
    const double y = f.top + 12 + 16.0 * static_cast<double>(k);
    out << "<rect x=\"" << num(f.right + 10) << "\" y=\"" << num(y - 8) << "\" width=\"10\" height=\"10\" fill=\""
        << palette(k) << "\"/>\n";
    out << "<text x=\"" << num(f.right + 24) << "\" y=\"" << num(y) << "\" font-family=\"sans-serif\" font-size=\"11\">"
        << escape(names[k]) << "</text>\n";
  }
}

}  // namespace svg_detail

/// Scatterplot of 2-D projected data coloured by label, optionally with
/// biplot arrows for the rows of the basis.
inline std::string scatter_svg(const Dataset& data, const PlotOptions& opt = {}) {
  using namespace svg_detail;
  if (data.p() != 2) throw UsageError("scatter plot needs exactly 2 columns");
  const auto [names, group] = groups(data);
  Frame f{data.values.col(0).minCoeff(), data.values.col(0).maxCoeff(), data.values.col(1).minCoeff(),
          data.values.col(1).maxCoeff(), 60.0, opt.width - 110.0, 30.0, opt.height - 50.0};
  pad(f.x0, f.x1);
  pad(f.y0, f.y1);
  std::ostringstream out;
  header(out, opt);
  axes(out, f, data.feature_names[0], data.feature_names[1]);
  for (std::size_t k = 0; k < names.size(); ++k) {
    out << "<g fill=\"" << palette(k) << "\" fill-opacity=\"0.8\">\n";
    for (Eigen::Index i = 0; i < data.n(); ++i) {
      if (group[static_cast<std::size_t>(i)] != k) continue;
      out << "<circle cx=\"" << num(f.px(data.values(i, 0))) << "\" cy=\"" << num(f.py(data.values(i, 1)))
          << "\" r=\"2.5\"/>\n";
    }
    out << "</g>\n";
  }
  if (opt.biplot) {
    const Matrix& b = opt.biplot->matrix;
    if (b.cols() != 2) throw UsageError("biplot basis must have 2 columns");
    const double reach = std::min({std::abs(f.x0), std::abs(f.x1), std::abs(f.y0), std::abs(f.y1)});
    const double longest = b.rowwise().norm().maxCoeff();
    const double scale = longest > 0.0 ? 0.8 * reach / longest : 0.0;
    out << "<g stroke=\"black\" stroke-width=\"1\" font-family=\"sans-serif\" font-size=\"10\">\n";
    for (Eigen::Index j = 0; j < b.rows(); ++j) {
      const double x = scale * b(j, 0);
      const double y = scale * b(j, 1);
      out << "<line x1=\"" << num(f.px(0)) << "\" y1=\"" << num(f.py(0)) << "\" x2=\"" << num(f.px(x)) << "\" y2=\""
          << num(f.py(y)) << "\"/>\n";
      const std::string name = static_cast<std::size_t>(j) < opt.arrow_names.size()
                                   ? opt.arrow_names[static_cast<std::size_t>(j)]
                                   : "x" + std::to_string(j + 1);
      out << "<text x=\"" << num(f.px(x * 1.08)) << "\" y=\"" << num(f.py(y * 1.08))
          << "\" stroke=\"none\" text-anchor=\"middle\">" << escape(name) << "</text>\n";
    }
    out << "</g>\n";
  }
  legend(out, names, f);
  out << "</svg>\n";
  return out.str();
}

/// Overlaid per-label histograms of 1-D projected data on shared bins.
inline std::string histogram_svg(const Dataset& data, const PlotOptions& opt = {}) {
  using namespace svg_detail;
  if (data.p() != 1) throw UsageError("histogram needs exactly 1 column");
  const auto [names, group] = groups(data);
  const int bins = opt.bins > 0 ? opt.bins
                                : static_cast<int>(std::ceil(std::log2(static_cast<double>(data.n())))) + 1;
  double lo = data.values.col(0).minCoeff();
  double hi = data.values.col(0).maxCoeff();
  if (!(hi > lo)) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double width = (hi - lo) / bins;
  std::vector<std::vector<int>> counts(names.size(), std::vector<int>(static_cast<std::size_t>(bins), 0));
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    int b = static_cast<int>((data.values(i, 0) - lo) / width);
    b = std::clamp(b, 0, bins - 1);
    ++counts[group[static_cast<std::size_t>(i)]][static_cast<std::size_t>(b)];
  }
  int top = 1;
  for (const auto& c : counts) top = std::max(top, *std::max_element(c.begin(), c.end()));
  Frame f{lo, hi, 0.0, static_cast<double>(top) * 1.05, 60.0, opt.width - 110.0, 30.0, opt.height - 50.0};
  std::ostringstream out;
  header(out, opt);
  axes(out, f, data.feature_names[0], "count");
  for (std::size_t k = 0; k < names.size(); ++k) {
    out << "<g fill=\"" << palette(k) << "\" fill-opacity=\"0.5\" stroke=\"" << palette(k) << "\">\n";
    for (int b = 0; b < bins; ++b) {
      const int c = counts[k][static_cast<std::size_t>(b)];
      if (c == 0) continue;
      const double x0 = f.px(lo + b * width);
      const double x1 = f.px(lo + (b + 1) * width);
      out << "<rect x=\"" << num(x0) << "\" y=\"" << num(f.py(c)) << "\" width=\"" << num(x1 - x0) << "\" height=\""
          << num(f.py(0) - f.py(c)) << "\"/>\n";
    }
    out << "</g>\n";
  }
  legend(out, names, f);
  out << "</svg>\n";
  return out.str();
}

}  // namespace ppgmm
