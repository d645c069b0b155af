#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "cavi/harness/csv.hpp"

namespace cavi::harness::svg {

struct Series {
  std::string label;
  std::string color;
  std::vector<double> x;
  std::vector<double> y;
  bool line = true;  // polyline; otherwise markers
};

struct Box {
  std::string label;
  std::string color;
  std::vector<double> values;
};

namespace detail {

inline constexpr double kWidth = 640, kHeight = 420, kLeft = 70, kRight = 20, kTop = 40, kBottom = 60;

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

inline std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Frame {
  double x0, x1, y0, y1;
  double px(double x) const { return kLeft + (x - x0) / (x1 - x0) * (kWidth - kLeft - kRight); }
  double py(double y) const { return kHeight - kBottom - (y - y0) / (y1 - y0) * (kHeight - kTop - kBottom); }
};

inline void pad(double& lo, double& hi) {
  if (!(lo < hi)) {
    lo -= 0.5;
    hi += 0.5;
    return;
  }
  const double m = 0.05 * (hi - lo);
  lo -= m;
  hi += m;
}

inline void header(std::ostringstream& os, const std::string& title) {
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
     << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
     << "<text x=\"" << kWidth / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" "
        "font-size=\"15\">" << escape(title) << "</text>\n";
}

inline void axes(std::ostringstream& os, const Frame& f, const std::string& xlabel,
                 const std::string& ylabel, bool numeric_x) {
  const double xa = kLeft, xb = kWidth - kRight, ya = kHeight - kBottom, yb = kTop;
  os << "<line x1=\"" << xa << "\" y1=\"" << ya << "\" x2=\"" << xb << "\" y2=\"" << ya
     << "\" stroke=\"black\"/>\n<line x1=\"" << xa << "\" y1=\"" << ya << "\" x2=\"" << xa
     << "\" y2=\"" << yb << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double yv = f.y0 + (f.y1 - f.y0) * i / 4.0;
    os << "<text x=\"" << xa - 6 << "\" y=\"" << num(f.py(yv) + 4)
       << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << num(yv) << "</text>\n";
    if (numeric_x) {
      const double xv = f.x0 + (f.x1 - f.x0) * i / 4.0;
      os << "<text x=\"" << num(f.px(xv)) << "\" y=\"" << ya + 16
         << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" << num(xv)
         << "</text>\n";
    }
  }
  os << "<text x=\"" << (xa + xb) / 2 << "\" y=\"" << kHeight - 12
     << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">" << escape(xlabel)
     << "</text>\n<text x=\"16\" y=\"" << (ya + yb) / 2 << "\" transform=\"rotate(-90 16 "
     << (ya + yb) / 2 << ")\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">"
     << escape(ylabel) << "</text>\n";
}

inline void save(const std::filesystem::path& path, const std::string& body) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << body;
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace detail

/// Line / marker chart of one or more series. Non-finite points are skipped.
inline void xy_plot(const std::filesystem::path& path, const std::string& title,
                    const std::string& xlabel, const std::string& ylabel,
                    const std::vector<Series>& series) {
  using namespace detail;
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i]);
      y1 = std::max(y1, s.y[i]);
    }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  pad(x0, x1);
  pad(y0, y1);
  const Frame f{x0, x1, y0, y1};
  std::ostringstream os;
  header(os, title);
  axes(os, f, xlabel, ylabel, true);
  double legend_y = kTop + 10;
  for (const auto& s : series) {
    if (s.line) {
      os << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.5\" points=\"";
      for (std::size_t i = 0; i < s.x.size(); ++i)
        if (std::isfinite(s.x[i]) && std::isfinite(s.y[i]))
          os << num(f.px(s.x[i])) << ',' << num(f.py(s.y[i])) << ' ';
      os << "\"/>\n";
    } else {
      for (std::size_t i = 0; i < s.x.size(); ++i)
        if (std::isfinite(s.x[i]) && std::isfinite(s.y[i]))
          os << "<circle cx=\"" << num(f.px(s.x[i])) << "\" cy=\"" << num(f.py(s.y[i]))
             << "\" r=\"3\" fill=\"" << s.color << "\"/>\n";
    }
    if (!s.label.empty()) {
      os << "<text x=\"" << kWidth - kRight - 4 << "\" y=\"" << legend_y
         << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"12\" fill=\"" << s.color
         << "\">" << escape(s.label) << "</text>\n";
      legend_y += 16;
    }
  }
  os << "</svg>\n";
  save(path, os.str());
}

namespace detail {

inline double quantile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = static_cast<std::size_t>(std::ceil(pos));
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace detail

/// Box-and-whisker chart (whiskers at min / max), one box per entry.
/// Boxes with no finite values are drawn as an empty slot.
inline void box_plot(const std::filesystem::path& path, const std::string& title,
                     const std::string& ylabel, const std::vector<Box>& boxes,
                     double reference_line = std::numeric_limits<double>::quiet_NaN()) {
  using namespace detail;
  double y0 = std::numeric_limits<double>::infinity(), y1 = -y0;
  for (const auto& b : boxes)
    for (double v : b.values)
      if (std::isfinite(v)) y0 = std::min(y0, v), y1 = std::max(y1, v);
  if (std::isfinite(reference_line)) y0 = std::min(y0, reference_line), y1 = std::max(y1, reference_line);
  if (!std::isfinite(y0)) y0 = 0, y1 = 1;
  pad(y0, y1);
  const double nb = static_cast<double>(std::max<std::size_t>(boxes.size(), 1));
  const Frame f{0.0, nb, y0, y1};
  std::ostringstream os;
  header(os, title);
  axes(os, f, "", ylabel, false);
  if (std::isfinite(reference_line))
    os << "<line x1=\"" << kLeft << "\" y1=\"" << num(f.py(reference_line)) << "\" x2=\""
       << kWidth - kRight << "\" y2=\"" << num(f.py(reference_line))
       << "\" stroke=\"gray\" stroke-dasharray=\"4 3\"/>\n";
  const double half = 0.3;
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    const double cx = static_cast<double>(i) + 0.5;
    std::vector<double> v;
    for (double x : boxes[i].values)
      if (std::isfinite(x)) v.push_back(x);
    os << "<text x=\"" << num(f.px(cx)) << "\" y=\"" << kHeight - kBottom + 14
       << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"9\" transform=\"rotate(-35 "
       << num(f.px(cx)) << ' ' << kHeight - kBottom + 14 << ")\">" << escape(boxes[i].label)
       << "</text>\n";
    if (v.empty()) continue;
    const double q0 = quantile(v, 0.0), q1 = quantile(v, 0.25), q2 = quantile(v, 0.5),
                 q3 = quantile(v, 0.75), q4 = quantile(v, 1.0);
    const std::string& c = boxes[i].color;
    os << "<line x1=\"" << num(f.px(cx)) << "\" y1=\"" << num(f.py(q0)) << "\" x2=\"" << num(f.px(cx))
       << "\" y2=\"" << num(f.py(q4)) << "\" stroke=\"" << c << "\"/>\n"
       << "<rect x=\"" << num(f.px(cx - half)) << "\" y=\"" << num(f.py(q3)) << "\" width=\""
       << num(f.px(cx + half) - f.px(cx - half)) << "\" height=\"" << num(f.py(q1) - f.py(q3))
       << "\" fill=\"white\" stroke=\"" << c << "\"/>\n"
       << "<line x1=\"" << num(f.px(cx - half)) << "\" y1=\"" << num(f.py(q2)) << "\" x2=\""
       << num(f.px(cx + half)) << "\" y2=\"" << num(f.py(q2)) << "\" stroke=\"" << c
       << "\" stroke-width=\"2\"/>\n";
  }
  os << "</svg>\n";
  save(path, os.str());
}

}  // namespace cavi::harness::svg
