#include "funnelkit/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iterator>
#include <limits>
#include <sstream>

#include "funnelkit/error.hpp"

namespace funnelkit {
namespace {

constexpr double kWidth = 640;
constexpr double kHeight = 360;
constexpr double kLeft = 64;
constexpr double kRight = 16;
constexpr double kTop = 36;
constexpr double kBottom = 48;
constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&':
        out += "&amp;";
        break;
      case '<':
        out += "&lt;";
        break;
      case '>':
        out += "&gt;";
        break;
      case '"':
        out += "&quot;";
        break;
      default:
        out += c;
    }
  }
  return out;
}

struct Range {
  double lo = 0.0;
  double hi = 1.0;
  void widen() {
    if (!(hi > lo)) {
      lo -= 0.5;
      hi += 0.5;
    }
  }
};

void header(std::ostringstream& ss, const std::string& title) {
  ss << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
     << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  ss << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  ss << "<text x=\"" << fmt(kWidth / 2) << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << escape(title)
     << "</text>\n";
}

void axes(std::ostringstream& ss, const Range& y, auto sy) {
  ss << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft << "\" y2=\"" << kHeight - kBottom
     << "\" stroke=\"black\"/>\n";
  ss << "<line x1=\"" << kLeft << "\" y1=\"" << kHeight - kBottom << "\" x2=\"" << kWidth - kRight << "\" y2=\""
     << kHeight - kBottom << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double v = y.lo + (y.hi - y.lo) * i / 4.0;
    ss << "<text x=\"" << kLeft - 4 << "\" y=\"" << fmt(sy(v) + 4) << "\" text-anchor=\"end\">" << tick(v)
       << "</text>\n";
  }
}

}  // namespace

std::string line_chart_svg(const std::string& title, const std::string& x_label, const std::string& y_label,
                           std::span<const Series> series, std::optional<double> reference) {
  Range xr{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  Range yr = xr;
  for (const auto& s : series) {
    if (s.x.size() != s.y.size()) throw Error("line_chart_svg: series '" + s.name + "' has mismatched x and y");
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      xr.lo = std::min(xr.lo, s.x[i]);
      xr.hi = std::max(xr.hi, s.x[i]);
      yr.lo = std::min(yr.lo, s.y[i]);
      yr.hi = std::max(yr.hi, s.y[i]);
    }
  }
  if (!std::isfinite(xr.lo)) xr = Range{};
  if (!std::isfinite(yr.lo)) yr = Range{};
  if (reference) {
    yr.lo = std::min(yr.lo, *reference);
    yr.hi = std::max(yr.hi, *reference);
  }
  xr.widen();
  yr.widen();
  auto sx = [&](double v) { return kLeft + (v - xr.lo) / (xr.hi - xr.lo) * (kWidth - kLeft - kRight); };
  auto sy = [&](double v) { return kHeight - kBottom - (v - yr.lo) / (yr.hi - yr.lo) * (kHeight - kTop - kBottom); };

  std::ostringstream ss;
  header(ss, title);
  axes(ss, yr, sy);
  ss << "<text x=\"" << fmt(kLeft) << "\" y=\"" << fmt(kHeight - kBottom + 14) << "\">" << tick(xr.lo) << "</text>\n";
  ss << "<text x=\"" << fmt(kWidth - kRight) << "\" y=\"" << fmt(kHeight - kBottom + 14)
     << "\" text-anchor=\"end\">" << tick(xr.hi) << "</text>\n";
  ss << "<text x=\"" << fmt((kLeft + kWidth - kRight) / 2) << "\" y=\"" << fmt(kHeight - 12)
     << "\" text-anchor=\"middle\">" << escape(x_label) << "</text>\n";
  ss << "<text x=\"14\" y=\"" << fmt((kTop + kHeight - kBottom) / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 14 "
     << fmt((kTop + kHeight - kBottom) / 2) << ")\">" << escape(y_label) << "</text>\n";
  if (reference) {
    ss << "<line x1=\"" << fmt(kLeft) << "\" y1=\"" << fmt(sy(*reference)) << "\" x2=\"" << fmt(kWidth - kRight)
       << "\" y2=\"" << fmt(sy(*reference)) << "\" stroke=\"gray\" stroke-dasharray=\"4 3\"/>\n";
  }
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* color = kPalette[k % std::size(kPalette)];
    ss << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    bool first = true;
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      ss << (first ? "" : " ") << fmt(sx(s.x[i])) << ',' << fmt(sy(s.y[i]));
      first = false;
    }
    ss << "\"/>\n";
    ss << "<text x=\"" << fmt(kWidth - kRight - 4) << "\" y=\"" << fmt(kTop + 14 * static_cast<double>(k) + 4)
       << "\" text-anchor=\"end\" fill=\"" << color << "\">" << escape(s.name) << "</text>\n";
  }
  ss << "</svg>\n";
  return ss.str();
}

std::string bar_chart_svg(const std::string& title, std::span<const std::string> labels,
                          std::span<const double> values, std::optional<double> reference) {
  if (labels.size() != values.size()) throw Error("bar_chart_svg: labels and values differ in length");
  Range yr{0.0, 0.0};
  for (double v : values) {
    if (!std::isfinite(v)) continue;
    yr.lo = std::min(yr.lo, v);
    yr.hi = std::max(yr.hi, v);
  }
  if (reference) {
    yr.lo = std::min(yr.lo, *reference);
    yr.hi = std::max(yr.hi, *reference);
  }
  yr.widen();
  auto sy = [&](double v) { return kHeight - kBottom - (v - yr.lo) / (yr.hi - yr.lo) * (kHeight - kTop - kBottom); };

  std::ostringstream ss;
  header(ss, title);
  axes(ss, yr, sy);
  const double slot = (kWidth - kLeft - kRight) / static_cast<double>(std::max<std::size_t>(1, values.size()));
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double x = kLeft + slot * static_cast<double>(i) + slot * 0.15;
    if (std::isfinite(values[i])) {
      const double top = sy(std::max(values[i], 0.0));
      const double bottom = sy(std::min(values[i], 0.0));
      ss << "<rect x=\"" << fmt(x) << "\" y=\"" << fmt(top) << "\" width=\"" << fmt(slot * 0.7) << "\" height=\""
         << fmt(std::max(bottom - top, 0.5)) << "\" fill=\"" << kPalette[0] << "\"/>\n";
    }
    ss << "<text x=\"" << fmt(x + slot * 0.35) << "\" y=\"" << fmt(kHeight - kBottom + 14)
       << "\" text-anchor=\"middle\">" << escape(labels[i]) << "</text>\n";
  }
  if (reference) {
    ss << "<line x1=\"" << fmt(kLeft) << "\" y1=\"" << fmt(sy(*reference)) << "\" x2=\"" << fmt(kWidth - kRight)
       << "\" y2=\"" << fmt(sy(*reference)) << "\" stroke=\"gray\" stroke-dasharray=\"4 3\"/>\n";
  }
  ss << "</svg>\n";
  return ss.str();
}

}  // namespace funnelkit
