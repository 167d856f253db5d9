#pragma once

// Minimal deterministic SVG charts for stage reports.

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace funnelkit {

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

// Non-finite points are skipped. `reference` draws a dashed horizontal line.
std::string line_chart_svg(const std::string& title, const std::string& x_label, const std::string& y_label,
                           std::span<const Series> series, std::optional<double> reference = std::nullopt);

std::string bar_chart_svg(const std::string& title, std::span<const std::string> labels,
                          std::span<const double> values, std::optional<double> reference = std::nullopt);

}  // namespace funnelkit
