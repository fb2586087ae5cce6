#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace dynembed::plot {

struct BarGroup {
  std::string label;
  std::vector<std::pair<std::string, double>> bars;  // (legend key, value)
};

struct Series {
  std::string label;
  std::vector<std::pair<double, double>> points;
};

// Minimal SVG charts with fixed layout and fixed-precision coordinates, so
// equal inputs always give equal bytes. Values are plotted on [0, 1].
// Both throw ArgumentError on empty input.
std::string bar_chart(const std::string& title, const std::string& y_label, const std::vector<BarGroup>& groups);
std::string line_chart(const std::string& title, const std::string& x_label, const std::string& y_label,
                       const std::vector<Series>& series);

// Mean MAP bars grouped by method, one bar per embedding size, from the
// contents of one or more report.csv files.
std::string report_chart(const std::vector<std::string>& report_csvs);
// Mean MAP against the sweep axis, one line per method, from sweep.csv
// contents.
std::string sweep_chart(const std::vector<std::string>& sweep_csvs);

// Writes through a temporary file in the same directory and renames it into
// place, so a failed write leaves no partial file.
void write_file(const std::filesystem::path& path, const std::string& content);
std::string read_file(const std::filesystem::path& path);

}  // namespace dynembed::plot
