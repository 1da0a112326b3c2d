#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

namespace fewdp {

// Shortest representation that round-trips the exact double.
std::string format_double(double v);

std::string csv_quote(const std::string& field);
std::string to_csv(const std::vector<std::string>& header,
                   const std::vector<std::vector<std::string>>& rows);

void write_text_file(const std::string& path, const std::string& content);
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);
void write_json(const std::string& path, const nlohmann::json& j);

struct PlotSeries {
  std::string name;
  std::vector<std::pair<double, double>> points;
};

struct PlotOptions {
  std::string title, xlabel, ylabel;
  bool log_log = false;
  double floor = 1e-5;  // log-log clip for both axes
  int width = 640, height = 480;
};

// Standalone SVG: polyline per series, stable palette, legend. Byte-identical
// for identical input.
std::string render_svg(std::span<const PlotSeries> series, const PlotOptions& opts);
void emit_plot(std::span<const PlotSeries> series, const PlotOptions& opts,
               const std::string& path);

}  // namespace fewdp
