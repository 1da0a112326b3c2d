#include "fewdp/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace fewdp {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string csv_quote(const std::string& field) {
  if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += "\"\"";
    else out += c;
  }
  out += '"';
  return out;
}

std::string to_csv(const std::vector<std::string>& header,
                   const std::vector<std::vector<std::string>>& rows) {
  std::string out;
  auto emit_row = [&out](const std::vector<std::string>& row) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += ',';
      out += csv_quote(row[i]);
    }
    out += "\r\n";
  };
  emit_row(header);
  for (const auto& r : rows) emit_row(r);
  return out;
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!f) throw std::runtime_error("write failed: " + path);
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
  write_text_file(path, to_csv(header, rows));
}

void write_json(const std::string& path, const nlohmann::json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

namespace {

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                          "#9467bd", "#8c564b", "#17becf", "#7f7f7f"};

std::string fmt2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string fmt_tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

}  // namespace

std::string render_svg(std::span<const PlotSeries> series, const PlotOptions& opts) {
  if (series.empty()) throw std::invalid_argument("render_svg: no series");
  for (const auto& s : series)
    if (s.points.size() < 2)
      throw std::invalid_argument("render_svg: series '" + s.name + "' needs at least 2 points");

  auto tx = [&](double v) { return opts.log_log ? std::log10(std::max(v, opts.floor)) : v; };
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (const auto& s : series)
    for (const auto& [x, y] : s.points) {
      xmin = std::min(xmin, tx(x)); xmax = std::max(xmax, tx(x));
      ymin = std::min(ymin, tx(y)); ymax = std::max(ymax, tx(y));
    }
  if (xmax <= xmin) xmax = xmin + 1.0;
  if (ymax <= ymin) ymax = ymin + 1.0;

  const double ml = 60, mr = 16, mt = 32, mb = 44;
  const double pw = opts.width - ml - mr;
  const double ph = opts.height - mt - mb;
  auto px = [&](double x) { return ml + (tx(x) - xmin) / (xmax - xmin) * pw; };
  auto py = [&](double y) { return mt + ph - (tx(y) - ymin) / (ymax - ymin) * ph; };

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(opts.width) +
         "\" height=\"" + std::to_string(opts.height) + "\">\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg += "<text x=\"" + fmt2(opts.width / 2.0) + "\" y=\"18\" text-anchor=\"middle\" "
         "font-family=\"sans-serif\" font-size=\"14\">" + opts.title + "</text>\n";
  // axes
  svg += "<line x1=\"" + fmt2(ml) + "\" y1=\"" + fmt2(mt + ph) + "\" x2=\"" + fmt2(ml + pw) +
         "\" y2=\"" + fmt2(mt + ph) + "\" stroke=\"black\"/>\n";
  svg += "<line x1=\"" + fmt2(ml) + "\" y1=\"" + fmt2(mt) + "\" x2=\"" + fmt2(ml) + "\" y2=\"" +
         fmt2(mt + ph) + "\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double fx = xmin + (xmax - xmin) * t / 4.0;
    const double fy = ymin + (ymax - ymin) * t / 4.0;
    const double vx = opts.log_log ? std::pow(10.0, fx) : fx;
    const double vy = opts.log_log ? std::pow(10.0, fy) : fy;
    const double sx = ml + pw * t / 4.0;
    const double sy = mt + ph - ph * t / 4.0;
    svg += "<text x=\"" + fmt2(sx) + "\" y=\"" + fmt2(mt + ph + 16) +
           "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">" +
           fmt_tick(vx) + "</text>\n";
    svg += "<text x=\"" + fmt2(ml - 6) + "\" y=\"" + fmt2(sy + 3) +
           "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">" + fmt_tick(vy) +
           "</text>\n";
  }
  svg += "<text x=\"" + fmt2(ml + pw / 2) + "\" y=\"" + fmt2(opts.height - 8.0) +
         "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" + opts.xlabel +
         "</text>\n";
  svg += "<text x=\"14\" y=\"" + fmt2(mt + ph / 2) +
         "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" transform=\"rotate(-90 14 " +
         fmt2(mt + ph / 2) + ")\">" + opts.ylabel + "</text>\n";

  for (std::size_t si = 0; si < series.size(); ++si) {
    const char* color = kPalette[si % 8];
    svg += "<polyline fill=\"none\" stroke=\"" + std::string(color) + "\" stroke-width=\"1.5\" points=\"";
    for (const auto& [x, y] : series[si].points)
      svg += fmt2(px(x)) + "," + fmt2(py(y)) + " ";
    svg += "\"/>\n";
    const double ly = mt + 14.0 + 14.0 * static_cast<double>(si);
    svg += "<line x1=\"" + fmt2(ml + pw - 120) + "\" y1=\"" + fmt2(ly - 3) + "\" x2=\"" +
           fmt2(ml + pw - 100) + "\" y2=\"" + fmt2(ly - 3) + "\" stroke=\"" + color +
           "\" stroke-width=\"1.5\"/>\n";
    svg += "<text x=\"" + fmt2(ml + pw - 96) + "\" y=\"" + fmt2(ly) +
           "\" font-family=\"sans-serif\" font-size=\"10\">" + series[si].name + "</text>\n";
  }
  svg += "</svg>\n";
  return svg;
}

void emit_plot(std::span<const PlotSeries> series, const PlotOptions& opts,
               const std::string& path) {
  write_text_file(path, render_svg(series, opts));
}

}  // namespace fewdp
