#include "evpower/svgchart.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

#include "evpower/errors.hpp"

namespace evpower {

namespace {

constexpr int kWidth = 800;
constexpr int kHeight = 500;
constexpr int kMarginLeft = 70;
constexpr int kMarginRight = 160;  // legend space
constexpr int kMarginTop = 30;
constexpr int kMarginBottom = 50;

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                          "#9467bd", "#8c564b", "#17becf", "#7f7f7f"};

std::vector<std::string> split_csv_row(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

std::string fmt(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace

std::string render_line_chart_csv(const std::string& csv_text) {
  std::stringstream in(csv_text);
  std::string line;
  if (!std::getline(in, line)) throw Error(Errc::EmptyFile, "empty CSV input");
  std::erase(line, '\r');
  std::vector<std::string> headers = split_csv_row(line);
  if (headers.size() < 2)
    throw Error(Errc::ParseError, "need an x column plus at least one series column");
  const std::size_t n_series = headers.size() - 1;

  std::vector<double> xs;
  std::vector<std::vector<double>> series(n_series);
  std::size_t row_no = 1;
  while (std::getline(in, line)) {
    ++row_no;
    std::erase(line, '\r');
    if (line.empty()) continue;
    std::vector<std::string> cells = split_csv_row(line);
    if (cells.size() != headers.size())
      throw Error(Errc::ParseError, "row " + std::to_string(row_no) + ": expected " +
                                        std::to_string(headers.size()) + " cells");
    std::vector<double> vals(cells.size());
    for (std::size_t c = 0; c < cells.size(); ++c) {
      char* end = nullptr;
      vals[c] = std::strtod(cells[c].c_str(), &end);
      if (end == cells[c].c_str() || *end != '\0' || !std::isfinite(vals[c]))
        throw Error(Errc::ParseError, "row " + std::to_string(row_no) +
                                          ": non-numeric cell '" + cells[c] + "'");
    }
    xs.push_back(vals[0]);
    for (std::size_t s = 0; s < n_series; ++s) series[s].push_back(vals[s + 1]);
  }
  if (xs.empty()) throw Error(Errc::EmptyFile, "CSV has no data rows");

  double x_lo = *std::min_element(xs.begin(), xs.end());
  double x_hi = *std::max_element(xs.begin(), xs.end());
  double y_lo = series[0][0], y_hi = series[0][0];
  for (const auto& s : series) {
    y_lo = std::min(y_lo, *std::min_element(s.begin(), s.end()));
    y_hi = std::max(y_hi, *std::max_element(s.begin(), s.end()));
  }
  if (x_hi == x_lo) x_hi = x_lo + 1.0;
  if (y_hi == y_lo) y_hi = y_lo + 1.0;

  const double plot_w = kWidth - kMarginLeft - kMarginRight;
  const double plot_h = kHeight - kMarginTop - kMarginBottom;
  auto px = [&](double x) { return kMarginLeft + (x - x_lo) / (x_hi - x_lo) * plot_w; };
  auto py = [&](double y) { return kMarginTop + (1.0 - (y - y_lo) / (y_hi - y_lo)) * plot_h; };

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"800\" height=\"500\" "
         "viewBox=\"0 0 800 500\">\n";
  svg += "<rect x=\"0\" y=\"0\" width=\"800\" height=\"500\" fill=\"white\"/>\n";
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "<rect x=\"%d\" y=\"%d\" width=\"%g\" height=\"%g\" fill=\"none\" "
                "stroke=\"black\"/>\n",
                kMarginLeft, kMarginTop, plot_w, plot_h);
  svg += buf;

  // Axis ticks and labels.
  for (int tick = 0; tick <= 5; ++tick) {
    double fx = x_lo + (x_hi - x_lo) * tick / 5.0;
    double gx = px(fx);
    std::snprintf(buf, sizeof buf,
                  "<line x1=\"%.2f\" y1=\"%g\" x2=\"%.2f\" y2=\"%g\" stroke=\"black\"/>\n",
                  gx, kMarginTop + plot_h, gx, kMarginTop + plot_h + 5.0);
    svg += buf;
    std::snprintf(buf, sizeof buf,
                  "<text x=\"%.2f\" y=\"%g\" font-size=\"12\" text-anchor=\"middle\" "
                  "font-family=\"sans-serif\">%s</text>\n",
                  gx, kMarginTop + plot_h + 20.0, fmt(fx).c_str());
    svg += buf;

    double fy = y_lo + (y_hi - y_lo) * tick / 5.0;
    double gy = py(fy);
    std::snprintf(buf, sizeof buf,
                  "<line x1=\"%g\" y1=\"%.2f\" x2=\"%g\" y2=\"%.2f\" stroke=\"black\"/>\n",
                  static_cast<double>(kMarginLeft) - 5.0, gy,
                  static_cast<double>(kMarginLeft), gy);
    svg += buf;
    std::snprintf(buf, sizeof buf,
                  "<text x=\"%g\" y=\"%.2f\" font-size=\"12\" text-anchor=\"end\" "
                  "font-family=\"sans-serif\">%s</text>\n",
                  static_cast<double>(kMarginLeft) - 8.0, gy + 4.0, fmt(fy).c_str());
    svg += buf;
  }
  // Axis titles from the header row.
  std::snprintf(buf, sizeof buf,
                "<text x=\"%.2f\" y=\"%g\" font-size=\"13\" text-anchor=\"middle\" "
                "font-family=\"sans-serif\">%s</text>\n",
                kMarginLeft + plot_w / 2.0, static_cast<double>(kHeight) - 10.0,
                headers[0].c_str());
  svg += buf;

  for (std::size_t s = 0; s < n_series; ++s) {
    svg += "<polyline fill=\"none\" stroke=\"";
    svg += kPalette[s % (sizeof kPalette / sizeof kPalette[0])];
    svg += "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < xs.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.2f,%.2f ", px(xs[i]), py(series[s][i]));
      svg += buf;
    }
    if (!xs.empty()) svg.pop_back();
    svg += "\"/>\n";
  }

  // Legend.
  for (std::size_t s = 0; s < n_series; ++s) {
    double ly = kMarginTop + 15.0 + 18.0 * static_cast<double>(s);
    std::snprintf(buf, sizeof buf,
                  "<line x1=\"%g\" y1=\"%.2f\" x2=\"%g\" y2=\"%.2f\" stroke=\"%s\" "
                  "stroke-width=\"2\"/>\n",
                  kMarginLeft + plot_w + 10.0, ly, kMarginLeft + plot_w + 34.0, ly,
                  kPalette[s % (sizeof kPalette / sizeof kPalette[0])]);
    svg += buf;
    std::snprintf(buf, sizeof buf,
                  "<text x=\"%g\" y=\"%.2f\" font-size=\"12\" "
                  "font-family=\"sans-serif\">%s</text>\n",
                  kMarginLeft + plot_w + 40.0, ly + 4.0, headers[s + 1].c_str());
    svg += buf;
  }
  svg += "</svg>\n";
  return svg;
}

void render_csv_file_to_svg(const std::filesystem::path& csv_in,
                            const std::filesystem::path& svg_out) {
  std::ifstream in(csv_in);
  if (!in) throw Error(Errc::IoError, "cannot open: " + csv_in.string());
  std::stringstream ss;
  ss << in.rdbuf();
  std::string svg = render_line_chart_csv(ss.str());
  std::ofstream out(svg_out, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IoError, "cannot open for write: " + svg_out.string());
  out << svg;
}

}  // namespace evpower
