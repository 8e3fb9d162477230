#pragma once

#include <filesystem>
#include <string>

namespace evpower {

/// Renders a numeric CSV (first column = x, remaining columns = series) as
/// a standalone 800x500 SVG line chart with axes and a legend taken from
/// the header row. Output is byte-deterministic for identical input.
std::string render_line_chart_csv(const std::string& csv_text);

void render_csv_file_to_svg(const std::filesystem::path& csv_in,
                            const std::filesystem::path& svg_out);

}  // namespace evpower
