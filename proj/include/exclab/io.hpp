#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace exclab {

std::string format_num(double v);  // %.12g, '.' decimal separator

// RFC 4180: CRLF line endings, quoting only where needed.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  void add_row(const std::vector<double>& vals);
};
std::string csv_format(const CsvTable& t);
void write_text(const std::string& path, const std::string& content);
std::string read_text(const std::string& path);  // throws IoError

void write_json(const std::string& path, const nlohmann::json& j);
nlohmann::json read_json(const std::string& path);

uint64_t fnv1a64(const std::string& s);

// Standalone SVG 1.1 line plot, no external assets. log_log switches both
// axes to log10 (nonpositive points are dropped).
struct SvgSeries {
  std::string label;
  std::vector<double> x, y;
};
std::string svg_line_plot(const std::vector<SvgSeries>& series,
                          const std::string& title, const std::string& xlabel,
                          const std::string& ylabel, bool log_log = false);

}  // namespace exclab
