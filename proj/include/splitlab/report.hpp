#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace splitlab {

// Doubles render with 17 significant digits so a replayed run can be
// compared byte-for-byte.
std::string format_double(double v);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

std::string csv_quote(const std::string& field);
void write_csv(const std::string& path, const CsvTable& table);
CsvTable read_csv(const std::string& path);

struct BarChart {
  std::string title;
  std::vector<std::string> labels;
  std::vector<double> values;
};

// Bars carry their label/value as data attributes, so the chart is its own
// machine-readable record.
void write_bar_chart_svg(const std::string& path, const BarChart& chart);
BarChart read_bar_chart_svg(const std::string& path);

std::uint64_t fnv1a(const std::string& bytes);
std::uint64_t fnv1a_file(const std::string& path);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

}  // namespace splitlab
