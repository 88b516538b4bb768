#include "splitlab/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "splitlab/tensor.hpp"

namespace splitlab {

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string csv_quote(const std::string& field) {
  bool needs = field.find_first_of(",\"\n\r") != std::string::npos;
  if (!needs) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += "\"\"";
    else out += c;
  }
  out += '"';
  return out;
}

namespace {

std::string join_row(const std::vector<std::string>& fields) {
  std::string line;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) line += ',';
    line += csv_quote(fields[i]);
  }
  line += '\n';
  return line;
}

}  // namespace

void write_csv(const std::string& path, const CsvTable& table) {
  std::string out = join_row(table.header);
  for (const auto& row : table.rows) {
    require(row.size() == table.header.size(),
            "csv: row width does not match header: " + path);
    out += join_row(row);
  }
  write_text_file(path, out);
}

CsvTable read_csv(const std::string& path) {
  std::string text = read_text_file(path);
  CsvTable table;
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  bool any_in_record = false;
  std::size_t line_no = 1;
  auto commit = [&] {
    fields.push_back(cur);
    cur.clear();
    if (table.header.empty() && table.rows.empty()) {
      table.header = fields;
    } else {
      require(fields.size() == table.header.size(),
              "csv: ragged row at line " + std::to_string(line_no) + " in " +
                  path);
      table.rows.push_back(fields);
    }
    fields.clear();
    any_in_record = false;
  };
  // Character-level scan: quoted fields may span commas and newlines.
  for (std::size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        if (c == '\n') ++line_no;
        cur += c;
      }
    } else if (c == '"' && cur.empty()) {
      quoted = true;
      any_in_record = true;
    } else if (c == ',') {
      fields.push_back(cur);
      cur.clear();
      any_in_record = true;
    } else if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') {
      // dropped; the '\n' ends the record
    } else if (c == '\n') {
      if (any_in_record || !cur.empty()) commit();
      ++line_no;
    } else {
      cur += c;
      any_in_record = true;
    }
  }
  require(!quoted,
          "csv: unterminated quote on line " + std::to_string(line_no));
  if (any_in_record || !cur.empty()) commit();
  require(!table.header.empty(), "csv: empty file " + path);
  return table;
}

namespace {

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string xml_unescape(const std::string& s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '&') {
      out += s[i];
      continue;
    }
    std::size_t semi = s.find(';', i);
    require(semi != std::string::npos, "svg: bad entity");
    std::string ent = s.substr(i + 1, semi - i - 1);
    if (ent == "amp") out += '&';
    else if (ent == "lt") out += '<';
    else if (ent == "gt") out += '>';
    else if (ent == "quot") out += '"';
    else throw Error("svg: unknown entity &" + ent + ";");
    i = semi;
  }
  return out;
}

// Value of attribute `name="..."` inside an element string.
std::string attr_value(const std::string& elem, const std::string& name) {
  std::string key = name + "=\"";
  std::size_t p = elem.find(key);
  require(p != std::string::npos, "svg: missing attribute " + name);
  p += key.size();
  std::size_t q = elem.find('"', p);
  require(q != std::string::npos, "svg: unterminated attribute " + name);
  return elem.substr(p, q - p);
}

}  // namespace

void write_bar_chart_svg(const std::string& path, const BarChart& chart) {
  require(chart.labels.size() == chart.values.size(),
          "svg: label/value count mismatch");
  std::size_t n = chart.labels.size();
  const double bar_w = 28.0, gap = 14.0, plot_h = 220.0;
  const double left = 50.0, top = 40.0, bottom = 90.0;
  double width = left + 20.0 + static_cast<double>(n) * (bar_w + gap);
  double height = top + plot_h + bottom;
  double vmax = 0.0;
  for (double v : chart.values) vmax = std::max(vmax, std::abs(v));
  if (vmax == 0.0) vmax = 1.0;

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\""
      << format_double(width) << "\" height=\"" << format_double(height)
      << "\">\n";
  out << "  <title>" << xml_escape(chart.title) << "</title>\n";
  out << "  <line x1=\"" << format_double(left) << "\" y1=\""
      << format_double(top + plot_h) << "\" x2=\"" << format_double(width - 10)
      << "\" y2=\"" << format_double(top + plot_h)
      << "\" stroke=\"black\"/>\n";
  for (std::size_t i = 0; i < n; ++i) {
    double v = chart.values[i];
    double h = std::abs(v) / vmax * plot_h;
    double x = left + 10.0 + static_cast<double>(i) * (bar_w + gap);
    double y = top + plot_h - h;
    out << "  <rect x=\"" << format_double(x) << "\" y=\"" << format_double(y)
        << "\" width=\"" << format_double(bar_w) << "\" height=\""
        << format_double(h) << "\" fill=\"#4477aa\" data-label=\""
        << xml_escape(chart.labels[i]) << "\" data-value=\""
        << format_double(v) << "\"/>\n";
    out << "  <text x=\"" << format_double(x + bar_w / 2.0) << "\" y=\""
        << format_double(top + plot_h + 14.0)
        << "\" font-size=\"9\" text-anchor=\"end\" transform=\"rotate(-45 "
        << format_double(x + bar_w / 2.0) << " "
        << format_double(top + plot_h + 14.0) << ")\">"
        << xml_escape(chart.labels[i]) << "</text>\n";
  }
  out << "  <text x=\"" << format_double(left) << "\" y=\"24\" font-size=\"13\">"
      << xml_escape(chart.title) << "</text>\n";
  out << "</svg>\n";
  write_text_file(path, out.str());
}

BarChart read_bar_chart_svg(const std::string& path) {
  std::string body = read_text_file(path);
  require(body.find("<svg") != std::string::npos, "svg: not an svg file: " + path);
  BarChart chart;
  std::size_t t0 = body.find("<title>");
  std::size_t t1 = body.find("</title>");
  require(t0 != std::string::npos && t1 != std::string::npos && t1 > t0,
          "svg: missing title: " + path);
  chart.title = xml_unescape(body.substr(t0 + 7, t1 - t0 - 7));
  std::size_t pos = 0;
  while ((pos = body.find("<rect", pos)) != std::string::npos) {
    std::size_t end = body.find("/>", pos);
    require(end != std::string::npos, "svg: unterminated rect: " + path);
    std::string elem = body.substr(pos, end - pos);
    chart.labels.push_back(xml_unescape(attr_value(elem, "data-label")));
    chart.values.push_back(std::stod(attr_value(elem, "data-value")));
    pos = end;
  }
  return chart;
}

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::uint64_t fnv1a_file(const std::string& path) {
  return fnv1a(read_text_file(path));
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(out.good(), "cannot write " + path);
  out << content;
  require(out.good(), "write failed: " + path);
}

}  // namespace splitlab
