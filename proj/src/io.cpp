#include "exclab/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "exclab/errors.hpp"

namespace exclab {

std::string format_num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

void CsvTable::add_row(const std::vector<double>& vals) {
  std::vector<std::string> r;
  r.reserve(vals.size());
  for (double v : vals) r.push_back(format_num(v));
  rows.push_back(std::move(r));
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

}  // namespace

std::string csv_format(const CsvTable& t) {
  std::string out;
  auto line = [&](const std::vector<std::string>& fields) {
    for (size_t i = 0; i < fields.size(); ++i) {
      if (i) out += ',';
      out += csv_field(fields[i]);
    }
    out += "\r\n";
  };
  line(t.header);
  for (const auto& r : t.rows) line(r);
  return out;
}

void write_text(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open for writing: " + path);
  f.write(content.data(), std::streamsize(content.size()));
  if (!f) throw IoError("write failed: " + path);
}

std::string read_text(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open: " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void write_json(const std::string& path, const nlohmann::json& j) {
  write_text(path, j.dump(2) + "\n");
}

nlohmann::json read_json(const std::string& path) {
  try {
    return nlohmann::json::parse(read_text(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw IoError("bad JSON in " + path + ": " + e.what());
  }
}

uint64_t fnv1a64(const std::string& s) {
  uint64_t h = 0xCBF29CE484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ull;
  }
  return h;
}

std::string svg_line_plot(const std::vector<SvgSeries>& series,
                          const std::string& title, const std::string& xlabel,
                          const std::string& ylabel, bool log_log) {
  const double W = 640, H = 420, ml = 70, mr = 20, mt = 40, mb = 50;
  const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                          "#ff7f0e", "#8c564b"};

  // Collect plotted points (log scale drops nonpositive values).
  auto tx = [&](double v) { return log_log ? std::log10(v) : v; };
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (const auto& s : series)
    for (size_t i = 0; i < s.x.size(); ++i) {
      if (log_log && (s.x[i] <= 0 || s.y[i] <= 0)) continue;
      xmin = std::min(xmin, tx(s.x[i]));
      xmax = std::max(xmax, tx(s.x[i]));
      ymin = std::min(ymin, tx(s.y[i]));
      ymax = std::max(ymax, tx(s.y[i]));
    }
  if (xmin > xmax) { xmin = 0; xmax = 1; }
  if (ymin > ymax) { ymin = 0; ymax = 1; }
  if (xmax == xmin) { xmax += 1; xmin -= 1; }
  if (ymax == ymin) { ymax += 1; ymin -= 1; }
  const double padx = 0.05 * (xmax - xmin), pady = 0.05 * (ymax - ymin);
  xmin -= padx; xmax += padx; ymin -= pady; ymax += pady;

  auto px = [&](double v) {
    return ml + (tx(v) - xmin) / (xmax - xmin) * (W - ml - mr);
  };
  auto py = [&](double v) {
    return H - mb - (tx(v) - ymin) / (ymax - ymin) * (H - mt - mb);
  };

  std::ostringstream svg;
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" "
      << "width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
      << " " << H << "\">\n"
      << "<rect width=\"" << W << "\" height=\"" << H
      << "\" fill=\"white\"/>\n"
      << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" "
      << "font-family=\"sans-serif\" font-size=\"16\">" << title
      << "</text>\n";

  // axes box and tick labels
  svg << "<rect x=\"" << ml << "\" y=\"" << mt << "\" width=\"" << W - ml - mr
      << "\" height=\"" << H - mt - mb
      << "\" fill=\"none\" stroke=\"#444\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double fx = xmin + k * (xmax - xmin) / 4.0;
    const double fy = ymin + k * (ymax - ymin) / 4.0;
    const double gx = ml + k * (W - ml - mr) / 4.0;
    const double gy = H - mb - k * (H - mt - mb) / 4.0;
    svg << "<text x=\"" << gx << "\" y=\"" << H - mb + 18
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
        << "font-size=\"11\">" << format_num(log_log ? std::pow(10, fx) : fx)
        << "</text>\n"
        << "<text x=\"" << ml - 8 << "\" y=\"" << gy + 4
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" "
        << "font-size=\"11\">" << format_num(log_log ? std::pow(10, fy) : fy)
        << "</text>\n";
  }
  svg << "<text x=\"" << W / 2 << "\" y=\"" << H - 12
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
      << "font-size=\"13\">" << xlabel << "</text>\n"
      << "<text x=\"16\" y=\"" << H / 2
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
      << "font-size=\"13\" transform=\"rotate(-90 16 " << H / 2 << ")\">"
      << ylabel << "</text>\n";

  for (size_t si = 0; si < series.size(); ++si) {
    const auto& s = series[si];
    const char* col = colors[si % 6];
    std::ostringstream pts;
    for (size_t i = 0; i < s.x.size(); ++i) {
      if (log_log && (s.x[i] <= 0 || s.y[i] <= 0)) continue;
      pts << px(s.x[i]) << "," << py(s.y[i]) << " ";
    }
    svg << "<polyline fill=\"none\" stroke=\"" << col
        << "\" stroke-width=\"1.5\" points=\"" << pts.str() << "\"/>\n";
    for (size_t i = 0; i < s.x.size(); ++i) {
      if (log_log && (s.x[i] <= 0 || s.y[i] <= 0)) continue;
      svg << "<circle cx=\"" << px(s.x[i]) << "\" cy=\"" << py(s.y[i])
          << "\" r=\"2.5\" fill=\"" << col << "\"/>\n";
    }
    svg << "<text x=\"" << W - mr - 8 << "\" y=\"" << mt + 16 + 14 * double(si)
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" "
        << "font-size=\"12\" fill=\"" << col << "\">" << s.label
        << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace exclab
