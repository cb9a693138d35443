// Comparison report output: CSV tables, JSON, and static SVG 1.1 plots.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "mstk/statlab.hpp"

namespace mstk {

namespace {

constexpr const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd"};

std::string color(std::size_t i) { return kPalette[i % std::size(kPalette)]; }

std::string fmt(double v, const char* spec = "%.3f") {
  char buf[48];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

std::string num(double v) { return fmt(v, "%.10g"); }

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else if (c == '&') out += "&amp;";
    else out += c;
  }
  return out;
}

// Minimal plot frame: maps data coordinates into a fixed canvas.
struct Frame {
  static constexpr double kWidth = 480, kHeight = 320;
  static constexpr double kLeft = 60, kRight = 20, kTop = 30, kBottom = 40;
  double x0, x1, y0, y1;

  double px(double x) const {
    return kLeft + (x - x0) / (x1 - x0) * (kWidth - kLeft - kRight);
  }
  double py(double y) const {
    return kHeight - kBottom - (y - y0) / (y1 - y0) * (kHeight - kTop - kBottom);
  }

  std::string open(const std::string& title) const {
    std::ostringstream s;
    s << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << kWidth
      << "\" height=\"" << kHeight << "\" viewBox=\"0 0 " << kWidth << " " << kHeight << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << kWidth / 2 << "\" y=\"18\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"13\">" << escape(title) << "</text>\n";
    return s.str();
  }

  std::string axes(bool x_ticks) const {
    std::ostringstream s;
    const double bx = kLeft, by = kHeight - kBottom;
    s << "<line x1=\"" << bx << "\" y1=\"" << by << "\" x2=\"" << kWidth - kRight << "\" y2=\"" << by
      << "\" stroke=\"black\"/>\n";
    s << "<line x1=\"" << bx << "\" y1=\"" << by << "\" x2=\"" << bx << "\" y2=\"" << kTop
      << "\" stroke=\"black\"/>\n";
    for (int k = 0; k <= 4; ++k) {
      const double yv = y0 + (y1 - y0) * k / 4.0;
      s << "<text x=\"" << bx - 4 << "\" y=\"" << fmt(py(yv) + 4)
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">" << fmt(yv, "%.3g")
        << "</text>\n";
      if (!x_ticks) continue;
      const double xv = x0 + (x1 - x0) * k / 4.0;
      s << "<text x=\"" << fmt(px(xv)) << "\" y=\"" << by + 14
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">"
        << fmt(xv, "%.3g") << "</text>\n";
    }
    return s.str();
  }
};

std::string legend(const std::vector<std::string>& sources) {
  std::ostringstream s;
  for (std::size_t i = 0; i < sources.size(); ++i) {
    const double y = 40 + 14 * static_cast<double>(i);
    s << "<rect x=\"" << Frame::kWidth - 130 << "\" y=\"" << y - 9 << "\" width=\"10\" height=\"10\" fill=\""
      << color(i) << "\"/>\n"
      << "<text x=\"" << Frame::kWidth - 115 << "\" y=\"" << y
      << "\" font-family=\"sans-serif\" font-size=\"10\">" << escape(sources[i]) << "</text>\n";
  }
  return s.str();
}

nlohmann::json summary_json(const DistributionSummary& s) {
  nlohmann::json j{{"n", s.n},           {"mean", s.mean},     {"std", s.std},
                   {"min", s.min},       {"q1", s.q1},         {"median", s.median},
                   {"q3", s.q3},         {"iqr", s.iqr},       {"whisker_lo", s.whisker_lo},
                   {"whisker_hi", s.whisker_hi}, {"max", s.max}, {"outliers", s.outliers}};
  j["histogram"] = {{"edges", s.histogram.edges}, {"counts", s.histogram.counts}};
  if (s.kde)
    j["kde"] = {{"bandwidth", s.kde->bandwidth}, {"grid", s.kde->grid}, {"density", s.kde->density}};
  else
    j["kde"] = nullptr;
  return j;
}

}  // namespace

nlohmann::json to_json(const ComparisonReport& report) {
  nlohmann::json j;
  j["schema_version"] = kReportSchemaVersion;
  j["sources"] = report.sources;
  j["warnings"] = report.warnings;
  nlohmann::json metrics = nlohmann::json::array();
  for (const auto& m : report.metrics) {
    nlohmann::json jm;
    jm["metric"] = m.metric;
    nlohmann::json sums = nlohmann::json::object();
    for (const auto& [source, s] : m.summaries) sums[source] = summary_json(s);
    jm["summaries"] = sums;
    nlohmann::json pairs = nlohmann::json::array();
    for (const auto& p : m.pairs)
      pairs.push_back({{"a", p.source_a}, {"b", p.source_b}, {"iqr_overlap", p.iqr_overlap},
                       {"distance", p.distance}});
    jm["pairs"] = pairs;
    metrics.push_back(jm);
  }
  j["metrics"] = metrics;
  return j;
}

std::string render_histogram_svg(const MetricComparison& m, const std::vector<std::string>& sources) {
  // Density-scaled bars so populations of different size overlay, plus KDE.
  const auto& edges = m.shared_edges;
  double ymax = 0;
  std::vector<std::vector<double>> dens(sources.size());
  for (std::size_t i = 0; i < sources.size(); ++i) {
    const auto it = m.summaries.find(sources[i]);
    if (it == m.summaries.end()) continue;
    const auto& h = it->second.histogram;
    for (std::size_t k = 0; k < h.counts.size(); ++k) {
      const double w = h.edges[k + 1] - h.edges[k];
      const double d = static_cast<double>(h.counts[k]) / (static_cast<double>(it->second.n) * w);
      dens[i].push_back(d);
      ymax = std::max(ymax, d);
    }
    if (it->second.kde)
      for (double d : it->second.kde->density) ymax = std::max(ymax, d);
  }
  double xlo = edges.front(), xhi = edges.back();
  for (const auto& [_, s] : m.summaries)
    if (s.kde) {
      xlo = std::min(xlo, s.kde->grid.front());
      xhi = std::max(xhi, s.kde->grid.back());
    }
  if (ymax <= 0) ymax = 1;
  const Frame f{xlo, xhi, 0.0, ymax * 1.05};
  std::ostringstream s;
  s << f.open(m.metric + " distribution") << f.axes(true);
  for (std::size_t i = 0; i < sources.size(); ++i) {
    for (std::size_t k = 0; k < dens[i].size(); ++k) {
      const double x0 = f.px(edges[k]), x1 = f.px(edges[k + 1]);
      const double y = f.py(dens[i][k]);
      s << "<rect x=\"" << fmt(x0) << "\" y=\"" << fmt(y) << "\" width=\"" << fmt(x1 - x0)
        << "\" height=\"" << fmt(f.py(0) - y) << "\" fill=\"" << color(i)
        << "\" fill-opacity=\"0.35\" stroke=\"" << color(i) << "\" stroke-width=\"0.5\"/>\n";
    }
    const auto it = m.summaries.find(sources[i]);
    if (it == m.summaries.end() || !it->second.kde) continue;
    const auto& c = *it->second.kde;
    s << "<path fill=\"none\" stroke=\"" << color(i) << "\" stroke-width=\"1.5\" d=\"";
    for (std::size_t k = 0; k < c.grid.size(); ++k)
      s << (k ? " L" : "M") << fmt(f.px(c.grid[k])) << "," << fmt(f.py(c.density[k]));
    s << "\"/>\n";
  }
  s << legend(sources) << "</svg>\n";
  return s.str();
}

std::string render_boxplot_svg(const MetricComparison& m, const std::vector<std::string>& sources) {
  double lo = INFINITY, hi = -INFINITY;
  for (const auto& [_, s] : m.summaries) {
    lo = std::min({lo, s.min, s.whisker_lo});
    hi = std::max({hi, s.max, s.whisker_hi});
  }
  if (!(hi > lo)) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double pad = 0.05 * (hi - lo);
  const Frame f{0.0, static_cast<double>(sources.size()), lo - pad, hi + pad};
  std::ostringstream s;
  s << f.open(m.metric + " boxplot") << f.axes(false);
  for (std::size_t i = 0; i < sources.size(); ++i) {
    const auto it = m.summaries.find(sources[i]);
    if (it == m.summaries.end()) continue;
    const auto& b = it->second;
    const double cx = f.px(static_cast<double>(i) + 0.5);
    const double half = 0.25 * (f.px(1) - f.px(0));
    const std::string c = color(i);
    const auto hline = [&](double y, double w, const char* extra) {
      s << "<line x1=\"" << fmt(cx - w) << "\" y1=\"" << fmt(f.py(y)) << "\" x2=\"" << fmt(cx + w)
        << "\" y2=\"" << fmt(f.py(y)) << "\" stroke=\"" << c << "\"" << extra << "/>\n";
    };
    s << "<rect x=\"" << fmt(cx - half) << "\" y=\"" << fmt(f.py(b.q3)) << "\" width=\""
      << fmt(2 * half) << "\" height=\"" << fmt(f.py(b.q1) - f.py(b.q3)) << "\" fill=\"" << c
      << "\" fill-opacity=\"0.3\" stroke=\"" << c << "\"/>\n";
    // Whiskers at q1 - 1.5 iqr and q3 + 1.5 iqr, mean solid, median dashed.
    s << "<line x1=\"" << fmt(cx) << "\" y1=\"" << fmt(f.py(b.whisker_lo)) << "\" x2=\"" << fmt(cx)
      << "\" y2=\"" << fmt(f.py(b.q1)) << "\" stroke=\"" << c << "\"/>\n";
    s << "<line x1=\"" << fmt(cx) << "\" y1=\"" << fmt(f.py(b.q3)) << "\" x2=\"" << fmt(cx)
      << "\" y2=\"" << fmt(f.py(b.whisker_hi)) << "\" stroke=\"" << c << "\"/>\n";
    hline(b.whisker_lo, half / 2, "");
    hline(b.whisker_hi, half / 2, "");
    hline(b.mean, half, " stroke-width=\"2\"");
    hline(b.median, half, " stroke-dasharray=\"3,2\"");
    for (double o : b.outliers) {
      const double y = f.py(o);
      s << "<path d=\"M" << fmt(cx) << "," << fmt(y - 4) << " L" << fmt(cx + 4) << "," << fmt(y)
        << " L" << fmt(cx) << "," << fmt(y + 4) << " L" << fmt(cx - 4) << "," << fmt(y)
        << " Z\" fill=\"none\" stroke=\"" << c << "\"/>\n";
    }
    s << "<text x=\"" << fmt(cx) << "\" y=\"" << Frame::kHeight - Frame::kBottom + 14
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">"
      << escape(sources[i]) << "</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

void emit_report(const ComparisonReport& report, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);

  std::ostringstream csv;
  csv << "metric,source,n,mean,std,min,q1,median,q3,iqr,whisker_lo,whisker_hi,max,n_outliers\n";
  for (const auto& m : report.metrics)
    for (const auto& src : report.sources) {
      const auto it = m.summaries.find(src);
      if (it == m.summaries.end()) continue;
      const auto& s = it->second;
      csv << m.metric << ',' << src << ',' << s.n << ',' << num(s.mean) << ',' << num(s.std) << ','
          << num(s.min) << ',' << num(s.q1) << ',' << num(s.median) << ',' << num(s.q3) << ','
          << num(s.iqr) << ',' << num(s.whisker_lo) << ',' << num(s.whisker_hi) << ','
          << num(s.max) << ',' << s.outliers.size() << '\n';
    }
  write_text(out_dir / "summary.csv", csv.str());

  std::ostringstream pairs;
  pairs << "metric,source_a,source_b,iqr_overlap,distance\n";
  for (const auto& m : report.metrics)
    for (const auto& p : m.pairs)
      pairs << m.metric << ',' << p.source_a << ',' << p.source_b << ',' << num(p.iqr_overlap)
            << ',' << num(p.distance) << '\n';
  write_text(out_dir / "pairs.csv", pairs.str());

  // Mean +- std matrix, one row per metric, one column per source.
  std::ostringstream table;
  table << "metric";
  for (const auto& src : report.sources) table << ',' << src;
  table << '\n';
  for (const auto& m : report.metrics) {
    table << m.metric;
    for (const auto& src : report.sources) {
      table << ',';
      const auto it = m.summaries.find(src);
      if (it != m.summaries.end())
        table << fmt(it->second.mean, "%.4g") << " ± " << fmt(it->second.std, "%.2g");
    }
    table << '\n';
  }
  write_text(out_dir / "table.csv", table.str());

  write_text(out_dir / "report.json", to_json(report).dump(2) + "\n");
  for (const auto& m : report.metrics) {
    write_text(out_dir / ("hist_" + m.metric + ".svg"), render_histogram_svg(m, report.sources));
    write_text(out_dir / ("box_" + m.metric + ".svg"), render_boxplot_svg(m, report.sources));
  }
}

}  // namespace mstk
