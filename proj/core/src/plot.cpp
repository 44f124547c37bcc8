#include <algorithm>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <set>
#include <string>
#include <vector>

#include "refine/experiment.hpp"
#include "refine/serialize.hpp"

namespace refine {

namespace fs = std::filesystem;

namespace {

void appendf(std::string& out, const char* fmt, ...) {
  char buf[512];
  va_list args;
  va_start(args, fmt);
  std::vsnprintf(buf, sizeof(buf), fmt, args);
  va_end(args);
  out += buf;
}

// Shortest round-trip decimal form, so emitted data is exact and reruns
// are byte-identical.
std::string num(double v) { return nlohmann::json(v).dump(); }

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string quoted = "\"";
  for (char c : s) {
    if (c == '"') quoted += '"';
    quoted += c;
  }
  quoted += '"';
  return quoted;
}

std::string file_slug(const std::string& s) {
  std::string slug;
  for (char c : s) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                    (c >= '0' && c <= '9') || c == '.' || c == '_' || c == '-';
    slug += ok ? c : '-';
  }
  return slug.empty() ? std::string("task") : slug;
}

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

void write_rates_csv(const ResultsFile& results, const fs::path& dir) {
  std::string text = "task,estimator,n,risk_mean,risk_stderr,slope\n";
  for (const auto& rs : results.rates) {
    const std::string slope = rs.has_fit ? num(rs.fit.slope) : std::string{};
    for (const auto& pt : rs.table) {
      text += csv_field(rs.task) + ',' + csv_field(rs.estimator) + ',' +
              std::to_string(pt.n) + ',' + num(pt.risk_mean) + ',' +
              num(pt.risk_stderr) + ',' + slope + '\n';
    }
  }
  write_text_atomic(dir / "rates.csv", text);
}

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c",
                          "#9467bd", "#ff7f0e", "#8c564b"};

constexpr double kLeft = 70.0, kRight = 560.0, kTop = 40.0, kBottom = 430.0;

struct Series {
  std::string label;
  const char* color;
  std::vector<std::pair<double, double>> pts;  // (log10 n, log10 risk)
};

void write_task_svg(const std::string& task,
                    const std::vector<const RateSummary*>& summaries,
                    const fs::path& dir) {
  std::vector<Series> series;
  std::set<long> grid;
  double xmin = 0, xmax = 0, ymin = 0, ymax = 0;
  bool any = false;
  for (const auto* rs : summaries) {
    Series s;
    s.label = rs->estimator;
    if (rs->has_fit) {
      char slope[32];
      std::snprintf(slope, sizeof(slope), " s=%.2f", rs->fit.slope);
      s.label += slope;
    }
    s.color = kPalette[series.size() % (sizeof(kPalette) / sizeof(*kPalette))];
    for (const auto& pt : rs->table) {
      if (!(pt.risk_mean > 0.0)) continue;
      const double lx = std::log10(static_cast<double>(pt.n));
      const double ly = std::log10(pt.risk_mean);
      grid.insert(pt.n);
      if (!any) {
        xmin = xmax = lx;
        ymin = ymax = ly;
        any = true;
      } else {
        xmin = std::min(xmin, lx);
        xmax = std::max(xmax, lx);
        ymin = std::min(ymin, ly);
        ymax = std::max(ymax, ly);
      }
      s.pts.emplace_back(lx, ly);
    }
    series.push_back(std::move(s));
  }

  std::string svg;
  svg +=
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"720\" "
      "height=\"480\" viewBox=\"0 0 720 480\">\n";
  svg += "<rect width=\"720\" height=\"480\" fill=\"white\"/>\n";
  appendf(svg,
          "<text x=\"%.2f\" y=\"24\" font-family=\"sans-serif\" "
          "font-size=\"16\">%s</text>\n",
          kLeft, xml_escape(task).c_str());

  if (!any) {
    appendf(svg,
            "<text x=\"%.2f\" y=\"%.2f\" font-family=\"sans-serif\" "
            "font-size=\"14\" fill=\"#666\">no positive risk values</text>\n",
            kLeft, (kTop + kBottom) / 2);
    svg += "</svg>\n";
    write_text_atomic(dir / ("rates_" + file_slug(task) + ".svg"), svg);
    return;
  }

  if (xmax - xmin < 1e-12) {
    xmin -= 0.5;
    xmax += 0.5;
  }
  if (ymax - ymin < 1e-12) {
    ymin -= 0.5;
    ymax += 0.5;
  }
  const double ypad = 0.05 * (ymax - ymin);
  ymin -= ypad;
  ymax += ypad;
  auto sx = [&](double lx) {
    return kLeft + (lx - xmin) / (xmax - xmin) * (kRight - kLeft);
  };
  auto sy = [&](double ly) {
    return kBottom - (ly - ymin) / (ymax - ymin) * (kBottom - kTop);
  };

  appendf(svg,
          "<rect x=\"%.2f\" y=\"%.2f\" width=\"%.2f\" height=\"%.2f\" "
          "fill=\"none\" stroke=\"#333\"/>\n",
          kLeft, kTop, kRight - kLeft, kBottom - kTop);

  for (long n : grid) {
    const double x = sx(std::log10(static_cast<double>(n)));
    appendf(svg,
            "<line x1=\"%.2f\" y1=\"%.2f\" x2=\"%.2f\" y2=\"%.2f\" "
            "stroke=\"#ccc\"/>\n",
            x, kTop, x, kBottom);
    appendf(svg,
            "<text x=\"%.2f\" y=\"%.2f\" font-family=\"sans-serif\" "
            "font-size=\"11\" text-anchor=\"middle\">%ld</text>\n",
            x, kBottom + 16, n);
  }
  for (int e = static_cast<int>(std::ceil(ymin));
       e <= static_cast<int>(std::floor(ymax)); ++e) {
    const double y = sy(static_cast<double>(e));
    appendf(svg,
            "<line x1=\"%.2f\" y1=\"%.2f\" x2=\"%.2f\" y2=\"%.2f\" "
            "stroke=\"#ccc\"/>\n",
            kLeft, y, kRight, y);
    appendf(svg,
            "<text x=\"%.2f\" y=\"%.2f\" font-family=\"sans-serif\" "
            "font-size=\"11\" text-anchor=\"end\">1e%d</text>\n",
            kLeft - 6, y + 4, e);
  }
  appendf(svg,
          "<text x=\"%.2f\" y=\"%.2f\" font-family=\"sans-serif\" "
          "font-size=\"12\" text-anchor=\"middle\">n (log scale)</text>\n",
          (kLeft + kRight) / 2, kBottom + 36);
  appendf(svg,
          "<text x=\"18\" y=\"%.2f\" font-family=\"sans-serif\" "
          "font-size=\"12\" transform=\"rotate(-90 18 %.2f)\" "
          "text-anchor=\"middle\">risk (log scale)</text>\n",
          (kTop + kBottom) / 2, (kTop + kBottom) / 2);

  double legend_y = kTop + 12;
  for (const auto& s : series) {
    if (s.pts.size() > 1) {
      std::string points;
      for (const auto& [lx, ly] : s.pts)
        appendf(points, "%.2f,%.2f ", sx(lx), sy(ly));
      appendf(svg,
              "<polyline fill=\"none\" stroke=\"%s\" stroke-width=\"1.5\" "
              "points=\"%s\"/>\n",
              s.color, points.c_str());
    }
    for (const auto& [lx, ly] : s.pts)
      appendf(svg,
              "<circle cx=\"%.2f\" cy=\"%.2f\" r=\"3\" fill=\"%s\"/>\n",
              sx(lx), sy(ly), s.color);
    appendf(svg,
            "<line x1=\"%.2f\" y1=\"%.2f\" x2=\"%.2f\" y2=\"%.2f\" "
            "stroke=\"%s\" stroke-width=\"2\"/>\n",
            kRight + 12, legend_y, kRight + 34, legend_y, s.color);
    appendf(svg,
            "<text x=\"%.2f\" y=\"%.2f\" font-family=\"sans-serif\" "
            "font-size=\"11\">%s</text>\n",
            kRight + 40, legend_y + 4, xml_escape(s.label).c_str());
    legend_y += 18;
  }
  svg += "</svg>\n";
  write_text_atomic(dir / ("rates_" + file_slug(task) + ".svg"), svg);
}

void write_rates_svg(const ResultsFile& results, const fs::path& dir) {
  std::vector<std::string> order;
  for (const auto& rs : results.rates)
    if (std::find(order.begin(), order.end(), rs.task) == order.end())
      order.push_back(rs.task);
  for (const auto& task : order) {
    std::vector<const RateSummary*> summaries;
    for (const auto& rs : results.rates)
      if (rs.task == task) summaries.push_back(&rs);
    write_task_svg(task, summaries, dir);
  }
}

}  // namespace

void emit_plot_data(const ResultsFile& results, const std::string& format,
                    const fs::path& dir) {
  if (format != "csv" && format != "svg")
    throw ConfigError("unknown plot format '" + format +
                      "' (expected csv or svg)");
  try {
    fs::create_directories(dir);
    if (format == "csv") {
      write_rates_csv(results, dir);
    } else {
      write_rates_svg(results, dir);
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw IoError(e.what());
  }
}

}  // namespace refine
