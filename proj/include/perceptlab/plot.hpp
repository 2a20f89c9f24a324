// Copyright 2026 The PerceptLab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Minimal deterministic SVG line plots. Every marker carries the exact
// number strings written to the companion CSV in data-x / data-y attributes.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "perceptlab/error.hpp"
#include "perceptlab/iqa.hpp"
#include "perceptlab/util.hpp"

namespace perceptlab {

struct PlotPoint {
  double x = 0.0;
  double y = 0.0;
  std::string label;  // tooltip
};

struct LinePlot {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<PlotPoint> points;
  /// Categorical tick labels at x = 0, 1, ...; numeric ticks when empty.
  std::vector<std::string> x_categories;
  bool log_x = false;
  std::optional<std::size_t> highlight;
};

namespace detail {

inline std::string fixed2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace detail

/// Y axis spans [0, 1.1 * max y] (or [0, 1] when every y is 0).
inline double plot_y_max(const LinePlot& p) {
  double m = 0.0;
  for (const auto& pt : p.points) m = std::max(m, pt.y);
  return m > 0.0 ? 1.1 * m : 1.0;
}

inline std::string render_svg(const LinePlot& p) {
  if (p.points.empty()) throw ArgumentError("cannot plot an empty series");
  constexpr double W = 640, L = 70, R = 20, T = 40;
  const double B = p.x_categories.empty() ? 60 : 130;
  const double H = 360 + B;
  const double pw = W - L - R;
  const double ph = H - T - B;

  auto tx = [&](double x) { return p.log_x ? std::log10(x) : x; };
  double xmin = tx(p.points.front().x), xmax = xmin;
  for (const auto& pt : p.points) {
    xmin = std::min(xmin, tx(pt.x));
    xmax = std::max(xmax, tx(pt.x));
  }
  if (!p.x_categories.empty()) {
    xmin = 0.0;
    xmax = std::max<double>(1.0, static_cast<double>(p.x_categories.size() - 1));
  }
  if (xmax == xmin) {
    xmin -= 0.5;
    xmax += 0.5;
  }
  const double ymax = plot_y_max(p);
  auto sx = [&](double x) { return L + (tx(x) - xmin) / (xmax - xmin) * pw; };
  auto sy = [&](double y) { return T + ph - y / ymax * ph; };

  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
    << "\" data-y-min=\"0\" data-y-max=\"" << format_number(ymax) << "\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">"
    << detail::xml_escape(p.title) << "</text>\n";
  // Axes.
  s << "<line x1=\"" << L << "\" y1=\"" << T + ph << "\" x2=\"" << L + pw << "\" y2=\"" << T + ph
    << "\" stroke=\"black\"/>\n";
  s << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << T + ph
    << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 5; ++i) {
    const double v = ymax * i / 5.0;
    const std::string y = detail::fixed2(sy(v));
    s << "<line x1=\"" << L - 4 << "\" y1=\"" << y << "\" x2=\"" << L << "\" y2=\"" << y
      << "\" stroke=\"black\"/>";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", v);
    s << "<text x=\"" << L - 8 << "\" y=\"" << y << "\" text-anchor=\"end\" font-size=\"11\" "
      << "dominant-baseline=\"middle\">" << buf << "</text>\n";
  }
  if (!p.x_categories.empty()) {
    for (std::size_t i = 0; i < p.x_categories.size(); ++i) {
      const std::string x = detail::fixed2(sx(static_cast<double>(i)));
      const std::string y = detail::fixed2(T + ph + 10);
      s << "<text x=\"" << x << "\" y=\"" << y << "\" font-size=\"11\" transform=\"rotate(45 "
        << x << ' ' << y << ")\">" << detail::xml_escape(p.x_categories[i]) << "</text>\n";
    }
  } else {
    for (const auto& pt : p.points) {
      s << "<text x=\"" << detail::fixed2(sx(pt.x)) << "\" y=\"" << detail::fixed2(T + ph + 18)
        << "\" text-anchor=\"middle\" font-size=\"11\">" << format_number(pt.x) << "</text>\n";
    }
  }
  s << "<text x=\"" << L + pw / 2 << "\" y=\"" << H - 10 << "\" text-anchor=\"middle\" font-size=\"13\">"
    << detail::xml_escape(p.x_label) << (p.log_x ? " (log scale)" : "") << "</text>\n";
  s << "<text x=\"16\" y=\"" << T + ph / 2 << "\" text-anchor=\"middle\" font-size=\"13\" "
    << "transform=\"rotate(-90 16 " << T + ph / 2 << ")\">" << detail::xml_escape(p.y_label)
    << "</text>\n";

  s << "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"2\" points=\"";
  for (std::size_t i = 0; i < p.points.size(); ++i) {
    s << (i ? " " : "") << detail::fixed2(sx(p.points[i].x)) << ',' << detail::fixed2(sy(p.points[i].y));
  }
  s << "\"/>\n";
  for (std::size_t i = 0; i < p.points.size(); ++i) {
    const auto& pt = p.points[i];
    const bool hl = p.highlight && *p.highlight == i;
    s << "<circle class=\"point\" cx=\"" << detail::fixed2(sx(pt.x)) << "\" cy=\""
      << detail::fixed2(sy(pt.y)) << "\" r=\"" << (hl ? 6 : 4) << "\" fill=\""
      << (hl ? "#d62728" : "#1f77b4") << "\" data-x=\"" << format_number(pt.x) << "\" data-y=\""
      << format_number(pt.y) << "\"><title>" << detail::xml_escape(pt.label) << "</title></circle>\n";
  }
  s << "</svg>\n";
  return s.str();
}

namespace detail {

inline void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

}  // namespace detail

/// CSV written next to a plot: same path with ".csv" extension.
inline fs::path companion_csv(const fs::path& svg) {
  fs::path p = svg;
  p.replace_extension(".csv");
  return p;
}

/// abs_rho per layer in forward order; the peak layer is highlighted.
/// Writes `svg_path` and its companion CSV
/// (layer_index,layer_id,rho,abs_rho,n_pairs).
inline void emit_layer_plot(const CorrelationReport& report, const fs::path& svg_path) {
  if (report.layers.empty()) throw ArgumentError("cannot plot an empty report");
  LinePlot plot;
  plot.title = "Spearman |rho| vs MOS by layer (peak: " + report.peak().layer_id + ")";
  plot.x_label = "layer";
  plot.y_label = "|Spearman rho|";
  std::ostringstream csv;
  csv << "layer_index,layer_id,rho,abs_rho,n_pairs\n";
  for (std::size_t i = 0; i < report.layers.size(); ++i) {
    const auto& l = report.layers[i];
    plot.points.push_back({static_cast<double>(i), l.abs_rho, l.layer_id});
    plot.x_categories.push_back(l.layer_id);
    if (l.layer_id == report.peak().layer_id) plot.highlight = i;
    csv << i << ',' << l.layer_id << ',' << format_number(l.rho) << ',' << format_number(l.abs_rho)
        << ',' << l.n_pairs << '\n';
  }
  detail::write_text(svg_path, render_svg(plot));
  detail::write_text(companion_csv(svg_path), csv.str());
}

/// Parameter curve: (param, abs_rho) pairs. Writes `svg_path` and its
/// companion CSV (param,abs_rho).
inline void emit_param_plot(const std::vector<std::pair<double, double>>& curve,
                            const std::string& param_name, const std::string& title,
                            const fs::path& svg_path) {
  if (curve.empty()) throw ArgumentError("cannot plot an empty sweep");
  LinePlot plot;
  plot.title = title;
  plot.x_label = param_name;
  plot.y_label = "|Spearman rho|";
  bool positive = true;
  double lo = curve.front().first, hi = lo;
  std::ostringstream csv;
  csv << "param,abs_rho\n";
  for (const auto& [x, y] : curve) {
    plot.points.push_back({x, y, param_name + "=" + format_number(x)});
    positive = positive && x > 0.0;
    lo = std::min(lo, x);
    hi = std::max(hi, x);
    csv << format_number(x) << ',' << format_number(y) << '\n';
  }
  plot.log_x = positive && hi / lo >= 20.0;
  detail::write_text(svg_path, render_svg(plot));
  detail::write_text(companion_csv(svg_path), csv.str());
}

}  // namespace perceptlab
