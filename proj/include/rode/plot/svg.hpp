#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "rode/train/metrics.hpp"

namespace rode {

namespace plot {

/// One labeled polyline.
struct Series {
  std::string label;
  std::vector<std::pair<double, double>> points;  // (x, y), x ascending
};

namespace detail {

// Fixed-precision formatting so identical inputs render identical bytes.
inline std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

// Largest of 1/2/5 × 10^k not exceeding the raw spacing, for ~5 axis ticks.
inline double nice_tick(double range) {
  if (range <= 0.0) return 1.0;
  const double raw = range / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  const double frac = raw / mag;
  if (frac >= 5.0) return 5.0 * mag;
  if (frac >= 2.0) return 2.0 * mag;
  return mag;
}

inline const char* palette(std::size_t i) {
  static const char* colors[] = {"#1f6fb2", "#d1495b", "#3a8f5d", "#8a5fb0",
                                 "#c78a2d", "#3aa0a8", "#7a7a7a", "#b04a8f"};
  return colors[i % (sizeof colors / sizeof colors[0])];
}

}  // namespace detail

/// Renders labeled polylines into a self-contained SVG document. Output is a
/// pure function of the inputs: no timestamps, no randomness, fixed number
/// formatting.
inline std::string render_line_chart(const std::string& title, const std::string& x_label,
                                     const std::string& y_label,
                                     const std::vector<Series>& series) {
  const double W = 760, H = 460;
  const double L = 70, R = 160, T = 48, B = 52;  // margins; right holds the legend
  const double plot_w = W - L - R, plot_h = H - T - B;

  double x_min = 0, x_max = 1, y_min = 0, y_max = 1;
  bool any = false;
  for (const Series& s : series)
    for (const auto& [x, y] : s.points) {
      if (!any) {
        x_min = x_max = x;
        y_min = y_max = y;
        any = true;
      }
      x_min = std::min(x_min, x);
      x_max = std::max(x_max, x);
      y_min = std::min(y_min, y);
      y_max = std::max(y_max, y);
    }
  if (x_max <= x_min) x_max = x_min + 1.0;
  if (y_max <= y_min) {
    y_min -= 0.5;
    y_max += 0.5;
  }
  // A little vertical headroom so curves don't hug the frame.
  const double pad = 0.05 * (y_max - y_min);
  y_min -= pad;
  y_max += pad;

  const auto X = [&](double x) { return L + (x - x_min) / (x_max - x_min) * plot_w; };
  const auto Y = [&](double y) { return T + plot_h - (y - y_min) / (y_max - y_min) * plot_h; };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 " << detail::fmt(W) << " "
     << detail::fmt(H) << "\" font-family=\"Helvetica, Arial, sans-serif\">\n";
  os << "<rect width=\"" << detail::fmt(W) << "\" height=\"" << detail::fmt(H)
     << "\" fill=\"#ffffff\"/>\n";
  os << "<text x=\"" << detail::fmt(L) << "\" y=\"26\" font-size=\"16\" fill=\"#222222\">"
     << title << "</text>\n";

  // Grid and ticks.
  const double xt = detail::nice_tick(x_max - x_min);
  const double yt = detail::nice_tick(y_max - y_min);
  os << "<g font-size=\"11\" fill=\"#555555\">\n";
  for (double x = std::ceil(x_min / xt) * xt; x <= x_max + 1e-9 * xt; x += xt) {
    os << "<line x1=\"" << detail::fmt(X(x)) << "\" y1=\"" << detail::fmt(T) << "\" x2=\""
       << detail::fmt(X(x)) << "\" y2=\"" << detail::fmt(T + plot_h)
       << "\" stroke=\"#e6e6e6\"/>\n";
    os << "<text x=\"" << detail::fmt(X(x)) << "\" y=\"" << detail::fmt(T + plot_h + 16)
       << "\" text-anchor=\"middle\">" << detail::fmt(x) << "</text>\n";
  }
  for (double y = std::ceil(y_min / yt) * yt; y <= y_max + 1e-9 * yt; y += yt) {
    os << "<line x1=\"" << detail::fmt(L) << "\" y1=\"" << detail::fmt(Y(y)) << "\" x2=\""
       << detail::fmt(L + plot_w) << "\" y2=\"" << detail::fmt(Y(y))
       << "\" stroke=\"#e6e6e6\"/>\n";
    os << "<text x=\"" << detail::fmt(L - 8) << "\" y=\"" << detail::fmt(Y(y) + 4)
       << "\" text-anchor=\"end\">" << detail::fmt(y) << "</text>\n";
  }
  os << "</g>\n";
  os << "<rect x=\"" << detail::fmt(L) << "\" y=\"" << detail::fmt(T) << "\" width=\""
     << detail::fmt(plot_w) << "\" height=\"" << detail::fmt(plot_h)
     << "\" fill=\"none\" stroke=\"#444444\"/>\n";

  // Axis labels.
  os << "<text x=\"" << detail::fmt(L + plot_w / 2) << "\" y=\"" << detail::fmt(H - 10)
     << "\" font-size=\"12\" fill=\"#333333\" text-anchor=\"middle\">" << x_label
     << "</text>\n";
  os << "<text x=\"18\" y=\"" << detail::fmt(T + plot_h / 2)
     << "\" font-size=\"12\" fill=\"#333333\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
     << detail::fmt(T + plot_h / 2) << ")\">" << y_label << "</text>\n";

  // Curves and legend.
  for (std::size_t i = 0; i < series.size(); ++i) {
    const Series& s = series[i];
    if (!s.points.empty()) {
      os << "<polyline fill=\"none\" stroke=\"" << detail::palette(i)
         << "\" stroke-width=\"1.8\" points=\"";
      for (const auto& [x, y] : s.points)
        os << detail::fmt(X(x)) << "," << detail::fmt(Y(y)) << " ";
      os << "\"/>\n";
      if (s.points.size() == 1) {
        os << "<circle cx=\"" << detail::fmt(X(s.points[0].first)) << "\" cy=\""
           << detail::fmt(Y(s.points[0].second)) << "\" r=\"3\" fill=\"" << detail::palette(i)
           << "\"/>\n";
      }
    }
    const double ly = T + 14 + 18 * static_cast<double>(i);
    os << "<line x1=\"" << detail::fmt(W - R + 12) << "\" y1=\"" << detail::fmt(ly) << "\" x2=\""
       << detail::fmt(W - R + 34) << "\" y2=\"" << detail::fmt(ly) << "\" stroke=\""
       << detail::palette(i) << "\" stroke-width=\"2\"/>\n";
    os << "<text x=\"" << detail::fmt(W - R + 40) << "\" y=\"" << detail::fmt(ly + 4)
       << "\" font-size=\"11\" fill=\"#333333\">" << s.label << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

/// Averages consecutive points so a series stays below `cap` vertices; keeps
/// the drawing light for long runs without changing its shape.
inline Series decimate(Series s, std::size_t cap) {
  if (cap < 2 || s.points.size() <= cap) return s;
  const std::size_t bucket = (s.points.size() + cap - 1) / cap;
  Series out;
  out.label = std::move(s.label);
  for (std::size_t i = 0; i < s.points.size(); i += bucket) {
    double sx = 0, sy = 0;
    const std::size_t end = std::min(i + bucket, s.points.size());
    for (std::size_t j = i; j < end; ++j) {
      sx += s.points[j].first;
      sy += s.points[j].second;
    }
    const double n = static_cast<double>(end - i);
    out.points.emplace_back(sx / n, sy / n);
  }
  return out;
}

}  // namespace plot

/// Files produced by emit_plots, in creation order.
struct PlotOutputs {
  std::vector<std::string> files;
  int skipped_records = 0;
};

/// Renders learning-curve and role-frequency figures plus the matching
/// tabular files from a parsed metrics log. Records without the relevant
/// fields are ignored; an entirely empty log produces no files.
inline PlotOutputs emit_plots(const ParsedMetrics& metrics, const std::string& out_dir) {
  PlotOutputs out;
  out.skipped_records = metrics.skipped;

  // Evaluation points (periodic + final) drive the learning curves.
  plot::Series win{"win rate", {}};
  plot::Series ret{"mean return", {}};
  for (const nlohmann::json& r : metrics.records) {
    if (!r.contains("event")) continue;
    const std::string event = r.at("event").get<std::string>();
    if (event != "eval" && event != "final") continue;
    if (!r.contains("win_rate") || !r.contains("mean_return")) continue;
    const double step = r.at("step").get<double>();
    win.points.emplace_back(step, r.at("win_rate").get<double>());
    ret.points.emplace_back(step, r.at("mean_return").get<double>());
  }

  // Per-role selection frequencies from phase-2 training records.
  std::vector<plot::Series> freq;
  for (const nlohmann::json& r : metrics.records) {
    if (!r.contains("role_freq") || r.contains("event")) continue;
    const auto& rf = r.at("role_freq");
    if (!rf.is_array()) continue;
    if (freq.size() < rf.size())
      for (std::size_t j = freq.size(); j < rf.size(); ++j)
        freq.push_back({"role " + std::to_string(j), {}});
    const double step = r.at("step").get<double>();
    for (std::size_t j = 0; j < rf.size(); ++j)
      freq[j].points.emplace_back(step, rf[j].get<double>());
  }

  const auto write_file = [&](const std::string& name, const std::string& body) {
    const std::string path = out_dir + "/" + name;
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("plot: cannot write " + path);
    f << body;
    out.files.push_back(path);
  };

  if (!ret.points.empty()) {
    write_file("learning_curve.svg",
               plot::render_line_chart("Evaluation learning curve", "environment step",
                                       "mean return", {ret}));
    write_file("win_rate.svg",
               plot::render_line_chart("Evaluation win rate", "environment step", "win rate",
                                       {win}));
    std::ostringstream csv;
    csv << "step,win_rate,mean_return\n";
    for (std::size_t i = 0; i < ret.points.size(); ++i)
      csv << plot::detail::fmt(ret.points[i].first) << ","
          << plot::detail::fmt(win.points[i].second) << ","
          << plot::detail::fmt(ret.points[i].second) << "\n";
    write_file("learning_curve.csv", csv.str());
  }

  if (!freq.empty()) {
    std::ostringstream csv;
    csv << "step";
    for (std::size_t j = 0; j < freq.size(); ++j) csv << ",role_" << j;
    csv << "\n";
    for (std::size_t i = 0; i < freq[0].points.size(); ++i) {
      csv << plot::detail::fmt(freq[0].points[i].first);
      for (const plot::Series& s : freq) csv << "," << plot::detail::fmt(s.points[i].second);
      csv << "\n";
    }
    write_file("role_freq.csv", csv.str());
    std::vector<plot::Series> drawn;
    drawn.reserve(freq.size());
    for (plot::Series& s : freq) drawn.push_back(plot::decimate(std::move(s), 400));
    write_file("role_freq.svg",
               plot::render_line_chart("Role selection frequency (training)",
                                       "environment step", "fraction of decisions", drawn));
  }

  return out;
}

}  // namespace rode
