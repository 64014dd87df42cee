#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "seal/common.hpp"

namespace seal::plot {

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

inline const char* palette(std::size_t i) {
  static const char* colors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                 "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
  return colors[i % 10];
}

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

inline std::string escape(const std::string& s) {
  std::string o;
  for (char c : s) {
    switch (c) {
      case '<': o += "&lt;"; break;
      case '>': o += "&gt;"; break;
      case '&': o += "&amp;"; break;
      case '"': o += "&quot;"; break;
      default: o += c;
    }
  }
  return o;
}

/// Simple line chart with a legend.
inline std::string line_chart(const std::vector<Series>& series, const std::string& title, const std::string& xlabel,
                              const std::string& ylabel) {
  const double W = 720, H = 440, L = 70, R = 170, T = 40, B = 50;
  double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.y[i])) continue;
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i]);
      y1 = std::max(y1, s.y[i]);
    }
  if (!std::isfinite(x0)) throw InputError("nothing to plot");
  if (x1 == x0) x1 = x0 + 1;
  if (y1 == y0) y1 = y0 + 1;
  y0 = std::min(y0, 0.0);
  auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
  auto py = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << escape(title) << "</text>\n";
  o << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  o << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 5; ++t) {
    const double xv = x0 + (x1 - x0) * t / 5, yv = y0 + (y1 - y0) * t / 5;
    o << "<text x=\"" << px(xv) << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\">" << num(xv) << "</text>\n";
    o << "<text x=\"" << L - 6 << "\" y=\"" << py(yv) + 4 << "\" text-anchor=\"end\">" << num(yv) << "</text>\n";
    o << "<line x1=\"" << L << "\" y1=\"" << py(yv) << "\" x2=\"" << W - R << "\" y2=\"" << py(yv)
      << "\" stroke=\"#ddd\"/>\n";
  }
  o << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">" << escape(xlabel) << "</text>\n";
  o << "<text transform=\"translate(16," << (T + H - B) / 2 << ") rotate(-90)\" text-anchor=\"middle\">" << escape(ylabel)
    << "</text>\n";
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    o << "<polyline fill=\"none\" stroke=\"" << palette(k) << "\" stroke-width=\"1.6\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i)
      if (std::isfinite(s.y[i])) o << px(s.x[i]) << ',' << py(s.y[i]) << ' ';
    o << "\"/>\n";
    if (s.x.size() <= 30)
      for (std::size_t i = 0; i < s.x.size(); ++i)
        if (std::isfinite(s.y[i]))
          o << "<circle cx=\"" << px(s.x[i]) << "\" cy=\"" << py(s.y[i]) << "\" r=\"3\" fill=\"" << palette(k) << "\"/>\n";
    const double ly = T + 10 + 18 * k;
    o << "<rect x=\"" << W - R + 14 << "\" y=\"" << ly - 8 << "\" width=\"12\" height=\"12\" fill=\"" << palette(k) << "\"/>\n";
    o << "<text x=\"" << W - R + 32 << "\" y=\"" << ly + 2 << "\">" << escape(s.name) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

/// One colored cell per step and row, e.g. predicted vs ground-truth sub-goal index.
inline std::string strip_chart(const std::vector<std::pair<std::string, std::vector<int>>>& rows, int k,
                               const std::string& title) {
  std::size_t steps = 0;
  for (const auto& r : rows) steps = std::max(steps, r.second.size());
  if (steps == 0) throw InputError("nothing to plot");
  const double cell = std::clamp(640.0 / steps, 3.0, 18.0), L = 90, T = 40, rh = 26;
  const double W = L + cell * steps + 20 + 130, H = T + rh * rows.size() + 30;
  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << std::max(H, T + 20.0 * k + 20)
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << L << "\" y=\"22\" font-size=\"15\">" << escape(title) << "</text>\n";
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const double y = T + rh * r;
    o << "<text x=\"" << L - 8 << "\" y=\"" << y + rh / 2 + 2 << "\" text-anchor=\"end\">" << escape(rows[r].first)
      << "</text>\n";
    for (std::size_t t = 0; t < rows[r].second.size(); ++t) {
      const int v = rows[r].second[t];
      o << "<rect x=\"" << L + cell * t << "\" y=\"" << y + 3 << "\" width=\"" << cell << "\" height=\"" << rh - 6
        << "\" fill=\"" << (v < 0 ? "#eeeeee" : palette(v)) << "\"/>\n";
    }
    const double end = L + cell * rows[r].second.size();
    o << "<circle cx=\"" << end + 6 << "\" cy=\"" << y + rh / 2 << "\" r=\"4\" fill=\"black\"/>\n";
  }
  const double lx = L + cell * steps + 24;
  for (int i = 0; i < k; ++i)
    o << "<rect x=\"" << lx << "\" y=\"" << T + 20 * i << "\" width=\"12\" height=\"12\" fill=\"" << palette(i)
      << "\"/><text x=\"" << lx + 18 << "\" y=\"" << T + 20 * i + 10 << "\">sub-goal " << i << "</text>\n";
  o << "</svg>\n";
  return o.str();
}

/// Grouped bars with error whiskers.
inline std::string bar_chart(const std::vector<std::string>& groups, const std::vector<std::string>& names,
                             const std::vector<std::vector<double>>& mean, const std::vector<std::vector<double>>& err,
                             const std::string& title, const std::string& ylabel) {
  const double W = 760, H = 420, L = 60, R = 150, T = 40, B = 50;
  const double gw = (W - L - R) / std::max<std::size_t>(1, groups.size());
  const double bw = gw * 0.8 / std::max<std::size_t>(1, names.size());
  auto py = [&](double y) { return H - B - std::clamp(y, 0.0, 1.0) * (H - T - B); };
  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << escape(title) << "</text>\n";
  for (int t = 0; t <= 5; ++t) {
    const double yv = t / 5.0;
    o << "<line x1=\"" << L << "\" y1=\"" << py(yv) << "\" x2=\"" << W - R << "\" y2=\"" << py(yv) << "\" stroke=\"#ddd\"/>\n";
    o << "<text x=\"" << L - 6 << "\" y=\"" << py(yv) + 4 << "\" text-anchor=\"end\">" << num(yv) << "</text>\n";
  }
  o << "<text transform=\"translate(16," << (T + H - B) / 2 << ") rotate(-90)\" text-anchor=\"middle\">" << escape(ylabel)
    << "</text>\n";
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const double gx = L + gw * g + gw * 0.1;
    for (std::size_t s = 0; s < names.size(); ++s) {
      const double m = mean[g][s], e = err[g][s];
      const double x = gx + bw * s;
      o << "<rect x=\"" << x << "\" y=\"" << py(m) << "\" width=\"" << bw * 0.9 << "\" height=\"" << py(0) - py(m)
        << "\" fill=\"" << palette(s) << "\"/>\n";
      o << "<line x1=\"" << x + bw * 0.45 << "\" y1=\"" << py(m - e) << "\" x2=\"" << x + bw * 0.45 << "\" y2=\""
        << py(m + e) << "\" stroke=\"black\"/>\n";
    }
    o << "<text x=\"" << L + gw * (g + 0.5) << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\">" << escape(groups[g])
      << "</text>\n";
  }
  for (std::size_t s = 0; s < names.size(); ++s)
    o << "<rect x=\"" << W - R + 14 << "\" y=\"" << T + 18 * s << "\" width=\"12\" height=\"12\" fill=\"" << palette(s)
      << "\"/><text x=\"" << W - R + 32 << "\" y=\"" << T + 18 * s + 10 << "\">" << escape(names[s]) << "</text>\n";
  o << "</svg>\n";
  return o.str();
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write " + path);
  out << content;
}

}  // namespace seal::plot
