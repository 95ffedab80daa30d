// SPDX-License-Identifier: Apache-2.0
#include "experiments/svg.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

namespace truthlens::experiments::svg {
namespace {

constexpr const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string escape(const std::string& s) {
  std::string out;
  for (const char c : s) {
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

std::string header(int w, int h) {
  return fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" viewBox=\"0 0 {0} {1}\" "
      "font-family=\"sans-serif\" font-size=\"11\">\n<rect width=\"{0}\" height=\"{1}\" fill=\"white\"/>\n",
      w, h);
}

struct Range {
  double lo, hi;
  double map(double v, double a, double b) const { return hi > lo ? a + (v - lo) / (hi - lo) * (b - a) : (a + b) / 2; }
};

Range fit(const std::vector<double>& v) {
  Range r{0.0, 1.0};
  bool first = true;
  for (const double x : v) {
    if (!std::isfinite(x)) continue;
    if (first) {
      r = {x, x};
      first = false;
    }
    r.lo = std::min(r.lo, x);
    r.hi = std::max(r.hi, x);
  }
  if (r.hi == r.lo) {
    r.lo -= 0.5;
    r.hi += 0.5;
  }
  return r;
}

std::string color_scale(double v, bool diverging) {
  v = std::clamp(v, diverging ? -1.0 : 0.0, 1.0);
  int r, g, b;
  if (diverging && v < 0) {
    const double t = -v;
    r = 255;
    g = static_cast<int>(255 - t * 180);
    b = static_cast<int>(255 - t * 200);
  } else {
    r = static_cast<int>(255 - v * 225);
    g = static_cast<int>(255 - v * 175);
    b = static_cast<int>(255 - v * 80);
  }
  return fmt::format("#{:02x}{:02x}{:02x}", r, g, b);
}

}  // namespace

std::string line_plot(const Axes& axes, const std::vector<Series>& series) {
  const int w = 640, h = 400, left = 60, right = 160, top = 40, bottom = 50;
  std::vector<double> xs, ys;
  for (const auto& s : series) {
    xs.insert(xs.end(), s.x.begin(), s.x.end());
    ys.insert(ys.end(), s.y.begin(), s.y.end());
  }
  const Range rx = fit(xs);
  const Range ry = axes.y_lo < axes.y_hi ? Range{axes.y_lo, axes.y_hi} : fit(ys);
  const double x0 = left, x1 = w - right, y0 = h - bottom, y1 = top;

  std::string out = header(w, h);
  out += fmt::format("<text x=\"{}\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n", w / 2,
                     escape(axes.title));
  out += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n", x0, y1,
                     x1 - x0, y0 - y1);
  for (int k = 0; k <= 4; ++k) {
    const double v = ry.lo + (ry.hi - ry.lo) * k / 4.0;
    const double y = ry.map(v, y0, y1);
    out += fmt::format("<line x1=\"{:.2f}\" y1=\"{:.2f}\" x2=\"{:.2f}\" y2=\"{:.2f}\" stroke=\"#ddd\"/>\n", x0, y, x1, y);
    out += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" text-anchor=\"end\">{:.2f}</text>\n", x0 - 4, y + 4, v);
    const double xv = rx.lo + (rx.hi - rx.lo) * k / 4.0;
    const double x = rx.map(xv, x0, x1);
    out += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" text-anchor=\"middle\">{:.4g}</text>\n", x, y0 + 16, xv);
  }
  out += fmt::format("<text x=\"{:.2f}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n", (x0 + x1) / 2, h - 10,
                     escape(axes.x_label));
  out += fmt::format(
      "<text x=\"15\" y=\"{:.2f}\" text-anchor=\"middle\" transform=\"rotate(-90 15 {:.2f})\">{}</text>\n",
      (y0 + y1) / 2, (y0 + y1) / 2, escape(axes.y_label));
  for (size_t i = 0; i < series.size(); ++i) {
    const auto& s = series[i];
    const char* color = kPalette[i % std::size(kPalette)];
    std::string points;
    for (size_t k = 0; k < s.x.size() && k < s.y.size(); ++k) {
      if (!std::isfinite(s.y[k])) continue;
      points += fmt::format("{:.2f},{:.2f} ", rx.map(s.x[k], x0, x1), ry.map(std::clamp(s.y[k], ry.lo, ry.hi), y0, y1));
    }
    out += fmt::format("<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"2\"{} points=\"{}\"/>\n", color,
                       s.dashed ? " stroke-dasharray=\"6,3\"" : "", points);
    const double ly = top + 14.0 * static_cast<double>(i) + 6;
    out += fmt::format("<line x1=\"{:.2f}\" y1=\"{:.2f}\" x2=\"{:.2f}\" y2=\"{:.2f}\" stroke=\"{}\" stroke-width=\"2\"/>\n",
                       x1 + 10, ly, x1 + 30, ly, color);
    out += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\">{}</text>\n", x1 + 34, ly + 4, escape(s.name));
  }
  out += "</svg>\n";
  return out;
}

std::string heatmap(const std::string& title, const metrics::EvalMatrix& m) {
  const int cell = 44, left = 90, top = 50;
  const int w = left + cell * static_cast<int>(m.cols()) + 20;
  const int h = top + cell * static_cast<int>(m.rows()) + 30;
  const bool diverging = m.kind == metrics::MatrixKind::kCosine;
  std::string out = header(w, h);
  out += fmt::format("<text x=\"{}\" y=\"18\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n", w / 2,
                     escape(title));
  for (size_t c = 0; c < m.cols(); ++c)
    out += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n", left + cell * int(c) + cell / 2,
                       top - 6, escape(m.col_labels[c]));
  for (size_t r = 0; r < m.rows(); ++r) {
    const int y = top + cell * static_cast<int>(r);
    out += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>\n", left - 6, y + cell / 2 + 4,
                       escape(m.row_labels[r]));
    for (size_t c = 0; c < m.cols(); ++c) {
      const int x = left + cell * static_cast<int>(c);
      const double v = m.at(r, c);
      out += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{}\" stroke=\"white\"/>\n", x, y,
                         cell, cell, color_scale(v, diverging));
      const bool dark = diverging ? std::abs(v) > 0.6 : v > 0.6;
      out += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" fill=\"{}\">{:.2f}</text>\n", x + cell / 2,
                         y + cell / 2 + 4, dark ? "white" : "black", v);
    }
  }
  out += "</svg>\n";
  return out;
}

std::string scatter_grid(const std::string& title, const std::vector<ScatterPanel>& panels) {
  const int pw = 260, ph = 240, cols = std::max(1, std::min(3, static_cast<int>(panels.size())));
  const int rows = std::max(1, (static_cast<int>(panels.size()) + cols - 1) / cols);
  const int w = pw * cols, h = ph * rows + 30;
  std::string out = header(w, h);
  out += fmt::format("<text x=\"{}\" y=\"18\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n", w / 2,
                     escape(title));
  for (size_t i = 0; i < panels.size(); ++i) {
    const auto& p = panels[i];
    const double ox = pw * static_cast<double>(i % cols), oy = 30 + ph * static_cast<double>(i / cols);
    const double x0 = ox + 30, x1 = ox + pw - 10, y0 = oy + ph - 25, y1 = oy + 20;
    out += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" text-anchor=\"middle\">{}</text>\n", (x0 + x1) / 2, oy + 12,
                       escape(p.title));
    out += fmt::format("<rect x=\"{:.2f}\" y=\"{:.2f}\" width=\"{:.2f}\" height=\"{:.2f}\" fill=\"none\" stroke=\"black\"/>\n",
                       x0, y1, x1 - x0, y0 - y1);
    const Range rx = fit(p.x), ry = fit(p.y);
    for (size_t k = 0; k < p.x.size(); ++k)
      out += fmt::format("<circle cx=\"{:.2f}\" cy=\"{:.2f}\" r=\"1.8\" fill=\"{}\" fill-opacity=\"0.6\"/>\n",
                         rx.map(p.x[k], x0, x1), ry.map(p.y[k], y0, y1), p.labels[k] ? "#1f77b4" : "#d62728");
  }
  out += "</svg>\n";
  return out;
}

}  // namespace truthlens::experiments::svg
