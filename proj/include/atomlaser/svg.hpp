#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <span>
#include <string>
#include <vector>

// Minimal static SVG charts: line/scatter plots with optional log axes, and
// a 2D density map.

namespace atomlaser::svg {

inline std::string fmt(double v, const char* f = "%.4g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
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

struct Series {
  std::vector<double> x, y;
  std::string color = "#1f77b4";
  std::string label;
  bool dashed = false;
  bool markers = false;
  bool line = true;
};

struct HorizontalBar {
  double y = 0.0;
  std::string color = "#d62728";
  std::string label;
};

class Plot {
 public:
  Plot(std::string title, std::string xlabel, std::string ylabel, bool logx = false, bool logy = false)
      : title_(std::move(title)), xlabel_(std::move(xlabel)), ylabel_(std::move(ylabel)),
        logx_(logx), logy_(logy) {}

  void add(Series s) { series_.push_back(std::move(s)); }
  void add(HorizontalBar b) { bars_.push_back(std::move(b)); }

  std::string render(int width = 640, int height = 440) const {
    const double left = 80, right = 20, top = 40, bottom = 60;
    const double pw = width - left - right, ph = height - top - bottom;
    double x0 = inf(), x1 = -inf(), y0 = inf(), y1 = -inf();
    for (const auto& s : series_)
      for (std::size_t i = 0; i < s.x.size(); ++i) {
        if (!usable(s.x[i], logx_) || !usable(s.y[i], logy_)) continue;
        x0 = std::min(x0, s.x[i]);
        x1 = std::max(x1, s.x[i]);
        y0 = std::min(y0, s.y[i]);
        y1 = std::max(y1, s.y[i]);
      }
    for (const auto& b : bars_)
      if (usable(b.y, logy_)) {
        y0 = std::min(y0, b.y);
        y1 = std::max(y1, b.y);
      }
    if (!(x0 <= x1)) x0 = 1, x1 = 10;
    if (!(y0 <= y1)) y0 = 1, y1 = 10;
    auto [ax0, ax1] = pad(x0, x1, logx_);
    auto [ay0, ay1] = pad(y0, y1, logy_);
    auto map = [](double v, double a, double b, bool lg) {
      return lg ? (std::log10(v) - std::log10(a)) / (std::log10(b) - std::log10(a)) : (v - a) / (b - a);
    };
    auto X = [&](double v) { return left + pw * map(v, ax0, ax1, logx_); };
    auto Y = [&](double v) { return top + ph * (1.0 - map(v, ay0, ay1, logy_)); };

    std::string o = header(width, height);
    o += "<text x=\"" + fmt(width / 2.0) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" +
         escape(title_) + "</text>\n";
    o += "<rect x=\"" + fmt(left) + "\" y=\"" + fmt(top) + "\" width=\"" + fmt(pw) + "\" height=\"" +
         fmt(ph) + "\" fill=\"none\" stroke=\"#000\"/>\n";
    for (double t : ticks(ax0, ax1, logx_)) {
      const double px = X(t);
      o += "<line x1=\"" + fmt(px) + "\" y1=\"" + fmt(top + ph) + "\" x2=\"" + fmt(px) + "\" y2=\"" +
           fmt(top + ph + 5) + "\" stroke=\"#000\"/>\n";
      o += "<text x=\"" + fmt(px) + "\" y=\"" + fmt(top + ph + 20) +
           "\" text-anchor=\"middle\" font-size=\"11\">" + fmt(t, "%.3g") + "</text>\n";
    }
    for (double t : ticks(ay0, ay1, logy_)) {
      const double py = Y(t);
      o += "<line x1=\"" + fmt(left - 5) + "\" y1=\"" + fmt(py) + "\" x2=\"" + fmt(left) + "\" y2=\"" +
           fmt(py) + "\" stroke=\"#000\"/>\n";
      o += "<text x=\"" + fmt(left - 8) + "\" y=\"" + fmt(py + 4) +
           "\" text-anchor=\"end\" font-size=\"11\">" + fmt(t, "%.3g") + "</text>\n";
    }
    o += "<text x=\"" + fmt(left + pw / 2) + "\" y=\"" + fmt(height - 15.0) +
         "\" text-anchor=\"middle\" font-size=\"13\">" + escape(xlabel_) + "</text>\n";
    o += "<text transform=\"translate(18," + fmt(top + ph / 2) +
         ") rotate(-90)\" text-anchor=\"middle\" font-size=\"13\">" + escape(ylabel_) + "</text>\n";

    o += "<g clip-path=\"url(#plotarea)\">\n";
    for (const auto& b : bars_) {
      if (!usable(b.y, logy_)) continue;
      o += "<line x1=\"" + fmt(left) + "\" y1=\"" + fmt(Y(b.y)) + "\" x2=\"" + fmt(left + pw) +
           "\" y2=\"" + fmt(Y(b.y)) + "\" stroke=\"" + b.color + "\" stroke-width=\"2\"/>\n";
    }
    for (const auto& s : series_) {
      std::string pts;
      for (std::size_t i = 0; i < s.x.size(); ++i) {
        if (!usable(s.x[i], logx_) || !usable(s.y[i], logy_)) continue;
        pts += fmt(X(s.x[i])) + "," + fmt(Y(s.y[i])) + " ";
        if (s.markers)
          o += "<circle cx=\"" + fmt(X(s.x[i])) + "\" cy=\"" + fmt(Y(s.y[i])) + "\" r=\"3\" fill=\"" +
               s.color + "\"/>\n";
      }
      if (s.line && !pts.empty())
        o += "<polyline fill=\"none\" stroke=\"" + s.color + "\" stroke-width=\"1.5\"" +
             (s.dashed ? " stroke-dasharray=\"6,4\"" : "") + " points=\"" + pts + "\"/>\n";
    }
    o += "</g>\n";

    double ly = top + 16;
    auto legend = [&](const std::string& label, const std::string& color, bool dashed) {
      if (label.empty()) return;
      o += "<line x1=\"" + fmt(left + pw - 170) + "\" y1=\"" + fmt(ly - 4) + "\" x2=\"" +
           fmt(left + pw - 145) + "\" y2=\"" + fmt(ly - 4) + "\" stroke=\"" + color +
           "\" stroke-width=\"2\"" + (dashed ? " stroke-dasharray=\"6,4\"" : "") + "/>\n";
      o += "<text x=\"" + fmt(left + pw - 140) + "\" y=\"" + fmt(ly) + "\" font-size=\"11\">" +
           escape(label) + "</text>\n";
      ly += 16;
    };
    for (const auto& s : series_) legend(s.label, s.color, s.dashed);
    for (const auto& b : bars_) legend(b.label, b.color, false);
    o += "<defs><clipPath id=\"plotarea\"><rect x=\"" + fmt(left) + "\" y=\"" + fmt(top) +
         "\" width=\"" + fmt(pw) + "\" height=\"" + fmt(ph) + "\"/></clipPath></defs>\n";
    o += "</svg>\n";
    return o;
  }

 private:
  static double inf() { return std::numeric_limits<double>::infinity(); }
  static bool usable(double v, bool lg) { return std::isfinite(v) && (!lg || v > 0.0); }

  static std::pair<double, double> pad(double a, double b, bool lg) {
    if (lg) {
      if (a == b) return {a / 2, b * 2};
      const double f = std::pow(b / a, 0.05);
      return {a / f, b * f};
    }
    if (a == b) return {a - 1, b + 1};
    const double m = 0.05 * (b - a);
    return {a - m, b + m};
  }

  static std::vector<double> ticks(double a, double b, bool lg) {
    std::vector<double> t;
    if (lg) {
      const int e0 = static_cast<int>(std::floor(std::log10(a)));
      const int e1 = static_cast<int>(std::ceil(std::log10(b)));
      const bool sparse = e1 - e0 <= 1;
      for (int e = e0; e <= e1; ++e)
        for (int m : {1, 2, 5}) {
          if (!sparse && m != 1) continue;
          const double v = m * std::pow(10.0, e);
          if (v >= a && v <= b) t.push_back(v);
        }
      return t;
    }
    const double raw = (b - a) / 6.0;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    double step = mag;
    for (double m : {1.0, 2.0, 5.0, 10.0})
      if (m * mag >= raw) {
        step = m * mag;
        break;
      }
    for (double v = std::ceil(a / step) * step; v <= b; v += step) t.push_back(std::abs(v) < 1e-12 * step ? 0.0 : v);
    return t;
  }

  static std::string header(int w, int h) {
    return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(w) + "\" height=\"" +
           std::to_string(h) + "\" viewBox=\"0 0 " + std::to_string(w) + " " + std::to_string(h) +
           "\" font-family=\"sans-serif\">\n<rect width=\"100%\" height=\"100%\" fill=\"#fff\"/>\n";
  }

  std::string title_, xlabel_, ylabel_;
  bool logx_, logy_;
  std::vector<Series> series_;
  std::vector<HorizontalBar> bars_;
};

/// Density map of `values` (row-major, rows along the vertical axis) with an
/// optional circle of radius `ring` centred on the origin.
inline std::string density_map(std::span<const double> values, std::size_t rows, std::size_t cols,
                               double x0, double x1, double y0, double y1, const std::string& title,
                               const std::string& xlabel, const std::string& ylabel, double ring = 0.0) {
  const int width = 560, height = 560;
  const double left = 70, top = 40, pw = 460, ph = 460;
  const std::size_t max_cells = 160;
  const std::size_t br = std::max<std::size_t>(1, (rows + max_cells - 1) / max_cells);
  const std::size_t bc = std::max<std::size_t>(1, (cols + max_cells - 1) / max_cells);
  const std::size_t nr = rows / br, nc = cols / bc;
  std::vector<double> cell(nr * nc, 0.0);
  double peak = 0.0;
  for (std::size_t r = 0; r < nr * br; ++r)
    for (std::size_t c = 0; c < nc * bc; ++c) {
      auto& v = cell[(r / br) * nc + c / bc];
      v = std::max(v, values[r * cols + c]);
      peak = std::max(peak, v);
    }
  std::string o = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(width) +
                  "\" height=\"" + std::to_string(height + 30) + "\" font-family=\"sans-serif\">\n";
  o += "<rect width=\"100%\" height=\"100%\" fill=\"#fff\"/>\n";
  o += "<text x=\"" + fmt(width / 2.0) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" +
       escape(title) + "</text>\n";
  const double cw = pw / static_cast<double>(nc), chh = ph / static_cast<double>(nr);
  for (std::size_t r = 0; r < nr; ++r)
    for (std::size_t c = 0; c < nc; ++c) {
      const double v = peak > 0.0 ? std::clamp(cell[r * nc + c] / peak, 0.0, 1.0) : 0.0;
      const int shade = static_cast<int>(255.0 * (1.0 - std::sqrt(v)));
      char col[16];
      std::snprintf(col, sizeof col, "#%02x%02x%02x", shade, shade, 255);
      o += "<rect x=\"" + fmt(left + cw * static_cast<double>(c)) + "\" y=\"" +
           fmt(top + ph - chh * static_cast<double>(r + 1)) + "\" width=\"" + fmt(cw + 0.3) +
           "\" height=\"" + fmt(chh + 0.3) + "\" fill=\"" + col + "\"/>\n";
    }
  o += "<rect x=\"" + fmt(left) + "\" y=\"" + fmt(top) + "\" width=\"" + fmt(pw) + "\" height=\"" +
       fmt(ph) + "\" fill=\"none\" stroke=\"#000\"/>\n";
  if (ring > 0.0) {
    const double cx = left + pw * (0.0 - x0) / (x1 - x0);
    const double cy = top + ph * (1.0 - (0.0 - y0) / (y1 - y0));
    o += "<ellipse cx=\"" + fmt(cx) + "\" cy=\"" + fmt(cy) + "\" rx=\"" + fmt(pw * ring / (x1 - x0)) +
         "\" ry=\"" + fmt(ph * ring / (y1 - y0)) +
         "\" fill=\"none\" stroke=\"#d62728\" stroke-dasharray=\"5,4\"/>\n";
  }
  o += "<text x=\"" + fmt(left) + "\" y=\"" + fmt(top + ph + 18) + "\" font-size=\"11\">" + fmt(x0, "%.3g") +
       "</text><text x=\"" + fmt(left + pw) + "\" y=\"" + fmt(top + ph + 18) +
       "\" text-anchor=\"end\" font-size=\"11\">" + fmt(x1, "%.3g") + "</text>\n";
  o += "<text x=\"" + fmt(left - 6) + "\" y=\"" + fmt(top + ph) + "\" text-anchor=\"end\" font-size=\"11\">" +
       fmt(y0, "%.3g") + "</text><text x=\"" + fmt(left - 6) + "\" y=\"" + fmt(top + 10) +
       "\" text-anchor=\"end\" font-size=\"11\">" + fmt(y1, "%.3g") + "</text>\n";
  o += "<text x=\"" + fmt(left + pw / 2) + "\" y=\"" + fmt(top + ph + 36) +
       "\" text-anchor=\"middle\" font-size=\"13\">" + escape(xlabel) + "</text>\n";
  o += "<text transform=\"translate(18," + fmt(top + ph / 2) +
       ") rotate(-90)\" text-anchor=\"middle\" font-size=\"13\">" + escape(ylabel) + "</text>\n";
  o += "</svg>\n";
  return o;
}

}  // namespace atomlaser::svg
