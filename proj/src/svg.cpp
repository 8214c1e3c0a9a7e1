#include "surrogate/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace surrogate {

namespace {

constexpr double kWidth = 640, kHeight = 420;
constexpr double kLeft = 70, kRight = 150, kTop = 40, kBottom = 50;
constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string escape(const std::string& s) {
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

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  void add(double v) {
    if (!std::isfinite(v)) return;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  void finish() {
    if (!std::isfinite(lo)) lo = 0, hi = 1;
    if (hi - lo < 1e-12) lo -= 0.5, hi += 0.5;
    const double pad = 0.05 * (hi - lo);
    lo -= pad;
    hi += pad;
  }
};

}  // namespace

std::string render_svg(const PlotSpec& spec) {
  Range rx, ry;
  for (const auto& s : spec.series) {
    for (double v : s.x) rx.add(v);
    for (double v : s.y) ry.add(v);
    for (double v : s.lo) ry.add(v);
    for (double v : s.hi) ry.add(v);
  }
  if (spec.diagonal) {
    const double lo = std::min(rx.lo, ry.lo), hi = std::max(rx.hi, ry.hi);
    rx.lo = ry.lo = lo;
    rx.hi = ry.hi = hi;
  }
  rx.finish();
  ry.finish();
  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  auto px = [&](double x) { return kLeft + (x - rx.lo) / (rx.hi - rx.lo) * pw; };
  auto py = [&](double y) { return kTop + ph - (y - ry.lo) / (ry.hi - ry.lo) * ph; };

  std::string o;
  o += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(kWidth) + "\" height=\"" + num(kHeight) +
       "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o += "<text x=\"" + num(kWidth / 2) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" + escape(spec.title) +
       "</text>\n";
  o += "<rect x=\"" + num(kLeft) + "\" y=\"" + num(kTop) + "\" width=\"" + num(pw) + "\" height=\"" + num(ph) +
       "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double fx = rx.lo + (rx.hi - rx.lo) * i / 4.0, fy = ry.lo + (ry.hi - ry.lo) * i / 4.0;
    char lx[32], ly[32];
    std::snprintf(lx, sizeof lx, "%.4g", fx);
    std::snprintf(ly, sizeof ly, "%.4g", fy);
    o += "<text x=\"" + num(px(fx)) + "\" y=\"" + num(kTop + ph + 16) + "\" text-anchor=\"middle\">" + lx + "</text>\n";
    o += "<text x=\"" + num(kLeft - 6) + "\" y=\"" + num(py(fy) + 4) + "\" text-anchor=\"end\">" + ly + "</text>\n";
  }
  o += "<text x=\"" + num(kLeft + pw / 2) + "\" y=\"" + num(kHeight - 10) + "\" text-anchor=\"middle\">" +
       escape(spec.x_label) + "</text>\n";
  o += "<text transform=\"translate(16," + num(kTop + ph / 2) + ") rotate(-90)\" text-anchor=\"middle\">" +
       escape(spec.y_label) + "</text>\n";

  if (spec.diagonal) {
    o += "<line x1=\"" + num(px(rx.lo)) + "\" y1=\"" + num(py(rx.lo)) + "\" x2=\"" + num(px(rx.hi)) + "\" y2=\"" +
         num(py(rx.hi)) + "\" stroke=\"gray\" stroke-dasharray=\"4 3\"/>\n";
  }
  if (spec.zero_lines) {
    if (rx.lo < 0 && rx.hi > 0) {
      o += "<line x1=\"" + num(px(0)) + "\" y1=\"" + num(kTop) + "\" x2=\"" + num(px(0)) + "\" y2=\"" +
           num(kTop + ph) + "\" stroke=\"lightgray\"/>\n";
    }
    if (ry.lo < 0 && ry.hi > 0) {
      o += "<line x1=\"" + num(kLeft) + "\" y1=\"" + num(py(0)) + "\" x2=\"" + num(kLeft + pw) + "\" y2=\"" +
           num(py(0)) + "\" stroke=\"lightgray\"/>\n";
    }
  }

  std::size_t k = 0;
  for (const auto& s : spec.series) {
    const std::string color = kPalette[k % std::size(kPalette)];
    const std::size_t n = std::min(s.x.size(), s.y.size());
    if (s.lo.size() == n && s.hi.size() == n && n > 0) {
      std::string pts;
      for (std::size_t i = 0; i < n; ++i) {
        if (std::isfinite(s.x[i]) && std::isfinite(s.hi[i])) pts += num(px(s.x[i])) + "," + num(py(s.hi[i])) + " ";
      }
      for (std::size_t i = n; i-- > 0;) {
        if (std::isfinite(s.x[i]) && std::isfinite(s.lo[i])) pts += num(px(s.x[i])) + "," + num(py(s.lo[i])) + " ";
      }
      if (!pts.empty()) pts.pop_back();
      o += "<polygon points=\"" + pts + "\" fill=\"" + color + "\" fill-opacity=\"0.2\" stroke=\"none\"/>\n";
    }
    if (s.points) {
      for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
        o += "<circle cx=\"" + num(px(s.x[i])) + "\" cy=\"" + num(py(s.y[i])) + "\" r=\"3\" fill=\"" + color + "\"/>\n";
      }
    } else {
      std::string pts;
      for (std::size_t i = 0; i < n; ++i) {
        if (std::isfinite(s.x[i]) && std::isfinite(s.y[i])) pts += num(px(s.x[i])) + "," + num(py(s.y[i])) + " ";
      }
      if (!pts.empty()) pts.pop_back();
      o += "<polyline points=\"" + pts + "\" fill=\"none\" stroke=\"" + color + "\" stroke-width=\"1.5\"/>\n";
    }
    const double ly = kTop + 14 + 16 * static_cast<double>(k);
    o += "<rect x=\"" + num(kWidth - kRight + 10) + "\" y=\"" + num(ly - 9) + "\" width=\"10\" height=\"10\" fill=\"" +
         color + "\"/>\n";
    o += "<text x=\"" + num(kWidth - kRight + 24) + "\" y=\"" + num(ly) + "\">" + escape(s.label) + "</text>\n";
    ++k;
  }
  o += "</svg>\n";
  return o;
}

}  // namespace surrogate
