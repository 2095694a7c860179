#include "ionflux/cli/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <sstream>

namespace ionflux::cli::svg {

namespace {

constexpr const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                    "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", std::abs(v) < 1e-300 ? 0.0 : v);
  return buf;
}

std::string escape(const std::string& s) {
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

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  void add(double v) {
    if (!std::isfinite(v)) return;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  void finish(bool pad) {
    if (!std::isfinite(lo)) lo = 0.0, hi = 1.0;
    if (hi - lo < 1e-12 * std::max(1.0, std::abs(hi))) {
      hi += 0.5 * std::max(1.0, std::abs(hi));
      lo -= pad ? 0.5 * std::max(1.0, std::abs(lo)) : 0.0;
    } else if (pad) {
      const double m = 0.05 * (hi - lo);
      lo -= m;
      hi += m;
    }
  }
};

// Plot frame: area [left, left + w] x [top, top + h].
struct Frame {
  double left = 70, top = 40, w = 440, h = 300;
  Range x, y;
  double px(double v) const { return left + (v - x.lo) / (x.hi - x.lo) * w; }
  double py(double v) const { return top + h - (v - y.lo) / (y.hi - y.lo) * h; }
};

void header(std::ostringstream& o, double width, double height, const std::string& title) {
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(width) << "\" height=\"" << num(height)
    << "\" viewBox=\"0 0 " << num(width) << ' ' << num(height) << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << num(width / 2) << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << escape(title)
    << "</text>\n";
}

void axes(std::ostringstream& o, const Frame& f, const std::string& x_label, const std::string& y_label) {
  o << "<rect x=\"" << num(f.left) << "\" y=\"" << num(f.top) << "\" width=\"" << num(f.w) << "\" height=\""
    << num(f.h) << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double xv = f.x.lo + (f.x.hi - f.x.lo) * i / 4.0;
    const double yv = f.y.lo + (f.y.hi - f.y.lo) * i / 4.0;
    o << "<text x=\"" << num(f.px(xv)) << "\" y=\"" << num(f.top + f.h + 15) << "\" text-anchor=\"middle\">"
      << tick(xv) << "</text>\n";
    o << "<text x=\"" << num(f.left - 5) << "\" y=\"" << num(f.py(yv) + 4) << "\" text-anchor=\"end\">" << tick(yv)
      << "</text>\n";
  }
  o << "<text x=\"" << num(f.left + f.w / 2) << "\" y=\"" << num(f.top + f.h + 32)
    << "\" text-anchor=\"middle\">" << escape(x_label) << "</text>\n";
  o << "<text x=\"15\" y=\"" << num(f.top + f.h / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 15 "
    << num(f.top + f.h / 2) << ")\">" << escape(y_label) << "</text>\n";
  if (f.y.lo < 0.0 && f.y.hi > 0.0) {
    o << "<line x1=\"" << num(f.left) << "\" y1=\"" << num(f.py(0)) << "\" x2=\"" << num(f.left + f.w)
      << "\" y2=\"" << num(f.py(0)) << "\" stroke=\"#999\" stroke-dasharray=\"3,3\"/>\n";
  }
}

}  // namespace

std::string line_plot(const std::string& title, const std::string& x_label, const std::string& y_label,
                      const std::vector<Series>& series) {
  Frame f;
  for (const auto& s : series) {
    for (double v : s.x) f.x.add(v);
    for (double v : s.y) f.y.add(v);
  }
  f.y.add(0.0);
  f.x.finish(false);
  f.y.finish(true);
  std::ostringstream o;
  header(o, 640, 380, title);
  axes(o, f, x_label, y_label);
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* colour = kPalette[(s.colour >= 0 ? static_cast<std::size_t>(s.colour) : k) % 8];
    o << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"1.5\""
      << (s.dashed ? " stroke-dasharray=\"5,3\"" : "") << " points=\"";
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i)
      o << (i ? " " : "") << num(f.px(s.x[i])) << ',' << num(f.py(s.y[i]));
    o << "\"/>\n";
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i)
      o << "<circle cx=\"" << num(f.px(s.x[i])) << "\" cy=\"" << num(f.py(s.y[i])) << "\" r=\"2.5\" fill=\""
        << colour << "\"/>\n";
    const double ly = f.top + 10 + 16.0 * static_cast<double>(k);
    o << "<line x1=\"525\" y1=\"" << num(ly) << "\" x2=\"545\" y2=\"" << num(ly) << "\" stroke=\"" << colour
      << "\" stroke-width=\"2\"" << (s.dashed ? " stroke-dasharray=\"5,3\"" : "") << "/>\n";
    o << "<text x=\"550\" y=\"" << num(ly + 4) << "\">" << escape(s.label) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

std::string parity_plot(const std::string& title, const std::vector<double>& truth, const std::vector<double>& pred,
                        double band) {
  Frame f;
  f.w = f.h = 360;
  Range r;
  r.add(0.0);
  for (double v : truth) r.add(v);
  for (double v : pred) r.add(v);
  const bool nonnegative = r.lo >= 0.0;
  r.finish(true);
  if (nonnegative) r.lo = 0.0;
  f.x = f.y = r;
  std::ostringstream o;
  header(o, 460, 450, title);
  axes(o, f, "true", "predicted");
  auto line = [&](double slope, const char* dash) {
    // y = slope * x clipped to the square
    const double x1 = std::max(r.lo, r.lo / slope), x2 = std::min(r.hi, r.hi / slope);
    o << "<line x1=\"" << num(f.px(x1)) << "\" y1=\"" << num(f.py(slope * x1)) << "\" x2=\"" << num(f.px(x2))
      << "\" y2=\"" << num(f.py(slope * x2)) << "\" stroke=\"black\"" << dash << "/>\n";
  };
  line(1.0, "");
  line(1.0 + band, " stroke-dasharray=\"4,3\"");
  line(1.0 - band, " stroke-dasharray=\"4,3\"");
  for (std::size_t i = 0; i < truth.size() && i < pred.size(); ++i)
    o << "<circle cx=\"" << num(f.px(truth[i])) << "\" cy=\"" << num(f.py(pred[i]))
      << "\" r=\"2\" fill=\"#1f77b4\" fill-opacity=\"0.5\"/>\n";
  o << "</svg>\n";
  return o.str();
}

std::string bar_chart(const std::string& title, const std::string& y_label, const std::vector<Bar>& bars) {
  Frame f;
  f.w = std::max(300.0, 22.0 * static_cast<double>(bars.size()));
  f.h = 280;
  f.top = 40;
  f.x.lo = 0;
  f.x.hi = 1;
  f.y.add(0.0);
  for (const auto& b : bars) f.y.add(b.value + b.error);
  f.y.finish(false);
  f.y.lo = 0.0;
  std::map<std::string, std::size_t> groups;
  for (const auto& b : bars) groups.emplace(b.group, groups.size());

  std::ostringstream o;
  header(o, f.left + f.w + 110, f.h + 190, title);
  o << "<rect x=\"" << num(f.left) << "\" y=\"" << num(f.top) << "\" width=\"" << num(f.w) << "\" height=\""
    << num(f.h) << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double yv = f.y.hi * i / 4.0;
    o << "<text x=\"" << num(f.left - 5) << "\" y=\"" << num(f.py(yv) + 4) << "\" text-anchor=\"end\">" << tick(yv)
      << "</text>\n";
  }
  o << "<text x=\"15\" y=\"" << num(f.top + f.h / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 15 "
    << num(f.top + f.h / 2) << ")\">" << escape(y_label) << "</text>\n";
  const double slot = f.w / static_cast<double>(std::max<std::size_t>(1, bars.size()));
  for (std::size_t i = 0; i < bars.size(); ++i) {
    const auto& b = bars[i];
    const double x0 = f.left + slot * static_cast<double>(i) + 0.15 * slot;
    const double bw = 0.7 * slot;
    const double y0 = f.py(std::max(0.0, b.value));
    o << "<rect x=\"" << num(x0) << "\" y=\"" << num(y0) << "\" width=\"" << num(bw) << "\" height=\""
      << num(f.top + f.h - y0) << "\" fill=\"" << kPalette[groups[b.group] % 8] << "\"/>\n";
    if (b.error > 0.0) {
      const double xc = x0 + bw / 2;
      o << "<line x1=\"" << num(xc) << "\" y1=\"" << num(f.py(std::max(0.0, b.value - b.error))) << "\" x2=\""
        << num(xc) << "\" y2=\"" << num(f.py(b.value + b.error)) << "\" stroke=\"black\"/>\n";
    }
    const double tx = x0 + bw / 2, ty = f.top + f.h + 8;
    o << "<text x=\"" << num(tx) << "\" y=\"" << num(ty) << "\" text-anchor=\"end\" font-size=\"9\" transform=\"rotate(-60 "
      << num(tx) << ' ' << num(ty) << ")\">" << escape(b.label) << "</text>\n";
  }
  double ly = f.top + 10;
  for (const auto& [name, k] : groups) {
    if (name.empty()) continue;
    o << "<rect x=\"" << num(f.left + f.w + 8) << "\" y=\"" << num(ly - 8) << "\" width=\"10\" height=\"10\" fill=\""
      << kPalette[k % 8] << "\"/>\n";
    o << "<text x=\"" << num(f.left + f.w + 22) << "\" y=\"" << num(ly + 1) << "\">" << escape(name) << "</text>\n";
    ly += 16;
  }
  o << "</svg>\n";
  return o.str();
}

std::string heatmap(const std::string& title, const std::vector<std::string>& labels,
                    const std::vector<double>& values) {
  const std::size_t n = labels.size();
  const double cell = 40, left = 70, top = 50;
  std::ostringstream o;
  header(o, left + cell * static_cast<double>(n) + 80, top + cell * static_cast<double>(n) + 30, title);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double v = std::clamp(values[i * n + j], 0.0, 1.0);
      const int shade = static_cast<int>(std::lround(255.0 * (1.0 - v)));
      char fill[16];
      std::snprintf(fill, sizeof fill, "#%02x%02xff", shade, shade);
      const double x = left + cell * static_cast<double>(j), y = top + cell * static_cast<double>(i);
      o << "<rect x=\"" << num(x) << "\" y=\"" << num(y) << "\" width=\"" << num(cell) << "\" height=\"" << num(cell)
        << "\" fill=\"" << fill << "\" stroke=\"#ccc\"/>\n";
      char text[16];
      std::snprintf(text, sizeof text, "%.2f", values[i * n + j]);
      o << "<text x=\"" << num(x + cell / 2) << "\" y=\"" << num(y + cell / 2 + 4) << "\" text-anchor=\"middle\" font-size=\"9\" fill=\""
        << (v > 0.6 ? "white" : "black") << "\">" << text << "</text>\n";
    }
    o << "<text x=\"" << num(left - 5) << "\" y=\"" << num(top + cell * (static_cast<double>(i) + 0.5) + 4)
      << "\" text-anchor=\"end\">" << escape(labels[i]) << "</text>\n";
    o << "<text x=\"" << num(left + cell * (static_cast<double>(i) + 0.5)) << "\" y=\"" << num(top - 6)
      << "\" text-anchor=\"middle\">" << escape(labels[i]) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

}  // namespace ionflux::cli::svg
