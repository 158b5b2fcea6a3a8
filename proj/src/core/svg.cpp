#include "lopt/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace lopt {
namespace {

constexpr double kWidth = 640, kHeight = 440;
constexpr double kLeft = 70, kRight = 150, kTop = 40, kBottom = 50;
const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                          "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
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
  double lo = INFINITY, hi = -INFINITY;
  void add(double v) {
    if (!std::isfinite(v)) return;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  void finish() {
    if (!(lo <= hi)) lo = 0, hi = 1;
    if (lo == hi) {
      const double pad = lo == 0.0 ? 1.0 : std::abs(lo) * 0.1;
      lo -= pad;
      hi += pad;
    }
  }
};

void header(std::ostringstream& os, const std::string& title) {
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
     << kHeight << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << num(kWidth / 2) << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">"
     << escape(title) << "</text>\n";
}

void axes(std::ostringstream& os, const std::string& xl, const std::string& yl, double x0,
          double x1, double y0, double y1) {
  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  os << "<rect x=\"" << num(kLeft) << "\" y=\"" << num(kTop) << "\" width=\"" << num(pw)
     << "\" height=\"" << num(ph) << "\" fill=\"none\" stroke=\"black\"/>\n";
  const double yb = kTop + ph;
  os << "<text x=\"" << num(kLeft) << "\" y=\"" << num(yb + 15) << "\" text-anchor=\"middle\">"
     << tick(x0) << "</text>\n";
  os << "<text x=\"" << num(kLeft + pw) << "\" y=\"" << num(yb + 15)
     << "\" text-anchor=\"middle\">" << tick(x1) << "</text>\n";
  os << "<text x=\"" << num(kLeft - 5) << "\" y=\"" << num(yb) << "\" text-anchor=\"end\">"
     << tick(y0) << "</text>\n";
  os << "<text x=\"" << num(kLeft - 5) << "\" y=\"" << num(kTop + 8)
     << "\" text-anchor=\"end\">" << tick(y1) << "</text>\n";
  os << "<text x=\"" << num(kLeft + pw / 2) << "\" y=\"" << num(kHeight - 12)
     << "\" text-anchor=\"middle\">" << escape(xl) << "</text>\n";
  os << "<text x=\"15\" y=\"" << num(kTop + ph / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 15 "
     << num(kTop + ph / 2) << ")\">" << escape(yl) << "</text>\n";
}

}  // namespace

SvgPlot::SvgPlot(std::string title, std::string x_label, std::string y_label)
    : title_(std::move(title)), x_label_(std::move(x_label)), y_label_(std::move(y_label)) {}

void SvgPlot::add_line(const std::string& name, const std::vector<double>& x,
                       const std::vector<double>& y, const std::string& color) {
  series_.push_back({name, x, y, color, false, 0.0});
}

void SvgPlot::add_scatter(const std::string& name, const std::vector<double>& x,
                          const std::vector<double>& y, const std::string& color, double radius) {
  series_.push_back({name, x, y, color, true, radius});
}

void SvgPlot::add_hline(double y, const std::string& color) { hlines_.emplace_back(y, color); }
void SvgPlot::add_vline(double x, const std::string& color) { vlines_.emplace_back(x, color); }

std::string SvgPlot::str() const {
  auto tx = [&](double v) { return log_x_ ? (v > 0 ? std::log10(v) : NAN) : v; };
  auto ty = [&](double v) { return log_y_ ? (v > 0 ? std::log10(v) : NAN) : v; };
  Range rx, ry;
  for (const auto& s : series_) {
    const std::size_t n = std::min(s.x.size(), s.y.size());
    for (std::size_t i = 0; i < n; ++i) {
      const double a = tx(s.x[i]), b = ty(s.y[i]);
      if (!std::isfinite(a) || !std::isfinite(b)) continue;
      rx.add(a);
      ry.add(b);
    }
  }
  for (const auto& [v, c] : hlines_) ry.add(ty(v));
  for (const auto& [v, c] : vlines_) rx.add(tx(v));
  rx.finish();
  ry.finish();

  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  auto px = [&](double v) { return kLeft + (tx(v) - rx.lo) / (rx.hi - rx.lo) * pw; };
  auto py = [&](double v) { return kTop + ph - (ty(v) - ry.lo) / (ry.hi - ry.lo) * ph; };

  std::ostringstream os;
  header(os, title_);
  axes(os, log_x_ ? "log10 " + x_label_ : x_label_, log_y_ ? "log10 " + y_label_ : y_label_,
       rx.lo, rx.hi, ry.lo, ry.hi);
  for (const auto& [v, c] : hlines_) {
    if (!std::isfinite(ty(v))) continue;
    os << "<line x1=\"" << num(kLeft) << "\" x2=\"" << num(kLeft + pw) << "\" y1=\"" << num(py(v))
       << "\" y2=\"" << num(py(v)) << "\" stroke=\"" << c << "\" stroke-dasharray=\"4 3\"/>\n";
  }
  for (const auto& [v, c] : vlines_) {
    if (!std::isfinite(tx(v))) continue;
    os << "<line y1=\"" << num(kTop) << "\" y2=\"" << num(kTop + ph) << "\" x1=\"" << num(px(v))
       << "\" x2=\"" << num(px(v)) << "\" stroke=\"" << c << "\" stroke-dasharray=\"4 3\"/>\n";
  }
  for (std::size_t si = 0; si < series_.size(); ++si) {
    const auto& s = series_[si];
    const std::string color = s.color.empty() ? kPalette[si % 10] : s.color;
    const std::size_t n = std::min(s.x.size(), s.y.size());
    if (s.scatter) {
      for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(tx(s.x[i])) || !std::isfinite(ty(s.y[i]))) continue;
        os << "<circle cx=\"" << num(px(s.x[i])) << "\" cy=\"" << num(py(s.y[i])) << "\" r=\""
           << num(s.radius) << "\" fill=\"" << color << "\"/>\n";
      }
    } else {
      // Gaps (non-finite points) split the polyline.
      std::string pts;
      auto flush = [&] {
        if (!pts.empty()) {
          os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\""
             << pts << "\"/>\n";
        }
        pts.clear();
      };
      for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(tx(s.x[i])) || !std::isfinite(ty(s.y[i]))) {
          flush();
          continue;
        }
        if (!pts.empty()) pts += ' ';
        pts += num(px(s.x[i])) + "," + num(py(s.y[i]));
      }
      flush();
    }
    const double ly = kTop + 12 + 16 * static_cast<double>(si);
    os << "<rect x=\"" << num(kWidth - kRight + 10) << "\" y=\"" << num(ly - 8)
       << "\" width=\"10\" height=\"10\" fill=\"" << color << "\"/>\n";
    os << "<text x=\"" << num(kWidth - kRight + 25) << "\" y=\"" << num(ly) << "\">"
       << escape(s.name) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

std::string svg_heatmap(const std::string& title, const Mat& values, const std::string& x_label,
                        double x_first, double x_last, const std::string& y_label,
                        double y_first, double y_last) {
  Range r;
  for (long i = 0; i < values.rows(); ++i)
    for (long j = 0; j < values.cols(); ++j) r.add(values(i, j));
  r.finish();
  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  const double cw = values.cols() > 0 ? pw / values.cols() : pw;
  const double ch = values.rows() > 0 ? ph / values.rows() : ph;

  // Viridis-like ramp between dark blue and yellow.
  auto color = [&](double v) {
    if (!std::isfinite(v)) return std::string("#cccccc");
    const double t = (v - r.lo) / (r.hi - r.lo);
    const int red = static_cast<int>(std::lround(68 + t * (253 - 68)));
    const int green = static_cast<int>(std::lround(1 + t * (231 - 1)));
    const int blue = static_cast<int>(std::lround(84 + t * (37 - 84)));
    char buf[8];
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", red, green, blue);
    return std::string(buf);
  };

  std::ostringstream os;
  header(os, title);
  for (long i = 0; i < values.rows(); ++i) {
    for (long j = 0; j < values.cols(); ++j) {
      os << "<rect x=\"" << num(kLeft + j * cw) << "\" y=\"" << num(kTop + ph - (i + 1) * ch)
         << "\" width=\"" << num(cw) << "\" height=\"" << num(ch) << "\" fill=\""
         << color(values(i, j)) << "\"/>\n";
    }
  }
  axes(os, x_label, y_label, x_first, x_last, y_first, y_last);
  os << "<text x=\"" << num(kWidth - kRight + 10) << "\" y=\"" << num(kTop + 10) << "\">max "
     << tick(r.hi) << "</text>\n";
  os << "<text x=\"" << num(kWidth - kRight + 10) << "\" y=\"" << num(kTop + 26) << "\">min "
     << tick(r.lo) << "</text>\n";
  os << "</svg>\n";
  return os.str();
}

}  // namespace lopt
