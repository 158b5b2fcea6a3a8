#pragma once

#include <string>
#include <vector>

#include "lopt/tensor.hpp"

namespace lopt {

/// Minimal deterministic SVG charts. Non-finite points are skipped; output
/// contains no timestamps.
class SvgPlot {
 public:
  SvgPlot(std::string title, std::string x_label, std::string y_label);

  void set_log_x(bool on) { log_x_ = on; }
  void set_log_y(bool on) { log_y_ = on; }
  void add_line(const std::string& name, const std::vector<double>& x, const std::vector<double>& y,
                const std::string& color = "");
  void add_scatter(const std::string& name, const std::vector<double>& x,
                   const std::vector<double>& y, const std::string& color = "",
                   double radius = 2.5);
  void add_hline(double y, const std::string& color = "#888888");
  void add_vline(double x, const std::string& color = "#888888");
  std::string str() const;

 private:
  struct Series {
    std::string name;
    std::vector<double> x, y;
    std::string color;
    bool scatter = false;
    double radius = 0.0;
  };
  std::string title_, x_label_, y_label_;
  bool log_x_ = false;
  bool log_y_ = false;
  std::vector<Series> series_;
  std::vector<std::pair<double, std::string>> hlines_, vlines_;
};

/// values(i, j) drawn at row i (bottom to top) and column j; non-finite cells
/// are grey. Axis ticks show the first and last coordinate of each axis.
std::string svg_heatmap(const std::string& title, const Mat& values, const std::string& x_label,
                        double x_first, double x_last, const std::string& y_label,
                        double y_first, double y_last);

}  // namespace lopt
