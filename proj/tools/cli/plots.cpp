#include <cmath>
#include <functional>

#include "internal.hpp"
#include "lopt/svg.hpp"

namespace lopt::cli {

namespace {

using Renderer = std::function<std::string(const fs::path&, const ParsedCsv&)>;

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

std::string training_log(const fs::path&, const ParsedCsv& csv) {
  SvgPlot p("Meta-training", "meta step", "meta-objective");
  p.set_log_y(true);
  p.add_line("batch meta-objective", csv.numbers("step"), csv.numbers("meta_objective"));
  return p.str();
}

// Columns: step, then <name>_mean / <name>_stderr pairs.
std::string loss_curves(const fs::path&, const ParsedCsv& csv) {
  SvgPlot p("Loss curves (mean over test problems)", "iteration", "loss");
  p.set_log_y(true);
  const auto step = csv.numbers("step");
  for (const auto& col : csv.header) {
    if (!ends_with(col, "_mean")) continue;
    p.add_line(col.substr(0, col.size() - 5), step, csv.numbers(col));
  }
  return p.str();
}

std::string meta_objective(const fs::path&, const ParsedCsv& csv) {
  SvgPlot p("Meta-objective over test problems", "optimizer index", "meta-objective");
  p.set_log_y(true);
  const auto idx = csv.numbers("index");
  const auto mean = csv.numbers("meta_objective");
  const long name_col = csv.column("optimizer");
  for (std::size_t i = 0; i < idx.size(); ++i) {
    p.add_scatter(csv.rows[i][static_cast<std::size_t>(name_col)], {idx[i]}, {mean[i]}, "", 5.0);
  }
  return p.str();
}

// Columns: <x axis>, <y axis>, x_index, y_index, score, log10_score.
std::string tune_heatmap(const fs::path&, const ParsedCsv& csv) {
  const auto xi = csv.numbers("x_index");
  const auto yi = csv.numbers("y_index");
  const auto xv = csv.numbers(csv.header[0]);
  const auto yv = csv.numbers(csv.header[1]);
  const auto z = csv.numbers("log10_score");
  long nx = 0, ny = 0;
  for (std::size_t i = 0; i < xi.size(); ++i) {
    nx = std::max(nx, static_cast<long>(xi[i]) + 1);
    ny = std::max(ny, static_cast<long>(yi[i]) + 1);
  }
  Mat values = Mat::Constant(ny, nx, NAN);
  double x0 = 0, x1 = 0, y0 = 0, y1 = 0;
  for (std::size_t i = 0; i < xi.size(); ++i) {
    const long c = static_cast<long>(xi[i]), r = static_cast<long>(yi[i]);
    values(r, c) = z[i];
    if (c == 0) x0 = xv[i];
    if (c == nx - 1) x1 = xv[i];
    if (r == 0) y0 = yv[i];
    if (r == ny - 1) y1 = yv[i];
  }
  return svg_heatmap("log10 meta-objective", values, csv.header[0], x0, x1, csv.header[1], y0, y1);
}

std::string tune_scan(const fs::path&, const ParsedCsv& csv) {
  SvgPlot p("Tuning scan", csv.header[0], "meta-objective");
  p.set_log_x(true);
  p.set_log_y(true);
  p.add_scatter("samples", csv.numbers(csv.header[0]), csv.numbers("score"));
  return p.str();
}

std::string update_function(const fs::path&, const ParsedCsv& csv) {
  SvgPlot p("Update function", "gradient g", "update w^T F(h, g)");
  const auto g = csv.numbers("g");
  p.add_line("initial state", g, csv.numbers("update_initial"));
  p.add_line("fixed point", g, csv.numbers("update_fixed_point"));
  p.add_hline(0.0);
  p.add_vline(0.0);
  return p.str();
}

std::string eigenvalues(const fs::path&, const ParsedCsv& csv) {
  SvgPlot p("Eigenvalues at the fixed point", "Re", "Im");
  std::vector<double> cx, cy;
  for (int i = 0; i <= 256; ++i) {
    cx.push_back(std::cos(2 * M_PI * i / 256));
    cy.push_back(std::sin(2 * M_PI * i / 256));
  }
  p.add_line("unit circle", cx, cy, "#bbbbbb");
  p.add_scatter("modes", csv.numbers("real"), csv.numbers("imag"));
  return p.str();
}

std::string timescales(const fs::path&, const ParsedCsv& csv) {
  SvgPlot p("Mode timescale vs learning rate", "timescale (iterations)", "|eta|");
  p.set_log_x(true);
  p.set_log_y(true);
  p.add_scatter("modes", csv.numbers("timescale"), csv.numbers("eta_abs"));
  return p.str();
}

std::string reduced_rollout(const fs::path&, const ParsedCsv& csv) {
  SvgPlot p("Reduced-mode rollout", "iteration", "loss");
  p.set_log_y(true);
  const auto k = csv.numbers("step");
  p.add_line("full optimizer", k, csv.numbers("full_loss"));
  p.add_line("selected modes", k, csv.numbers("reduced_loss"));
  return p.str();
}

std::string schedule_projection(const fs::path& dir, const ParsedCsv& csv) {
  SvgPlot p("Autonomous dynamics (top two PCs)", "PC 1", "PC 2");
  p.add_line("zero-input trajectory", csv.numbers("pc1"), csv.numbers("pc2"));
  const fs::path fp = dir / "schedule_fixed_points.csv";
  if (fs::exists(fp)) {
    const auto pts = parse_csv(read_file(fp));
    p.add_scatter("fixed points", pts.numbers("pc1"), pts.numbers("pc2"), "", 4.0);
  }
  return p.str();
}

std::string schedule_lr(const fs::path&, const ParsedCsv& csv) {
  SvgPlot p("Learning-rate schedule", "iteration", "value");
  const auto k = csv.numbers("step");
  p.add_line("effective learning rate", k, csv.numbers("effective_lr"));
  p.add_line("|readout|", k, csv.numbers("readout_magnitude"));
  return p.str();
}

std::string s_curve(const fs::path&, const ParsedCsv& csv) {
  SvgPlot p("Effective learning rate along the fixed-point curve", "input g*", "effective LR");
  const auto g = csv.numbers("g");
  const auto lr = csv.numbers("effective_lr");
  const auto ok = csv.numbers("converged");
  std::vector<double> xs, ys, xf, yf;
  for (std::size_t i = 0; i < g.size(); ++i) {
    (ok[i] != 0.0 ? xs : xf).push_back(g[i]);
    (ok[i] != 0.0 ? ys : yf).push_back(lr[i]);
  }
  p.add_line("converged", xs, ys);
  if (!xf.empty()) p.add_scatter("not converged", xf, yf, "#d62728");
  p.add_vline(0.0);
  return p.str();
}

std::string variance(const fs::path&, const ParsedCsv& csv) {
  SvgPlot p("State variance across problems", "iteration", "variance");
  p.set_log_y(true);
  p.add_line("variance", csv.numbers("step"), csv.numbers("variance"));
  return p.str();
}

std::string grad_hist(const fs::path&, const ParsedCsv& csv) {
  SvgPlot p("Gradient density", "gradient", "mass");
  p.add_line("histogram", csv.numbers("bin_center"), csv.numbers("mass"));
  const auto lo = csv.numbers("lower_threshold");
  const auto hi = csv.numbers("upper_threshold");
  if (!lo.empty() && std::isfinite(lo[0])) p.add_vline(lo[0], "#d62728");
  if (!hi.empty() && std::isfinite(hi[0])) p.add_vline(hi[0], "#d62728");
  return p.str();
}

}  // namespace

namespace {

std::optional<std::string> render_svg(const fs::path& dir, const std::string& stem,
                                      const ParsedCsv& csv) {
  static const std::map<std::string, Renderer> exact{
      {"training_log", training_log},     {"loss_curves", loss_curves},
      {"meta_objective", meta_objective}, {"update_function", update_function},
      {"eigenvalues", eigenvalues},       {"timescales", timescales},
      {"reduced_rollout", reduced_rollout}, {"schedule_projection", schedule_projection},
      {"schedule_lr", schedule_lr},       {"s_curve", s_curve},
      {"variance", variance},             {"grad_hist", grad_hist},
  };
  if (auto it = exact.find(stem); it != exact.end()) return it->second(dir, csv);
  if (ends_with(stem, "_heatmap")) return tune_heatmap(dir, csv);
  if (ends_with(stem, "_scan")) return tune_scan(dir, csv);
  return std::nullopt;
}

}  // namespace

std::optional<std::string> render_plot(const fs::path& dir, const std::string& stem,
                                       const ParsedCsv& csv) {
  auto svg = render_svg(dir, stem, csv);
  if (!svg) return svg;
  // Names the data file the figure was drawn from.
  const auto at = svg->find('>') + 1;
  svg->insert(at, "\n<desc>data=" + stem + ".csv rows=" + std::to_string(csv.rows.size()) + "</desc>");
  return svg;
}

}  // namespace lopt::cli
