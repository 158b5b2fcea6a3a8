#include <algorithm>
#include <cmath>
#include <numeric>

#include "lopt/analysis.hpp"
#include "lopt/error.hpp"

namespace lopt {

// --------------------------------------------------------- update function

UpdateCurve update_function(const StateDynamics& dyn, const Vec& h, const Vec& grid) {
  if (h.size() != dyn.state_dim()) throw DimensionError("update_function: state has the wrong dimension");
  for (long j = 0; j < grid.size(); ++j) {
    if (!std::isfinite(grid(j))) throw ConfigError("update_function: grid must be finite");
    if (j > 0 && !(grid(j) > grid(j - 1))) {
      throw ConfigError("update_function: grid must be strictly increasing");
    }
  }
  UpdateCurve c;
  c.state = h;
  c.gradients = grid;
  c.updates.resize(grid.size());
  const Vec& w = dyn.readout();
  for (long j = 0; j < grid.size(); ++j) c.updates(j) = w.dot(dyn.step(h, grid(j)));
  c.slope_at_zero = -effective_lr(dyn, h);
  return c;
}

double effective_lr(const StateDynamics& dyn, const Vec& h) {
  return -dyn.readout().dot(dyn.input_jacobian(h, 0.0));
}

SaturationThresholds saturation_thresholds(const UpdateCurve& curve, double fraction) {
  SaturationThresholds t;
  const Vec& g = curve.gradients;
  const Vec& u = curve.updates;
  const double limit = fraction * std::abs(curve.slope_at_zero);
  if (limit == 0.0) return t;
  auto slope = [&](long j) { return (u(j + 1) - u(j)) / (g(j + 1) - g(j)); };
  for (long j = 0; j + 1 < g.size(); ++j) {
    if (g(j) < 0.0) continue;
    if (std::abs(slope(j)) < limit) {
      t.positive = g(j);
      break;
    }
  }
  for (long j = g.size() - 2; j >= 0; --j) {
    if (g(j + 1) > 0.0) continue;
    if (std::abs(slope(j)) < limit) {
      t.negative = g(j + 1);
      break;
    }
  }
  return t;
}

double linear_fit_r2(const UpdateCurve& curve, double half_width) {
  std::vector<double> xs, ys;
  for (long j = 0; j < curve.gradients.size(); ++j) {
    if (std::abs(curve.gradients(j)) <= half_width) {
      xs.push_back(curve.gradients(j));
      ys.push_back(curve.updates(j));
    }
  }
  const std::size_t n = xs.size();
  if (n < 2) return NAN;
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  if (sxx == 0.0) return NAN;
  const double slope = sxy / sxx;
  double ss_res = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = ys[i] - (my + slope * (xs[i] - mx));
    ss_res += r * r;
  }
  if (syy == 0.0) return ss_res == 0.0 ? 1.0 : NAN;
  return 1.0 - ss_res / syy;
}

// --------------------------------------------------------------- schedules

AutonomousTrace autonomous_rollout(const StateDynamics& dyn, long steps) {
  if (steps < 1) throw ConfigError("autonomous_rollout: steps must be >= 1");
  AutonomousTrace t;
  Vec h = dyn.initial_state();
  t.states.push_back(h);
  t.effective_lr.push_back(effective_lr(dyn, h));
  for (long k = 0; k < steps; ++k) {
    h = dyn.step(h, 0.0);
    t.states.push_back(h);
    t.effective_lr.push_back(effective_lr(dyn, h));
    t.readout_magnitude.push_back(std::abs(dyn.readout().dot(h)));
  }
  return t;
}

namespace {

double angle_to(const Vec& b, const Vec& w) {
  const double wn = w.norm();
  if (wn == 0.0) return M_PI / 2.0;
  const Vec unit = w / wn;
  const double along = std::abs(b.dot(unit));
  const double across = (b - b.dot(unit) * unit).norm();
  return std::atan2(across, along);
}

}  // namespace

ScheduleSubspace schedule_subspace(const AutonomousTrace& trace, const Vec& readout,
                                   const std::vector<FixedPointRecord>& slow_points) {
  const long rows = static_cast<long>(trace.states.size());
  if (rows < 3) throw DimensionError("schedule_subspace: trace needs at least 3 states");
  const long n = trace.states.front().size();
  if (readout.size() != n) throw DimensionError("schedule_subspace: readout has the wrong dimension");
  Mat data(rows, n);
  for (long k = 0; k < rows; ++k) data.row(k) = trace.states[k].transpose();
  const int k = static_cast<int>(std::min<long>(2, n));

  ScheduleSubspace s;
  const Vec mean = data.colwise().mean().transpose();
  const Mat centered = data.rowwise() - mean.transpose();
  s.total_variance = centered.squaredNorm() / rows;
  const double scale = std::max(1.0, mean.squaredNorm());
  if (s.total_variance <= 1e-30 * scale) {
    s.degenerate = true;
    s.basis = Mat::Identity(n, k);
    s.explained_variance = Vec::Zero(k);
  } else {
    const PrincipalComponents pc = pca(data, k);
    s.basis = pc.components;
    s.explained_variance = pc.explained_variance;
    s.total_variance = pc.total_variance;
  }
  s.projected = centered * s.basis;
  for (long j = 0; j < k; ++j) s.angle_to_readout.push_back(angle_to(s.basis.col(j), readout));
  s.slow_points.resize(static_cast<long>(slow_points.size()), k);
  for (std::size_t i = 0; i < slow_points.size(); ++i) {
    s.slow_points.row(static_cast<long>(i)) =
        ((slow_points[i].state - mean).transpose() * s.basis);
  }
  return s;
}

// ----------------------------------------------------------------- S-curve

namespace {

constexpr int kMaxHalvings = 12;

// Walks from (g_from, h_from) to g_to through accepted fixed points, halving
// the input increment after each failure.
bool continue_to(const StateDynamics& dyn, double& g_from, Vec& h_from, double g_to,
                 const FixedPointOptions& options, FixedPointRecord& out) {
  const double span = std::abs(g_to - g_from);
  double step = g_to - g_from;
  while (true) {
    const double g_try = (std::abs(g_to - g_from) <= std::abs(step)) ? g_to : g_from + step;
    FixedPointRecord rec = minimize_residual(dyn, g_try, h_from, options);
    if (rec.classification == FixedPointClass::kFixed) {
      g_from = g_try;
      h_from = rec.state;
      if (g_try == g_to) {
        out = std::move(rec);
        return true;
      }
      step = g_to - g_from;
    } else {
      out = std::move(rec);
      step *= 0.5;
      if (std::abs(step) < span * std::ldexp(1.0, -kMaxHalvings)) return false;
    }
  }
}

void run_arm(const StateDynamics& dyn, std::vector<double> gs, const FixedPointRecord& zero,
             const FixedPointOptions& options, std::vector<SCurveEntry>& arm) {
  std::stable_sort(gs.begin(), gs.end(),
                   [](double a, double b) { return std::abs(a) < std::abs(b); });
  double g_from = zero.input;
  Vec h_from = zero.state;
  for (double g : gs) {
    SCurveEntry e;
    e.g = g;
    e.converged = continue_to(dyn, g_from, h_from, g, options, e.record);
    e.effective_lr = e.converged ? effective_lr(dyn, e.record.state) : NAN;
    arm.push_back(std::move(e));
  }
}

double arm_spearman(const std::vector<SCurveEntry>& arm) {
  std::vector<double> mag, eta;
  for (const auto& e : arm) {
    if (!e.converged) continue;
    mag.push_back(std::abs(e.g));
    eta.push_back(e.effective_lr);
  }
  return spearman(mag, eta);
}

std::vector<double> ranks(const std::vector<double>& v) {
  const std::size_t n = v.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) r[idx[t]] = avg;
    i = j + 1;
  }
  return r;
}

}  // namespace

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw DimensionError("spearman: length mismatch");
  const std::size_t n = a.size();
  if (n < 3) return NAN;
  const auto ra = ranks(a);
  const auto rb = ranks(b);
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return NAN;
  return sab / std::sqrt(saa * sbb);
}

SCurve s_curve(const StateDynamics& dyn, const std::vector<double>& g_values,
               const FixedPointRecord& zero_point, const FixedPointOptions& options) {
  if (zero_point.state.size() != dyn.state_dim()) {
    throw DimensionError("s_curve: zero point has the wrong dimension");
  }
  SCurve s;
  s.zero_point = zero_point;
  std::vector<double> neg, pos;
  long zeros = 0;
  for (double g : g_values) {
    if (!std::isfinite(g)) throw ConfigError("s_curve: gradient values must be finite");
    if (g < 0.0) neg.push_back(g);
    else if (g > 0.0) pos.push_back(g);
    else ++zeros;
  }
  for (long i = 0; i < zeros; ++i) {
    SCurveEntry e;
    e.g = 0.0;
    e.record = zero_point;
    e.converged = zero_point.classification == FixedPointClass::kFixed;
    e.effective_lr = effective_lr(dyn, zero_point.state);
    s.zero_entries.push_back(std::move(e));
  }
  run_arm(dyn, neg, zero_point, options, s.negative_arm);
  run_arm(dyn, pos, zero_point, options, s.positive_arm);

  long ok = 0;
  for (const auto* arm : {&s.zero_entries, &s.negative_arm, &s.positive_arm}) {
    for (const auto& e : *arm) ok += e.converged ? 1 : 0;
  }
  s.success_rate = g_values.empty() ? 0.0 : static_cast<double>(ok) / g_values.size();
  s.spearman_negative = arm_spearman(s.negative_arm);
  s.spearman_positive = arm_spearman(s.positive_arm);
  return s;
}

// -------------------------------------------------------- state statistics

std::vector<double> state_variance(const std::vector<RolloutTrace>& traces) {
  if (traces.empty()) return {};
  const std::size_t steps = traces.front().states.size();
  for (const auto& t : traces) {
    if (t.states.size() != steps) throw DimensionError("state_variance: traces differ in length");
  }
  std::vector<double> out(steps, 0.0);
  for (std::size_t k = 0; k < steps; ++k) {
    const long n = traces.front().states[k].rows();
    long count = 0;
    Vec sum = Vec::Zero(n);
    for (const auto& t : traces) {
      if (t.states[k].rows() != n) throw DimensionError("state_variance: state sizes differ");
      sum += t.states[k].rowwise().sum();
      count += t.states[k].cols();
    }
    if (count < 2) continue;
    const Vec mean = sum / static_cast<double>(count);
    double ss = 0.0;
    for (const auto& t : traces) ss += (t.states[k].colwise() - mean).squaredNorm();
    out[k] = ss / static_cast<double>(count - 1);
  }
  return out;
}

Histogram gradient_histogram(const std::vector<RolloutTrace>& traces, long bins) {
  if (bins < 1 || bins % 2 == 0) throw ConfigError("gradient_histogram: bins must be odd");
  double m = 0.0;
  long count = 0;
  for (const auto& t : traces) {
    for (const auto& g : t.gradients) {
      if (g.size() > 0) m = std::max(m, g.cwiseAbs().maxCoeff());
      count += g.size();
    }
  }
  if (count == 0) throw DimensionError("gradient_histogram: no gradients recorded");
  if (m == 0.0) m = 1.0;
  Histogram h;
  h.count = count;
  h.edges = Vec::LinSpaced(bins + 1, -m, m);
  h.mass = Vec::Zero(bins);
  for (const auto& t : traces) {
    for (const auto& g : t.gradients) {
      for (long i = 0; i < g.size(); ++i) {
        long b = static_cast<long>(std::floor((g(i) + m) / (2.0 * m) * bins));
        b = std::clamp(b, 0L, bins - 1);
        h.mass(b) += 1.0;
      }
    }
  }
  h.mass /= static_cast<double>(count);
  return h;
}

double saturated_fraction(const std::vector<RolloutTrace>& traces,
                          const SaturationThresholds& thresholds) {
  long total = 0, outside = 0;
  for (const auto& t : traces) {
    for (const auto& g : t.gradients) {
      total += g.size();
      outside += ((g.array() < thresholds.negative) || (g.array() > thresholds.positive)).count();
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(outside) / total;
}

}  // namespace lopt
