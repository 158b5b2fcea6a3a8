#include <algorithm>
#include <cmath>
#include <numeric>

#include "lopt/analysis.hpp"
#include "lopt/error.hpp"

namespace lopt {

Vec LinearizedModel::predict_state(const Vec& h, double g) const {
  return base + jacobian * (h - h_star) + input_jacobian * (g - g_star);
}

double LinearizedModel::predict_update(const Vec& h, double g) const {
  return readout.dot(predict_state(h, g));
}

double LinearizedModel::modal_update(const Vec& h, double g) const {
  const CVec v = decomp.left.transpose() * (h - h_star).cast<std::complex<double>>();
  std::complex<double> sum = 0.0;
  for (long j = 0; j < modes(); ++j) {
    sum += rho(j) * (beta(j) * v(j) + alpha(j) * (g - g_star) + offset(j));
  }
  return readout.dot(h_star) + sum.real();
}

LinearizedModel linearize(const StateDynamics& dyn, const Vec& h_star, double g_star,
                          double biorthogonality_tolerance) {
  const long n = dyn.state_dim();
  if (h_star.size() != n) throw DimensionError("linearize: state has the wrong dimension");
  LinearizedModel m;
  m.h_star = h_star;
  m.g_star = g_star;
  m.base = dyn.step(h_star, g_star);
  m.jacobian = dyn.state_jacobian(h_star, g_star);
  m.input_jacobian = dyn.input_jacobian(h_star, g_star);
  m.readout = dyn.readout();
  m.initial_state = dyn.initial_state();
  m.decomp = eig_real(m.jacobian);
  m.non_normal_warning =
      !m.decomp.normalized || m.decomp.biorthogonality_residual > biorthogonality_tolerance;

  using C = std::complex<double>;
  const CMat& left = m.decomp.left;
  const CMat& right = m.decomp.right;
  m.beta = m.decomp.eigenvalues;
  m.alpha = left.transpose() * m.input_jacobian.cast<C>();
  m.rho = right.transpose() * m.readout.cast<C>();
  m.eta = -(m.rho.array() * m.alpha.array()).matrix();
  m.offset = left.transpose() * (m.base - h_star).cast<C>();
  return m;
}

std::vector<ModeRow> modal_spectrum_report(const LinearizedModel& model) {
  std::vector<ModeRow> rows;
  rows.reserve(model.modes());
  for (long j = 0; j < model.modes(); ++j) {
    ModeRow r;
    r.mode = j;
    r.eigenvalue = model.beta(j);
    r.magnitude = std::abs(r.eigenvalue);
    r.angle = std::arg(r.eigenvalue);
    r.eta = model.eta(j);
    rows.push_back(r);
  }
  std::stable_sort(rows.begin(), rows.end(),
                   [](const ModeRow& a, const ModeRow& b) { return a.magnitude > b.magnitude; });
  return rows;
}

namespace {

bool is_complex_mode(const LinearizedModel& model, long j) {
  return model.beta(j).imag() != 0.0;
}

// Partner of a complex mode: the nearest eigenvalue to its conjugate, which
// the real Schur solver places adjacent.
long conjugate_partner(const LinearizedModel& model, long j) {
  const auto target = std::conj(model.beta(j));
  long best = -1;
  double best_dist = INFINITY;
  for (long i = 0; i < model.modes(); ++i) {
    if (i == j) continue;
    const double dist = std::abs(model.beta(i) - target);
    if (dist < best_dist) {
      best_dist = dist;
      best = i;
    }
  }
  return best;
}

}  // namespace

std::vector<long> conjugate_closure(const LinearizedModel& model, std::vector<long> modes) {
  const std::size_t original = modes.size();
  for (std::size_t i = 0; i < original; ++i) {
    const long j = modes[i];
    if (j < 0 || j >= model.modes()) throw SelectionError("mode index out of range");
    if (!is_complex_mode(model, j)) continue;
    const long p = conjugate_partner(model, j);
    if (std::find(modes.begin(), modes.end(), p) == modes.end()) modes.push_back(p);
  }
  std::sort(modes.begin(), modes.end());
  modes.erase(std::unique(modes.begin(), modes.end()), modes.end());
  return modes;
}

long dominant_mode(const LinearizedModel& model) {
  if (model.modes() == 0) throw SelectionError("model has no modes");
  // Total displacement a unit gradient produces through mode j: |eta_j| / (1 - |lambda_j|).
  long best = 0;
  double best_score = -1.0;
  for (long j = 0; j < model.modes(); ++j) {
    const double gain = std::abs(model.eta(j)) / std::max(1.0 - std::abs(model.beta(j)), 1e-12);
    if (gain > best_score) {
      best_score = gain;
      best = j;
    }
  }
  return best;
}

ReducedRollout reduced_mode_rollout(const LinearizedModel& model, const std::vector<long>& modes,
                                    const ProblemInstance& instance, long steps) {
  using C = std::complex<double>;
  if (steps < 0) throw ConfigError("reduced_mode_rollout: steps must be >= 0");

  // One representative per conjugate pair carries weight 2 (twice the real
  // part); real modes carry weight 1.
  std::vector<long> simulated;
  std::vector<double> weight;
  std::vector<long> sorted = modes;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw SelectionError("reduced_mode_rollout: duplicate mode index");
  }
  for (long j : sorted) {
    if (j < 0 || j >= model.modes()) throw SelectionError("reduced_mode_rollout: mode index out of range");
    if (!is_complex_mode(model, j)) {
      simulated.push_back(j);
      weight.push_back(1.0);
      continue;
    }
    const long p = conjugate_partner(model, j);
    if (!std::binary_search(sorted.begin(), sorted.end(), p)) {
      throw SelectionError("reduced_mode_rollout: mode " + std::to_string(j) +
                           " selected without its conjugate " + std::to_string(p));
    }
    if (model.beta(j).imag() > 0.0) {
      simulated.push_back(j);
      weight.push_back(2.0);
    }
  }

  const long m = static_cast<long>(simulated.size());
  const long d = instance.dim();
  CVec beta(m), alpha(m), rho(m), offset(m);
  CMat left(model.h_star.size(), m);
  for (long i = 0; i < m; ++i) {
    const long j = simulated[i];
    beta(i) = model.beta(j);
    alpha(i) = model.alpha(j);
    rho(i) = model.rho(j) * weight[i];
    offset(i) = model.offset(j);
    left.col(i) = model.decomp.left.col(j);
  }
  const double constant = model.readout.dot(model.h_star);
  const CVec v0 = left.transpose() * (model.initial_state - model.h_star).cast<C>();
  CMat v = v0.replicate(1, d);

  ReducedRollout out;
  out.curve.task_id = instance.id;
  Vec x = instance.x0;
  Vec g;
  double loss = instance.objective->loss_and_gradient(x, g);
  if (!std::isfinite(loss)) throw InstanceError("reduced_mode_rollout: initial loss is not finite");
  out.curve.losses.push_back(loss);
  out.params.push_back(x);
  for (long k = 0; k < steps; ++k) {
    Vec dx(d);
    for (long c = 0; c < d; ++c) {
      const C drive = g(c) - model.g_star;
      C sum = 0.0;
      for (long i = 0; i < m; ++i) {
        v(i, c) = beta(i) * v(i, c) + alpha(i) * drive + offset(i);
        sum += rho(i) * v(i, c);
      }
      dx(c) = constant + sum.real();
    }
    x += dx;
    loss = instance.objective->loss_and_gradient(x, g);
    out.curve.losses.push_back(loss);
    if (!std::isfinite(loss) || !g.allFinite()) {
      out.curve.diverged = true;
      break;
    }
    out.params.push_back(x);
  }
  return out;
}

}  // namespace lopt
