#include "lopt/dynamics.hpp"

#include <algorithm>
#include <Eigen/LU>
#include <cmath>

#include "lopt/error.hpp"
#include "lopt/rng.hpp"

namespace lopt {
namespace {

constexpr double kJacobianStep = 1e-6;

}  // namespace

Mat StateDynamics::step_batch(const Mat& h, const Vec& g) const {
  Mat out(h.rows(), h.cols());
  for (long j = 0; j < h.cols(); ++j) out.col(j) = step(h.col(j), g(j));
  return out;
}

Mat StateDynamics::state_jacobian(const Vec& h, double g) const {
  const long n = state_dim();
  Mat jac(n, n);
  Vec probe = h;
  for (long j = 0; j < n; ++j) {
    probe(j) = h(j) + kJacobianStep;
    const Vec up = step(probe, g);
    probe(j) = h(j) - kJacobianStep;
    const Vec down = step(probe, g);
    probe(j) = h(j);
    jac.col(j) = (up - down) / (2.0 * kJacobianStep);
  }
  return jac;
}

Vec StateDynamics::input_jacobian(const Vec& h, double g) const {
  return (step(h, g + kJacobianStep) - step(h, g - kJacobianStep)) / (2.0 * kJacobianStep);
}

// ------------------------------------------------------------------- GRU

GruDynamics::GruDynamics(OptimizerParams params) : params_(std::move(params)) {
  params_.validate();
}

Vec GruDynamics::step(const Vec& h, double g) const { return gru_cell(params_.gru, h, g); }

Mat GruDynamics::step_batch(const Mat& h, const Vec& g) const {
  return gru_step(params_.gru, h, g);
}

Mat GruDynamics::state_jacobian(const Vec& h, double g) const {
  return gru_state_jacobian(params_.gru, h, g);
}

Vec GruDynamics::input_jacobian(const Vec& h, double g) const {
  return gru_input_jacobian(params_.gru, h, g);
}

// ---------------------------------------------------------------- linear

LinearDynamics::LinearDynamics(Mat jacobian, Vec input, Vec readout, Vec initial, Vec offset)
    : jacobian_(std::move(jacobian)),
      input_(std::move(input)),
      readout_(std::move(readout)),
      initial_(std::move(initial)),
      offset_(std::move(offset)) {
  const long n = jacobian_.rows();
  if (jacobian_.cols() != n || input_.size() != n || readout_.size() != n ||
      initial_.size() != n) {
    throw DimensionError("LinearDynamics: inconsistent shapes");
  }
  if (offset_.size() == 0) offset_ = Vec::Zero(n);
  if (offset_.size() != n) throw DimensionError("LinearDynamics: offset length mismatch");
}

Vec LinearDynamics::step(const Vec& h, double g) const {
  return jacobian_ * h + input_ * g + offset_;
}

Mat LinearDynamics::step_batch(const Mat& h, const Vec& g) const {
  Mat out = jacobian_ * h + input_ * g.transpose();
  out.colwise() += offset_;
  return out;
}

// -------------------------------------------------------------- clipping

ClippedGdDynamics::ClippedGdDynamics(double alpha, double clip)
    : clip_(clip), readout_(Vec::Constant(1, -alpha)), initial_(Vec::Zero(1)) {
  if (!(clip > 0.0)) throw ConfigError("ClippedGdDynamics: clip must be > 0");
}

Vec ClippedGdDynamics::step(const Vec& /*h*/, double g) const {
  return Vec::Constant(1, std::clamp(g, -clip_, clip_));
}

Vec ClippedGdDynamics::input_jacobian(const Vec& /*h*/, double g) const {
  return Vec::Constant(1, std::abs(g) < clip_ ? 1.0 : 0.0);
}

// --------------------------------------------------------------- RMSProp

RmspropDynamics::RmspropDynamics(double alpha, double gamma, double eps, double a0)
    : gamma_(gamma), eps_(eps), readout_(2), initial_(2) {
  readout_ << 0.0, -alpha;
  initial_ << a0, 0.0;
}

Vec RmspropDynamics::step(const Vec& h, double g) const {
  Vec out(2);
  out(0) = gamma_ * h(0) + (1.0 - gamma_) * g * g;
  out(1) = g / std::sqrt(out(0) + eps_);
  return out;
}

Mat RmspropDynamics::state_jacobian(const Vec& h, double g) const {
  const double a = gamma_ * h(0) + (1.0 - gamma_) * g * g;
  Mat jac = Mat::Zero(2, 2);
  jac(0, 0) = gamma_;
  jac(1, 0) = -0.5 * g * gamma_ / std::pow(a + eps_, 1.5);
  return jac;
}

Vec RmspropDynamics::input_jacobian(const Vec& h, double g) const {
  const double a = gamma_ * h(0) + (1.0 - gamma_) * g * g;
  const double da = 2.0 * (1.0 - gamma_) * g;
  Vec out(2);
  out(0) = da;
  out(1) = 1.0 / std::sqrt(a + eps_) - 0.5 * g * da / std::pow(a + eps_, 1.5);
  return out;
}

// -------------------------------------------------------------- builders

std::unique_ptr<LinearDynamics> embedded_gd(double alpha) {
  return std::make_unique<LinearDynamics>(Mat::Zero(1, 1), Vec::Ones(1),
                                          Vec::Constant(1, -alpha), Vec::Zero(1));
}

std::unique_ptr<LinearDynamics> embedded_momentum(double alpha, double beta, long extra_dims,
                                                  std::uint64_t seed, double v0) {
  const long n = 1 + extra_dims;
  Mat jac = Mat::Zero(n, n);
  jac(0, 0) = beta;
  if (extra_dims > 0) {
    // Decaying block with a random basis: eigenvalues in [0, 0.5).
    RngStream rng(seed, 7);
    Mat basis(extra_dims, extra_dims);
    for (long i = 0; i < extra_dims; ++i)
      for (long j = 0; j < extra_dims; ++j) basis(i, j) = rng.normal();
    basis += 3.0 * Mat::Identity(extra_dims, extra_dims);
    Vec eig(extra_dims);
    for (long i = 0; i < extra_dims; ++i) eig(i) = 0.5 * rng.uniform();
    jac.bottomRightCorner(extra_dims, extra_dims) =
        basis * eig.asDiagonal() * basis.inverse();
  }
  Vec input = Vec::Zero(n);
  input(0) = 1.0;
  Vec readout = Vec::Zero(n);
  readout(0) = -alpha;
  Vec initial = Vec::Zero(n);
  initial(0) = v0;
  return std::make_unique<LinearDynamics>(std::move(jac), std::move(input), std::move(readout),
                                          std::move(initial));
}

RolloutTrace rollout_dynamics(const StateDynamics& dyn, const ProblemInstance& instance,
                              long steps, bool record_states) {
  if (steps < 1) throw ConfigError("rollout_dynamics: steps must be >= 1");
  const long d = instance.dim();
  RolloutTrace trace;
  Vec x = instance.x0;
  Vec g;
  double loss = instance.objective->loss_and_gradient(x, g);
  if (!std::isfinite(loss)) throw InstanceError("rollout_dynamics: initial loss is not finite");
  Mat h = dyn.initial_state().replicate(1, d);
  trace.losses.push_back(loss);
  trace.params.push_back(x);
  trace.gradients.push_back(g);
  if (record_states) trace.states.push_back(h);

  for (long k = 0; k < steps; ++k) {
    h = dyn.step_batch(h, g);
    const Vec dx = h.transpose() * dyn.readout();
    x += dx;
    loss = instance.objective->loss_and_gradient(x, g);
    trace.updates.push_back(dx);
    trace.losses.push_back(loss);
    if (!std::isfinite(loss) || !g.allFinite()) {
      trace.diverged = true;
      trace.truncated_at = k + 1;
      break;
    }
    trace.params.push_back(x);
    trace.gradients.push_back(g);
    if (record_states) trace.states.push_back(h);
  }
  return trace;
}

}  // namespace lopt
