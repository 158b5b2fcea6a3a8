#pragma once

#include <memory>

#include "lopt/checkpoint.hpp"
#include "lopt/rollout.hpp"
#include "lopt/tasks.hpp"

namespace lopt {

/// An optimizer written as a dynamical system: h' = F(h, g), dx = w^T h'.
/// The learned GRU optimizer and embedded hand-designed rules share this
/// interface so that every analysis runs on both.
class StateDynamics {
 public:
  virtual ~StateDynamics() = default;

  virtual long state_dim() const = 0;
  virtual Vec step(const Vec& h, double g) const = 0;
  /// Advances every column of h with its own input; default loops over step().
  virtual Mat step_batch(const Mat& h, const Vec& g) const;
  /// dF/dh; default is a central finite difference.
  virtual Mat state_jacobian(const Vec& h, double g) const;
  /// dF/dg; default is a central finite difference.
  virtual Vec input_jacobian(const Vec& h, double g) const;
  virtual const Vec& readout() const = 0;
  virtual const Vec& initial_state() const = 0;
};

class GruDynamics final : public StateDynamics {
 public:
  explicit GruDynamics(OptimizerParams params);
  explicit GruDynamics(const LearnedOptimizerCheckpoint& ckpt) : GruDynamics(ckpt.params) {}

  long state_dim() const override { return params_.hidden_size(); }
  Vec step(const Vec& h, double g) const override;
  Mat step_batch(const Mat& h, const Vec& g) const override;
  Mat state_jacobian(const Vec& h, double g) const override;
  Vec input_jacobian(const Vec& h, double g) const override;
  const Vec& readout() const override { return params_.readout; }
  const Vec& initial_state() const override { return params_.h0; }
  const OptimizerParams& params() const { return params_; }

 private:
  OptimizerParams params_;
};

/// h' = J h + j_g g + offset.
class LinearDynamics final : public StateDynamics {
 public:
  LinearDynamics(Mat jacobian, Vec input, Vec readout, Vec initial, Vec offset = {});

  long state_dim() const override { return jacobian_.rows(); }
  Vec step(const Vec& h, double g) const override;
  Mat step_batch(const Mat& h, const Vec& g) const override;
  Mat state_jacobian(const Vec&, double) const override { return jacobian_; }
  Vec input_jacobian(const Vec&, double) const override { return input_; }
  const Vec& readout() const override { return readout_; }
  const Vec& initial_state() const override { return initial_; }

 private:
  Mat jacobian_;
  Vec input_;
  Vec readout_;
  Vec initial_;
  Vec offset_;
};

/// Stateless clipping: h' = clamp(g, -c, c), w = -alpha.
class ClippedGdDynamics final : public StateDynamics {
 public:
  ClippedGdDynamics(double alpha, double clip);
  long state_dim() const override { return 1; }
  Vec step(const Vec& h, double g) const override;
  Vec input_jacobian(const Vec& h, double g) const override;
  Mat state_jacobian(const Vec&, double) const override { return Mat::Zero(1, 1); }
  const Vec& readout() const override { return readout_; }
  const Vec& initial_state() const override { return initial_; }

 private:
  double clip_;
  Vec readout_;
  Vec initial_;
};

/// RMSProp with state (a, s): a' = gamma a + (1 - gamma) g^2,
/// s' = g / sqrt(a' + eps), readout (0, -alpha).
class RmspropDynamics final : public StateDynamics {
 public:
  RmspropDynamics(double alpha, double gamma, double eps, double a0 = 0.0);
  long state_dim() const override { return 2; }
  Vec step(const Vec& h, double g) const override;
  Mat state_jacobian(const Vec& h, double g) const override;
  Vec input_jacobian(const Vec& h, double g) const override;
  const Vec& readout() const override { return readout_; }
  const Vec& initial_state() const override { return initial_; }

 private:
  double gamma_;
  double eps_;
  Vec readout_;
  Vec initial_;
};

/// Gradient descent: h' = g, w = -alpha.
std::unique_ptr<LinearDynamics> embedded_gd(double alpha);

/// Classical momentum v' = beta v + g, w = -alpha, as state coordinate 0.
/// Extra coordinates form a decaying block (eigenvalues in [0, 0.5)) with no
/// input or readout coupling, so the state can be made higher dimensional.
std::unique_ptr<LinearDynamics> embedded_momentum(double alpha, double beta, long extra_dims = 0,
                                                  std::uint64_t seed = 0, double v0 = 0.0);

/// Runs any dynamics as a component-wise optimizer (same conventions as
/// rollout() for the learned optimizer).
RolloutTrace rollout_dynamics(const StateDynamics& dyn, const ProblemInstance& instance,
                              long steps, bool record_states = false);

}  // namespace lopt
