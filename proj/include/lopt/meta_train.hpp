#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "lopt/checkpoint.hpp"
#include "lopt/gru.hpp"
#include "lopt/tasks.hpp"

namespace lopt {

struct MetaConfig {
  long unroll = 200;
  long batch_size = 32;
  long meta_steps = 5000;
  double learning_rate = 1e-3;
  double lr_decay = 0.8;
  long lr_decay_every = 500;
  double clip = 5.0;
  double l2 = 1e-5;
  long hidden_size = 256;
  std::uint64_t seed = 0;
  /// Periodic checkpoint interval in meta steps; 0 disables.
  long checkpoint_every = 500;
  TaskSpec task{};

  void validate() const;
};

/// Desk-scale profile for a task (smaller hidden size, batch and step count;
/// Rosenbrock also uses a lower meta learning rate).
MetaConfig desk_profile(TaskKind kind);

/// Forward quantities of one unrolled inner run, enough for an exact
/// reverse pass. Index k runs over inner iterations.
struct UnrolledTape {
  std::vector<Vec> params;     ///< x^k, k = 0..K
  std::vector<Vec> gradients;  ///< g^k = grad f(x^k), k = 0..K
  std::vector<double> losses;  ///< f(x^k), k = 0..K
  std::vector<Mat> states;     ///< h^k (n x d), k = 0..K
  std::vector<GruGates> gates; ///< gate activations of step k -> k+1, k = 0..K-1
  bool diverged = false;

  long length() const { return static_cast<long>(gates.size()); }
};

struct MetaForwardResult {
  /// Mean of f(x^1..x^K); +inf when the run diverged.
  double objective = 0.0;
  UnrolledTape tape;
  bool diverged = false;
};

MetaForwardResult meta_forward(const OptimizerParams& params, const ProblemInstance& instance,
                               long unroll);

/// Recomputes the forward pass from the tape's x^0 and returns f(x^0..x^K).
std::vector<double> replay_losses(const UnrolledTape& tape, const OptimizerParams& params,
                                  const ProblemInstance& instance);

struct MetaGradient {
  OptimizerParams grad;
  double objective = 0.0;
  double norm = 0.0;
  bool finite = true;
};

/// Exact reverse-mode derivative of the meta objective through the whole
/// unroll. The dependence of g^k on x^k is chained with the task HVP oracle.
MetaGradient meta_backward(const UnrolledTape& tape, const OptimizerParams& params,
                           const ProblemInstance& instance);

/// Meta objective and gradient for one problem.
MetaGradient meta_gradient(const OptimizerParams& params, const ProblemInstance& instance,
                           long unroll);

struct AdamState {
  Vec m;
  Vec v;
  long t = 0;
};

struct MetaStepDiagnostics {
  long step = 0;
  double meta_objective = 0.0;  ///< mean over non-diverged problems
  double grad_norm = 0.0;       ///< averaged gradient incl. L2, before clipping
  double clipped_grad_norm = 0.0;
  double learning_rate = 0.0;
  long diverged = 0;
};

/// base * decay^floor(step / decay_every).
double meta_learning_rate(const MetaConfig& config, long step);

/// Averages the batch meta-gradients (summed in instance-id order), adds the
/// L2 term, clips each coordinate to [-clip, clip] and applies one Adam step.
MetaStepDiagnostics meta_step(AdamState& adam, OptimizerParams& params,
                              const std::vector<ProblemInstance>& batch, const MetaConfig& config,
                              long step);

/// Adam update with the clip/L2/schedule pipeline, given an averaged raw
/// meta-gradient. Exposed for tests.
MetaStepDiagnostics apply_meta_update(AdamState& adam, OptimizerParams& params,
                                      const Vec& mean_grad, const MetaConfig& config, long step);

struct TrainResult {
  LearnedOptimizerCheckpoint checkpoint;
  std::vector<MetaStepDiagnostics> log;
};

using CheckpointCallback = std::function<void(const LearnedOptimizerCheckpoint&)>;
using StepCallback = std::function<void(const MetaStepDiagnostics&)>;

LearnedOptimizerCheckpoint initial_checkpoint(const MetaConfig& config);

/// Runs config.meta_steps meta steps on fresh training problems.
TrainResult train(const MetaConfig& config, const CheckpointCallback& on_checkpoint = {},
                  const StepCallback& on_step = {});

/// Sums vectors pairwise in the given order.
Vec pairwise_sum(const std::vector<const Vec*>& terms);

}  // namespace lopt
