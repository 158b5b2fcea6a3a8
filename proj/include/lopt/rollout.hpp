#pragma once

#include <vector>

#include "lopt/checkpoint.hpp"
#include "lopt/tasks.hpp"

namespace lopt {

struct RolloutTrace {
  /// losses[k] = f(x^k), k = 0..steps (shorter when diverged).
  std::vector<double> losses;
  /// x^k and g^k = grad f(x^k), recorded for k = 0..steps.
  std::vector<Vec> params;
  std::vector<Vec> gradients;
  /// Delta x^k applied between x^k and x^{k+1}.
  std::vector<Vec> updates;
  /// h^k as (n x d), k = 0..steps; only when states were requested.
  std::vector<Mat> states;
  bool diverged = false;
  /// Index of the first non-finite loss when diverged, else -1.
  long truncated_at = -1;
};

/// Runs the component-wise learned optimizer: every coordinate starts from
/// the shared h0, reads its own gradient and moves by readout^T h.
RolloutTrace rollout(const LearnedOptimizerCheckpoint& ckpt, const ProblemInstance& instance,
                     long steps, bool record_states = false);

}  // namespace lopt
