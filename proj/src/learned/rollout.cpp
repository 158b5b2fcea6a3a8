#include "lopt/rollout.hpp"

#include <cmath>

#include "lopt/error.hpp"

namespace lopt {

RolloutTrace rollout(const LearnedOptimizerCheckpoint& ckpt, const ProblemInstance& instance,
                     long steps, bool record_states) {
  if (steps < 1) throw ConfigError("rollout: steps must be >= 1");
  const OptimizerParams& p = ckpt.params;
  const long d = instance.dim();

  RolloutTrace trace;
  Vec x = instance.x0;
  Vec g;
  double loss = instance.objective->loss_and_gradient(x, g);
  if (!std::isfinite(loss)) throw InstanceError("rollout: initial loss is not finite");
  Mat h = p.h0.replicate(1, d);

  trace.losses.push_back(loss);
  trace.params.push_back(x);
  trace.gradients.push_back(g);
  if (record_states) trace.states.push_back(h);

  for (long k = 0; k < steps; ++k) {
    h = gru_step(p.gru, h, g);
    const Vec dx = h.transpose() * p.readout;
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
