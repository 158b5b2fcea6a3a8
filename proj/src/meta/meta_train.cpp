#include "lopt/meta_train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "lopt/error.hpp"
#include "lopt/parallel.hpp"

namespace lopt {

void MetaConfig::validate() const {
  if (unroll < 1) throw ConfigError("meta: unroll must be >= 1");
  if (batch_size < 1) throw ConfigError("meta: batch_size must be >= 1");
  if (meta_steps < 0) throw ConfigError("meta: meta_steps must be >= 0");
  if (!(learning_rate > 0.0)) throw ConfigError("meta: learning_rate must be > 0");
  if (!(lr_decay > 0.0 && lr_decay <= 1.0)) throw ConfigError("meta: lr_decay must be in (0, 1]");
  if (lr_decay_every < 1) throw ConfigError("meta: lr_decay_every must be >= 1");
  if (!(clip > 0.0)) throw ConfigError("meta: clip must be > 0");
  if (l2 < 0.0) throw ConfigError("meta: l2 must be >= 0");
  if (hidden_size < 1) throw ConfigError("meta: hidden_size must be >= 1");
  if (checkpoint_every < 0) throw ConfigError("meta: checkpoint_every must be >= 0");
}

MetaConfig desk_profile(TaskKind kind) {
  MetaConfig c;
  c.task.kind = kind;
  switch (kind) {
    case TaskKind::kRosenbrock:
      c.hidden_size = 128;
      c.batch_size = 16;
      c.meta_steps = 2000;
      // Full 200-step unrolls on Rosenbrock diverge within a few hundred
      // steps at 1e-4 and above; at 1e-5 late training loses long-horizon
      // convergence.
      c.learning_rate = 5e-6;
      break;
    case TaskKind::kQuadratic:
      c.hidden_size = 128;
      c.batch_size = 16;
      c.meta_steps = 2000;
      break;
    case TaskKind::kTwoMoons:
      c.hidden_size = 64;
      c.batch_size = 8;
      c.meta_steps = 1000;
      c.task.mlp.widths = {2, 32, 32, 1};
      break;
  }
  return c;
}

MetaForwardResult meta_forward(const OptimizerParams& params, const ProblemInstance& instance,
                               long unroll) {
  if (unroll < 1) throw ConfigError("meta_forward: unroll must be >= 1");
  const long d = instance.dim();
  MetaForwardResult out;
  UnrolledTape& tape = out.tape;
  tape.params.reserve(unroll + 1);
  tape.gradients.reserve(unroll + 1);
  tape.losses.reserve(unroll + 1);
  tape.states.reserve(unroll + 1);
  tape.gates.reserve(unroll);

  Vec x = instance.x0;
  Vec g;
  double loss = instance.objective->loss_and_gradient(x, g);
  if (!std::isfinite(loss)) throw InstanceError("meta_forward: initial loss is not finite");
  tape.params.push_back(x);
  tape.gradients.push_back(g);
  tape.losses.push_back(loss);
  tape.states.push_back(params.h0.replicate(1, d));

  double total = 0.0;
  for (long k = 0; k < unroll; ++k) {
    GruGates gates;
    Mat h = gru_step(params.gru, tape.states.back(), g, &gates);
    x += h.transpose() * params.readout;
    loss = instance.objective->loss_and_gradient(x, g);
    tape.gates.push_back(std::move(gates));
    tape.states.push_back(std::move(h));
    tape.params.push_back(x);
    tape.gradients.push_back(g);
    tape.losses.push_back(loss);
    if (!std::isfinite(loss) || !g.allFinite()) {
      tape.diverged = true;
      out.diverged = true;
      out.objective = std::numeric_limits<double>::infinity();
      return out;
    }
    total += loss;
  }
  out.objective = total / static_cast<double>(unroll);
  return out;
}

std::vector<double> replay_losses(const UnrolledTape& tape, const OptimizerParams& params,
                                  const ProblemInstance& instance) {
  if (tape.params.empty()) return {};
  const long d = instance.dim();
  std::vector<double> losses;
  Vec x = tape.params.front();
  Vec g;
  losses.push_back(instance.objective->loss_and_gradient(x, g));
  Mat h = params.h0.replicate(1, d);
  for (long k = 0; k < tape.length(); ++k) {
    h = gru_step(params.gru, h, g);
    x += h.transpose() * params.readout;
    losses.push_back(instance.objective->loss_and_gradient(x, g));
  }
  return losses;
}

MetaGradient meta_backward(const UnrolledTape& tape, const OptimizerParams& params,
                           const ProblemInstance& instance) {
  if (!instance.objective->has_hvp()) {
    throw CapabilityError("meta_backward: the task provides no Hessian-vector product oracle");
  }
  const long unroll = tape.length();
  const long n = params.hidden_size();
  MetaGradient out;
  out.grad = OptimizerParams::zeros(n);
  if (tape.diverged || unroll < 1) {
    out.objective = std::numeric_limits<double>::infinity();
    out.finite = false;
    return out;
  }
  double total = 0.0;
  for (long k = 1; k <= unroll; ++k) total += tape.losses[k];
  out.objective = total / static_cast<double>(unroll);

  const GruParams& p = params.gru;
  GruParams& gp = out.grad.gru;
  const double inv_k = 1.0 / static_cast<double>(unroll);

  // Adjoint of x^{k+1}; starts with the direct loss term of x^K.
  Vec x_bar = tape.gradients[unroll] * inv_k;
  Mat h_bar = Mat::Zero(n, instance.dim());

  for (long k = unroll - 1; k >= 0; --k) {
    const Mat& h_next = tape.states[k + 1];
    const Mat& h = tape.states[k];
    const GruGates& gt = tape.gates[k];
    const Vec& g = tape.gradients[k];

    // x^{k+1} = x^k + h^{k+1}^T w
    out.grad.readout.noalias() += h_next * x_bar;
    h_bar.noalias() += params.readout * x_bar.transpose();

    // h^{k+1} = (1 - z) h + z c
    const auto z = gt.z.array();
    const auto r = gt.r.array();
    const auto c = gt.c.array();
    const Mat z_bar = (h_bar.array() * (c - h.array())).matrix();
    const Mat ac_bar = (h_bar.array() * z * (1.0 - c.square())).matrix();
    Mat h_prev_bar = (h_bar.array() * (1.0 - z)).matrix();

    const Mat rh = (r * h.array()).matrix();
    gp.w_c.noalias() += ac_bar * g;
    gp.u_c.noalias() += ac_bar * rh.transpose();
    gp.b_c += ac_bar.rowwise().sum();
    const Mat rh_bar = p.u_c.transpose() * ac_bar;
    const Mat ar_bar = (rh_bar.array() * h.array() * r * (1.0 - r)).matrix();
    h_prev_bar.array() += rh_bar.array() * r;
    const Mat az_bar = (z_bar.array() * z * (1.0 - z)).matrix();

    gp.w_r.noalias() += ar_bar * g;
    gp.w_z.noalias() += az_bar * g;
    gp.u_r.noalias() += ar_bar * h.transpose();
    gp.u_z.noalias() += az_bar * h.transpose();
    gp.b_r += ar_bar.rowwise().sum();
    gp.b_z += az_bar.rowwise().sum();
    h_prev_bar.noalias() += p.u_r.transpose() * ar_bar;
    h_prev_bar.noalias() += p.u_z.transpose() * az_bar;

    // Adjoint of the optimizer input g^k, one scalar per coordinate.
    const Vec g_bar = (az_bar.transpose() * p.w_z) + (ar_bar.transpose() * p.w_r) +
                      (ac_bar.transpose() * p.w_c);

    h_bar = std::move(h_prev_bar);
    if (k >= 1) {
      // g^k = grad f(x^k) couples coordinates through the Hessian.
      x_bar += instance.objective->hvp(tape.params[k], g_bar);
      x_bar += tape.gradients[k] * inv_k;
    }
  }
  out.grad.h0 = h_bar.rowwise().sum();

  const Vec flat = out.grad.flatten();
  out.norm = flat.norm();
  out.finite = flat.allFinite();
  return out;
}

MetaGradient meta_gradient(const OptimizerParams& params, const ProblemInstance& instance,
                           long unroll) {
  const MetaForwardResult fwd = meta_forward(params, instance, unroll);
  return meta_backward(fwd.tape, params, instance);
}

double meta_learning_rate(const MetaConfig& config, long step) {
  const long epochs = step / config.lr_decay_every;
  return config.learning_rate * std::pow(config.lr_decay, static_cast<double>(epochs));
}

Vec pairwise_sum(const std::vector<const Vec*>& terms) {
  if (terms.empty()) return {};
  if (terms.size() == 1) return *terms.front();
  const std::size_t half = terms.size() / 2;
  const std::vector<const Vec*> left(terms.begin(), terms.begin() + half);
  const std::vector<const Vec*> right(terms.begin() + half, terms.end());
  return pairwise_sum(left) + pairwise_sum(right);
}

MetaStepDiagnostics apply_meta_update(AdamState& adam, OptimizerParams& params,
                                      const Vec& mean_grad, const MetaConfig& config, long step) {
  constexpr double kBeta1 = 0.9;
  constexpr double kBeta2 = 0.999;
  constexpr double kEps = 1e-8;

  const long n = params.hidden_size();
  Vec theta = params.flatten();
  Vec grad = mean_grad + config.l2 * theta;

  MetaStepDiagnostics diag;
  diag.step = step;
  diag.grad_norm = grad.norm();
  grad = grad.cwiseMax(-config.clip).cwiseMin(config.clip);
  diag.clipped_grad_norm = grad.norm();
  diag.learning_rate = meta_learning_rate(config, step);

  if (adam.m.size() != theta.size()) {
    adam.m = Vec::Zero(theta.size());
    adam.v = Vec::Zero(theta.size());
    adam.t = 0;
  }
  adam.t += 1;
  adam.m = kBeta1 * adam.m + (1.0 - kBeta1) * grad;
  adam.v = kBeta2 * adam.v + (1.0 - kBeta2) * grad.cwiseProduct(grad);
  const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(adam.t));
  const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(adam.t));
  theta.array() -=
      diag.learning_rate * (adam.m.array() / c1) / ((adam.v.array() / c2).sqrt() + kEps);
  params = OptimizerParams::unflatten(theta, n);
  return diag;
}

MetaStepDiagnostics meta_step(AdamState& adam, OptimizerParams& params,
                              const std::vector<ProblemInstance>& batch, const MetaConfig& config,
                              long step) {
  if (batch.empty()) throw StepError("meta_step: empty batch", step);

  std::vector<MetaGradient> grads(batch.size());
  parallel_for(batch.size(), [&](std::size_t i) {
    grads[i] = meta_gradient(params, batch[i], config.unroll);
  });

  // Reduction order is fixed by instance id, never by batch position.
  std::vector<std::size_t> order(batch.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return batch[a].id < batch[b].id; });

  std::vector<Vec> flats;
  std::vector<double> objectives;
  flats.reserve(batch.size());
  long diverged = 0;
  for (std::size_t i : order) {
    if (!grads[i].finite || !std::isfinite(grads[i].objective)) {
      ++diverged;
      continue;
    }
    flats.push_back(grads[i].grad.flatten());
    objectives.push_back(grads[i].objective);
  }
  if (flats.empty()) {
    throw StepError("meta_step: every problem in the batch diverged at step " +
                        std::to_string(step),
                    step);
  }
  std::vector<const Vec*> terms;
  for (const auto& f : flats) terms.push_back(&f);
  const Vec mean = pairwise_sum(terms) / static_cast<double>(flats.size());

  MetaStepDiagnostics diag = apply_meta_update(adam, params, mean, config, step);
  double total = 0.0;
  for (double o : objectives) total += o;
  diag.meta_objective = total / static_cast<double>(objectives.size());
  diag.diverged = diverged;
  return diag;
}

LearnedOptimizerCheckpoint initial_checkpoint(const MetaConfig& config) {
  LearnedOptimizerCheckpoint ckpt;
  RngStream init_rng(config.seed, /*stream=*/101);
  ckpt.params = init_optimizer_params(config.hidden_size, init_rng);
  ckpt.meta.task = to_string(config.task.kind);
  ckpt.meta.seed = config.seed;
  ckpt.meta.meta_step = 0;
  ckpt.meta.hidden_size = config.hidden_size;
  return ckpt;
}

TrainResult train(const MetaConfig& config, const CheckpointCallback& on_checkpoint,
                  const StepCallback& on_step) {
  config.validate();
  const TaskSampler sampler(config.task);
  TrainResult result;
  result.checkpoint = initial_checkpoint(config);
  AdamState adam;
  for (long step = 0; step < config.meta_steps; ++step) {
    const auto first = static_cast<std::uint64_t>(step) * config.batch_size;
    const auto batch = sampler.problems(family::kTrain, first, config.batch_size);
    MetaStepDiagnostics diag = meta_step(adam, result.checkpoint.params, batch, config, step);
    result.checkpoint.meta.meta_step = step + 1;
    result.log.push_back(diag);
    if (on_step) on_step(diag);
    if (on_checkpoint && config.checkpoint_every > 0 && (step + 1) % config.checkpoint_every == 0) {
      on_checkpoint(result.checkpoint);
    }
  }
  return result;
}

}  // namespace lopt
