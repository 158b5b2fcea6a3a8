#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "lopt/error.hpp"
#include "lopt/finite_diff.hpp"
#include "lopt/meta_train.hpp"
#include "lopt/parallel.hpp"

using namespace lopt;

namespace {

constexpr long kHidden = 8;
constexpr long kUnroll = 10;

// Perturbed init so every gate is exercised; the readout is scaled per task
// to keep the inner runs bounded.
OptimizerParams tiny_params(std::uint64_t seed, double readout_scale) {
  RngStream rng(seed);
  OptimizerParams p = init_optimizer_params(kHidden, rng);
  Vec f = p.flatten();
  for (long i = 0; i < f.size(); ++i) f(i) += 0.3 * rng.normal();
  p = OptimizerParams::unflatten(f, kHidden);
  p.readout *= readout_scale;
  return p;
}

ProblemInstance tiny_problem(TaskKind kind, std::uint64_t seed) {
  RngStream rng(seed);
  switch (kind) {
    case TaskKind::kQuadratic:
      return sample_quadratic(rng, 2);
    case TaskKind::kRosenbrock:
      return sample_rosenbrock(rng);
    case TaskKind::kTwoMoons: {
      auto data = std::make_shared<const TwoMoonsDataset>(two_moons_generate(rng, 16, 0.1));
      return sample_mlp_problem(rng, data, MlpSpec{{2, 4, 1}});
    }
  }
  return {};
}

// Worst relative error between the reverse-mode gradient and a fourth-order
// central difference of the meta objective, over every parameter. Entries
// below 1e-6 of the largest gradient magnitude are compared against that
// floor, since the difference quotient cannot resolve them.
double meta_gradient_error(const OptimizerParams& p, const ProblemInstance& inst) {
  const MetaGradient mg = meta_gradient(p, inst, kUnroll);
  REQUIRE(mg.finite);
  const Vec analytic = mg.grad.flatten();
  const Vec theta = p.flatten();
  auto objective = [&](const Vec& t) {
    return meta_forward(OptimizerParams::unflatten(t, kHidden), inst, kUnroll).objective;
  };
  const double floor = 1e-6 * analytic.cwiseAbs().maxCoeff();
  double worst = 0.0;
  for (long i = 0; i < theta.size(); ++i) {
    const double fd = finite_diff_partial5(objective, theta, i, 1e-4);
    worst = std::max(worst, relative_error(analytic(i), fd, floor));
  }
  return worst;
}

class NoHvpObjective final : public Objective {
 public:
  long dim() const override { return 1; }
  double loss(const Vec& x) const override { return 0.5 * x.squaredNorm(); }
  Vec gradient(const Vec& x) const override { return x; }
  bool has_hvp() const override { return false; }
  Vec hvp(const Vec&, const Vec& v) const override { return v; }
};

}  // namespace

TEST_CASE("meta-gradient matches finite differences on every task kind") {
  SUBCASE("quadratic") {
    CHECK(meta_gradient_error(tiny_params(7, 0.1), tiny_problem(TaskKind::kQuadratic, 1)) < 1e-5);
  }
  SUBCASE("rosenbrock") {
    CHECK(meta_gradient_error(tiny_params(7, 1e-3), tiny_problem(TaskKind::kRosenbrock, 2)) < 1e-5);
  }
  SUBCASE("two moons") {
    CHECK(meta_gradient_error(tiny_params(7, 0.1), tiny_problem(TaskKind::kTwoMoons, 3)) < 1e-5);
  }
}

TEST_CASE("meta_forward: inert optimizer, unroll 1, replay") {
  auto p = tiny_params(1, 0.1);
  const auto inst = tiny_problem(TaskKind::kQuadratic, 4);
  OptimizerParams inert = p;
  inert.readout.setZero();
  CHECK(meta_forward(inert, inst, 25).objective == doctest::Approx(inst.loss(inst.x0)).epsilon(1e-15));

  const auto one = meta_forward(p, inst, 1);
  REQUIRE(one.tape.losses.size() == 2);
  CHECK(one.objective == one.tape.losses[1]);
  CHECK(one.tape.length() == 1);

  const auto fw = meta_forward(p, inst, kUnroll);
  CHECK(fw.tape.length() == kUnroll);
  CHECK(replay_losses(fw.tape, p, inst) == fw.tape.losses);
  double mean = 0.0;
  for (long k = 1; k <= kUnroll; ++k) mean += fw.tape.losses[k];
  CHECK(fw.objective == doctest::Approx(mean / kUnroll).epsilon(1e-15));
}

TEST_CASE("meta_forward: divergence is flagged with an infinite objective") {
  auto p = tiny_params(2, 1.0);
  p.readout.setConstant(1e80);
  p.h0.setConstant(1.0);
  const auto inst = tiny_problem(TaskKind::kRosenbrock, 5);
  const auto fw = meta_forward(p, inst, 50);
  CHECK(fw.diverged);
  CHECK(std::isinf(fw.objective));
}

TEST_CASE("meta_backward: cut dataflow and constant objectives") {
  auto p = tiny_params(3, 0.1);
  p.readout.setZero();
  const auto inst = tiny_problem(TaskKind::kQuadratic, 6);
  const MetaGradient mg = meta_gradient(p, inst, kUnroll);
  CHECK(mg.grad.gru.u_z.cwiseAbs().maxCoeff() == 0.0);
  CHECK(mg.grad.gru.u_r.cwiseAbs().maxCoeff() == 0.0);
  CHECK(mg.grad.gru.u_c.cwiseAbs().maxCoeff() == 0.0);
  CHECK(mg.grad.h0.cwiseAbs().maxCoeff() == 0.0);
  // The readout is the only live pathway.
  CHECK(mg.grad.readout.cwiseAbs().maxCoeff() > 0.0);

  const MetaGradient doubled = meta_gradient(p, inst, 2 * kUnroll);
  CHECK(doubled.objective == doctest::Approx(mg.objective).epsilon(1e-15));
  CHECK(doubled.grad.h0.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("meta_backward: missing HVP oracle") {
  ProblemInstance inst;
  inst.objective = std::make_shared<NoHvpObjective>();
  inst.x0 = Vec::Ones(1);
  CHECK_THROWS_AS(meta_gradient(tiny_params(1, 0.1), inst, 3), CapabilityError);
}

TEST_CASE("meta update: zero gradient, clipping, schedule") {
  MetaConfig config;
  config.hidden_size = 2;
  OptimizerParams p = OptimizerParams::zeros(2);
  AdamState adam;
  const Vec zero = Vec::Zero(p.flat_size());
  apply_meta_update(adam, p, zero, config, 0);
  CHECK(p.flatten().cwiseAbs().maxCoeff() == 0.0);

  Vec g = Vec::Zero(p.flat_size());
  g(3) = 100.0;
  AdamState fresh;
  const auto diag = apply_meta_update(fresh, p, g, config, 0);
  CHECK(diag.grad_norm == doctest::Approx(100.0));
  CHECK(diag.clipped_grad_norm == doctest::Approx(5.0));
  CHECK(fresh.m(3) == doctest::Approx(0.5));
  CHECK(p.flatten()(3) == doctest::Approx(-1e-3).epsilon(1e-6));

  CHECK(meta_learning_rate(config, 500) / meta_learning_rate(config, 499) == 0.8);
  CHECK(meta_learning_rate(config, 0) == 1e-3);
  CHECK(meta_learning_rate(config, 1234) == doctest::Approx(1e-3 * 0.64).epsilon(1e-15));
}

TEST_CASE("meta_step: permuting the batch leaves the update bit-identical") {
  MetaConfig config;
  config.hidden_size = kHidden;
  config.unroll = 8;
  config.task.kind = TaskKind::kQuadratic;
  config.task.dim = 3;
  TaskSampler sampler(config.task);
  auto batch = sampler.problems(family::kTrain, 0, 5);
  auto reversed = batch;
  std::reverse(reversed.begin(), reversed.end());

  OptimizerParams a = tiny_params(4, 0.1), b = a;
  AdamState sa, sb;
  const auto da = meta_step(sa, a, batch, config, 0);
  const auto db = meta_step(sb, b, reversed, config, 0);
  CHECK(a.flatten() == b.flatten());
  CHECK(da.meta_objective == db.meta_objective);
  CHECK(da.grad_norm == db.grad_norm);
  CHECK_THROWS_AS(meta_step(sa, a, {}, config, 3), StepError);
}

TEST_CASE("meta_step: every problem diverging raises a step error") {
  MetaConfig config;
  config.hidden_size = kHidden;
  config.unroll = 50;
  config.task.kind = TaskKind::kRosenbrock;
  TaskSampler sampler(config.task);
  const auto batch = sampler.problems(family::kTrain, 0, 3);
  OptimizerParams p = tiny_params(2, 1.0);
  p.readout.setConstant(1e80);
  p.h0.setConstant(1.0);
  AdamState adam;
  try {
    meta_step(adam, p, batch, config, 17);
    FAIL("expected StepError");
  } catch (const StepError& e) {
    CHECK(e.step() == 17);
  }
}

TEST_CASE("train: zero steps and thread-count determinism") {
  MetaConfig config;
  config.hidden_size = 6;
  config.unroll = 12;
  config.batch_size = 4;
  config.meta_steps = 0;
  config.task.kind = TaskKind::kQuadratic;
  config.task.dim = 3;
  config.seed = 11;
  const auto init = initial_checkpoint(config);
  const auto none = train(config);
  CHECK(none.checkpoint.params.flatten() == init.params.flatten());
  CHECK(none.log.empty());

  config.meta_steps = 6;
  config.checkpoint_every = 2;
  long saved = 0;
  set_thread_count(1);
  const auto r1 = train(config, [&](const LearnedOptimizerCheckpoint&) { ++saved; });
  set_thread_count(3);
  const auto r2 = train(config);
  set_thread_count(0);
  CHECK(saved == 3);
  REQUIRE(r1.log.size() == r2.log.size());
  for (std::size_t i = 0; i < r1.log.size(); ++i) {
    CHECK(r1.log[i].meta_objective == r2.log[i].meta_objective);
    CHECK(r1.log[i].grad_norm == r2.log[i].grad_norm);
  }
  CHECK(r1.checkpoint.params.flatten() == r2.checkpoint.params.flatten());
  CHECK(r1.checkpoint.meta.meta_step == 6);
}

TEST_CASE("config validation and desk profiles") {
  MetaConfig bad;
  bad.lr_decay = 1.5;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = MetaConfig{};
  bad.unroll = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);

  const auto r = desk_profile(TaskKind::kRosenbrock);
  CHECK(r.hidden_size == 128);
  CHECK(r.batch_size == 16);
  CHECK(r.meta_steps == 2000);
  CHECK(r.unroll == 200);
  CHECK(r.learning_rate == 5e-6);
  CHECK(r.clip == 5.0);
  CHECK(r.l2 == 1e-5);
  const auto m = desk_profile(TaskKind::kTwoMoons);
  CHECK(m.hidden_size == 64);
  CHECK(m.task.mlp.widths == std::vector<int>{2, 32, 32, 1});
}

TEST_CASE("pairwise sum is exact on representable data") {
  std::vector<Vec> v;
  for (int i = 0; i < 7; ++i) v.push_back(Vec::Constant(2, static_cast<double>(i)));
  std::vector<const Vec*> t;
  for (const auto& x : v) t.push_back(&x);
  CHECK(pairwise_sum(t) == Vec::Constant(2, 21.0));
}
