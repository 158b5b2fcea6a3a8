#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>

#include "lopt/checkpoint.hpp"
#include "lopt/error.hpp"
#include "lopt/finite_diff.hpp"
#include "lopt/gru.hpp"
#include "lopt/io.hpp"
#include "lopt/rollout.hpp"

using namespace lopt;

namespace {

Vec random_vec(RngStream& rng, long n, double scale = 1.0) {
  Vec v(n);
  for (long i = 0; i < n; ++i) v(i) = scale * rng.normal();
  return v;
}

// Gates large enough to be away from the linear regime.
OptimizerParams random_params(long n, std::uint64_t seed, double scale = 0.5) {
  RngStream rng(seed);
  OptimizerParams p = init_optimizer_params(n, rng);
  p.gru.w_z = random_vec(rng, n, scale);
  p.gru.w_r = random_vec(rng, n, scale);
  p.gru.w_c = random_vec(rng, n, scale);
  p.gru.b_z = random_vec(rng, n, scale);
  p.gru.b_r = random_vec(rng, n, scale);
  p.gru.b_c = random_vec(rng, n, scale);
  p.readout = random_vec(rng, n, 0.1);
  p.h0 = random_vec(rng, n, 0.3);
  return p;
}

LearnedOptimizerCheckpoint ckpt_of(OptimizerParams p) {
  LearnedOptimizerCheckpoint c;
  c.meta.hidden_size = p.hidden_size();
  c.params = std::move(p);
  return c;
}

bool bit_equal(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         std::memcmp(a.data(), b.data(), sizeof(double) * a.size()) == 0;
}

}  // namespace

TEST_CASE("gru: zero parameters halve the state") {
  const GruParams p = GruParams::zeros(4);
  Vec h(4);
  h << 1, -2, 3, 0.5;
  const Vec out = gru_cell(p, h, 7.0);
  CHECK((out - 0.5 * h).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("gru: origin is fixed without input weights") {
  RngStream rng(1);
  OptimizerParams p = init_optimizer_params(6, rng);
  p.gru.w_z.setZero();
  p.gru.w_r.setZero();
  p.gru.w_c.setZero();
  p.gru.b_z.setZero();
  p.gru.b_r.setZero();
  p.gru.b_c.setZero();
  CHECK(gru_cell(p.gru, Vec::Zero(6), 3.3).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("gru: analytic Jacobians match finite differences") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto p = random_params(7, seed);
    RngStream rng(100 + seed);
    const Vec h = random_vec(rng, 7, 0.7);
    const double g = rng.normal();
    const Mat j = gru_state_jacobian(p.gru, h, g);
    const Vec jg = gru_input_jacobian(p.gru, h, g);
    for (long i = 0; i < 7; ++i) {
      auto fi = [&](const Vec& v) { return gru_cell(p.gru, v, g)(i); };
      const Vec row = finite_diff_grad(fi, h, 1e-6);
      CHECK(max_relative_error(j.row(i).transpose(), row, 1e-8) < 1e-6);
      auto gi = [&](const Vec& v) { return gru_cell(p.gru, h, v(0))(i); };
      const Vec col = finite_diff_grad(gi, Vec::Constant(1, g), 1e-6);
      CHECK(relative_error(jg(i), col(0), 1e-8) < 1e-6);
    }
  }
}

TEST_CASE("gru: output bounded by max(|h|, 1)") {
  RngStream rng(4);
  for (int t = 0; t < 200; ++t) {
    const auto p = random_params(5, 50 + t, 2.0);
    const Vec h = random_vec(rng, 5, 3.0);
    const Vec out = gru_cell(p.gru, h, 10.0 * rng.normal());
    for (long j = 0; j < 5; ++j) REQUIRE(std::abs(out(j)) <= std::max(std::abs(h(j)), 1.0));
  }
}

TEST_CASE("gru: batched step equals per-column cell") {
  const auto p = random_params(5, 3);
  RngStream rng(5);
  Mat h(5, 4);
  for (long c = 0; c < 4; ++c) h.col(c) = random_vec(rng, 5);
  const Vec g = random_vec(rng, 4);
  const Mat out = gru_step(p.gru, h, g);
  for (long c = 0; c < 4; ++c) {
    CHECK((out.col(c) - gru_cell(p.gru, h.col(c), g(c))).cwiseAbs().maxCoeff() < 1e-15);
  }
  CHECK_THROWS_AS(gru_step(p.gru, h, Vec::Zero(3)), DimensionError);
}

TEST_CASE("readout") {
  Vec h(3);
  h << 3, 1, 2;
  CHECK(apply_readout(Vec::Zero(3), h) == 0.0);
  CHECK(apply_readout(Vec::Unit(3, 0), h) == 3.0);
  RngStream rng(6);
  const Vec w = random_vec(rng, 3), h1 = random_vec(rng, 3), h2 = random_vec(rng, 3);
  CHECK(apply_readout(w, 2.0 * h1 - 0.5 * h2) ==
        doctest::Approx(2.0 * apply_readout(w, h1) - 0.5 * apply_readout(w, h2)).epsilon(1e-14));
  CHECK_THROWS_AS(apply_readout(w, Vec::Zero(2)), DimensionError);
}

TEST_CASE("init: orthogonal recurrences, small readout, zero h0") {
  RngStream rng(7);
  const OptimizerParams p = init_optimizer_params(16, rng);
  for (const Mat* u : {&p.gru.u_z, &p.gru.u_r, &p.gru.u_c}) {
    CHECK(((*u).transpose() * (*u) - Mat::Identity(16, 16)).cwiseAbs().maxCoeff() < 1e-12);
  }
  CHECK(p.h0.cwiseAbs().maxCoeff() == 0.0);
  CHECK(p.readout.cwiseAbs().maxCoeff() < 1e-2);
  CHECK(p.gru.w_z.cwiseAbs().maxCoeff() < 0.1);
}

TEST_CASE("flatten round trip") {
  const auto p = random_params(5, 8);
  const Vec flat = p.flatten();
  CHECK(flat.size() == p.flat_size());
  CHECK(p.flat_size() == 3 * 5 + 3 * 25 + 3 * 5 + 5 + 5);
  const auto q = OptimizerParams::unflatten(flat, 5);
  CHECK(q.flatten() == flat);
  CHECK(q.gru.u_r == p.gru.u_r);
  CHECK_THROWS_AS(OptimizerParams::unflatten(Vec::Zero(7), 5), DimensionError);
}

TEST_CASE("checkpoint: bit-exact round trip through JSON and file") {
  auto c = ckpt_of(random_params(6, 9));
  c.params.readout(2) = -0.0;
  c.params.h0(1) = 1e-310;
  c.meta.seed = 123456789012345ULL;
  c.meta.meta_step = 77;
  c.meta.task = "quadratic";
  const auto back = checkpoint_from_json(checkpoint_to_json(c));
  CHECK(bit_equal(back.params.flatten(), c.params.flatten()));
  CHECK(back.meta.seed == c.meta.seed);
  CHECK(back.meta.meta_step == 77);
  CHECK(back.meta.task == "quadratic");
  CHECK(checkpoint_to_json(back) == checkpoint_to_json(c));

  const auto dir = std::filesystem::temp_directory_path() / "lopt_test_learned";
  std::filesystem::create_directories(dir);
  save_checkpoint(c, dir / "c.json");
  const auto loaded = load_checkpoint(dir / "c.json");
  CHECK(bit_equal(loaded.params.flatten(), c.params.flatten()));
  CHECK_THROWS_AS(load_checkpoint(dir / "absent.json"), MissingArtifactError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("checkpoint: malformed documents") {
  CHECK_THROWS_AS(checkpoint_from_json("{"), FormatError);
  CHECK_THROWS_AS(checkpoint_from_json("{}"), FormatError);
  auto c = ckpt_of(random_params(3, 1));
  std::string text = checkpoint_to_json(c);
  const auto pos = text.find("\"format_version\": 1");
  REQUIRE(pos != std::string::npos);
  text.replace(pos, 19, "\"format_version\": 9");
  CHECK_THROWS_AS(checkpoint_from_json(text), FormatError);
  c.meta.hidden_size = 4;
  CHECK_THROWS_AS(c.validate(), DimensionError);
}

TEST_CASE("rollout: inert optimizer keeps x fixed") {
  auto p = random_params(4, 2);
  p.readout.setZero();
  RngStream rng(3);
  const auto inst = sample_quadratic(rng, 5);
  const auto tr = rollout(ckpt_of(p), inst, 20);
  for (const auto& x : tr.params) CHECK(x == inst.x0);
  for (double l : tr.losses) CHECK(l == tr.losses[0]);
}

TEST_CASE("rollout: single step by hand") {
  const auto p = random_params(4, 4);
  RngStream rng(5);
  const auto inst = sample_quadratic(rng, 3);
  const auto tr = rollout(ckpt_of(p), inst, 1, true);
  const Vec g0 = inst.gradient(inst.x0);
  REQUIRE(tr.params.size() == 2);
  for (long i = 0; i < 3; ++i) {
    const double dx = p.readout.dot(gru_cell(p.gru, p.h0, g0(i)));
    CHECK(tr.params[1](i) == doctest::Approx(inst.x0(i) + dx).epsilon(1e-14));
  }
  // h^0 columns all equal the shared initial state.
  for (long c = 0; c < 3; ++c) CHECK(tr.states[0].col(c) == p.h0);
}

TEST_CASE("rollout: coordinate permutation equivariance and recording invariance") {
  const auto p = random_params(5, 6);
  RngStream rng(7);
  const auto inst = sample_quadratic(rng, 4);
  const auto& q = dynamic_cast<const QuadraticObjective&>(*inst.objective);
  Eigen::PermutationMatrix<Eigen::Dynamic> perm(4);
  perm.indices() << 2, 0, 3, 1;
  const Mat ap = q.a() * perm.transpose();
  const auto permuted = make_quadratic(ap, q.b(), perm * inst.x0);
  const auto t1 = rollout(ckpt_of(p), inst, 15);
  const auto t2 = rollout(ckpt_of(p), permuted, 15);
  for (std::size_t k = 0; k < t1.params.size(); ++k) {
    CHECK((perm * t1.params[k] - t2.params[k]).cwiseAbs().maxCoeff() < 1e-12);
  }
  const auto t3 = rollout(ckpt_of(p), inst, 15, true);
  CHECK(t1.losses == t3.losses);
  CHECK(t3.states.size() == 16);
}

TEST_CASE("rollout: argument errors") {
  const auto p = random_params(3, 1);
  RngStream rng(0);
  auto inst = sample_quadratic(rng, 2);
  CHECK_THROWS_AS(rollout(ckpt_of(p), inst, 0), ConfigError);
  inst.x0(0) = INFINITY;
  CHECK_THROWS_AS(rollout(ckpt_of(p), inst, 3), InstanceError);
}
