#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/LU>
#include <cmath>

#include "lopt/error.hpp"
#include "lopt/finite_diff.hpp"
#include "lopt/tasks.hpp"

using namespace lopt;

namespace {

Vec random_vec(RngStream& rng, long n, double scale = 1.0) {
  Vec v(n);
  for (long i = 0; i < n; ++i) v(i) = scale * rng.normal();
  return v;
}

// Fourth-order directional gradient difference used as the HVP oracle.
Vec hvp_oracle(const ProblemInstance& p, const Vec& x, const Vec& v, double eps) {
  return (p.gradient(x - 2 * eps * v) - 8.0 * p.gradient(x - eps * v) +
          8.0 * p.gradient(x + eps * v) - p.gradient(x + 2 * eps * v)) /
         (12.0 * eps);
}

}  // namespace

TEST_CASE("task kind names") {
  CHECK(to_string(TaskKind::kTwoMoons) == "two_moons");
  CHECK(parse_task_kind("quadratic") == TaskKind::kQuadratic);
  CHECK(parse_task_kind("rosenbrock") == TaskKind::kRosenbrock);
  CHECK_THROWS_AS(parse_task_kind("mnist"), KindError);
}

TEST_CASE("quadratic: identity case") {
  const auto p = make_quadratic(Mat::Identity(2, 2), Vec::Zero(2), Vec::Zero(2));
  Vec x(2);
  x << 3, -4;
  CHECK(p.loss(x) == 12.5);
  CHECK(p.gradient(x) == x);
}

TEST_CASE("quadratic: gradient vanishes at the solution") {
  RngStream rng(2);
  const auto p = sample_quadratic(rng, 10);
  const auto& q = dynamic_cast<const QuadraticObjective&>(*p.objective);
  const Vec x = q.a().lu().solve(q.b());
  CHECK(p.gradient(x).norm() < 1e-8 * (1.0 + q.b().norm()));
}

TEST_CASE("quadratic: HVP is constant in x and matches the oracle") {
  RngStream rng(3);
  const auto p = sample_quadratic(rng, 10);
  const Vec v = random_vec(rng, 10);
  const Vec h1 = p.hvp(random_vec(rng, 10), v);
  const Vec h2 = p.hvp(random_vec(rng, 10), v);
  CHECK(h1 == h2);
  const Vec oracle = hvp_oracle(p, p.x0, v, 1e-3);
  CHECK(max_relative_error(h1, oracle, 1e-8 * h1.norm()) < 1e-5);
}

TEST_CASE("quadratic spectrum stats") {
  auto id = make_quadratic(Mat::Identity(3, 3), Vec::Zero(3), Vec::Zero(3));
  CHECK(quadratic_spectrum_stats(id).condition_number == doctest::Approx(1.0));
  Mat a = Mat::Zero(2, 2);
  a(0, 0) = 1;
  a(1, 1) = 10;
  const auto s = quadratic_spectrum_stats(make_quadratic(a, Vec::Zero(2), Vec::Zero(2)));
  CHECK(s.condition_number == doctest::Approx(100.0));
  CHECK(s.lambda_min == doctest::Approx(1.0));
  CHECK(s.lambda_max == doctest::Approx(100.0));
  const auto singular = quadratic_spectrum_stats(make_quadratic(Mat::Zero(2, 2), Vec::Zero(2), Vec::Zero(2)));
  CHECK(std::isinf(singular.condition_number));
  RngStream rng(0);
  CHECK_THROWS_AS(quadratic_spectrum_stats(sample_rosenbrock(rng)), KindError);
}

TEST_CASE("rosenbrock: known values") {
  RngStream rng(0);
  const auto p = sample_rosenbrock(rng);
  Vec one = Vec::Ones(2);
  CHECK(p.loss(one) == 0.0);
  CHECK(p.gradient(one).norm() == 0.0);
  CHECK(p.loss(Vec::Zero(2)) == 1.0);
  CHECK(p.gradient(Vec::Zero(2))(0) == -2.0);
  CHECK(p.gradient(Vec::Zero(2))(1) == 0.0);
  Vec e1 = Vec::Zero(2);
  e1(0) = 1.0;
  const Vec h = p.hvp(one, e1);
  CHECK(h(0) == 802.0);
  CHECK(h(1) == -400.0);
}

TEST_CASE("rosenbrock: initial points follow the sampling box") {
  RngStream rng(4);
  for (int i = 0; i < 1000; ++i) {
    const auto p = sample_rosenbrock(rng);
    REQUIRE(p.x0(0) > -2.0);
    REQUIRE(p.x0(0) < 2.0);
    REQUIRE(p.x0(1) > -1.0);
    REQUIRE(p.x0(1) < 3.0);
  }
}

TEST_CASE("two moons: canonical arcs and balance") {
  RngStream rng(0);
  const auto d = two_moons_generate(rng, 4, 0.0);
  for (long i = 0; i < d.size(); ++i) {
    const double x = d.points(i, 0), y = d.points(i, 1);
    if (d.labels(i) == 0.0) {
      CHECK(std::abs(x * x + y * y - 1.0) < 1e-15);
      CHECK(y >= -1e-15);
    } else {
      CHECK(std::abs((1 - x) * (1 - x) + (0.5 - y) * (0.5 - y) - 1.0) < 1e-15);
      CHECK(y <= 0.5 + 1e-15);
    }
  }
  const auto big = two_moons_generate(rng, 256, 0.1);
  CHECK(big.labels.sum() == 128.0);
  const auto odd = two_moons_generate(rng, 7, 0.1);
  CHECK(std::abs(odd.labels.sum() - 3.5) <= 0.5);
  CHECK(big.points.allFinite());
}

TEST_CASE("two moons: noiseless data is not linearly separable") {
  // Brute-force linear probe: every direction on a fine angle grid and every
  // threshold between projected points.
  RngStream rng(0);
  const auto d = two_moons_generate(rng, 256, 0.0);
  double best = 0.0;
  for (int a = 0; a < 720; ++a) {
    const double th = M_PI * a / 360.0;
    Vec proj = d.points.col(0) * std::cos(th) + d.points.col(1) * std::sin(th);
    std::vector<double> cuts(proj.data(), proj.data() + proj.size());
    std::sort(cuts.begin(), cuts.end());
    for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
      const double t = 0.5 * (cuts[c] + cuts[c + 1]);
      long correct = 0;
      for (long i = 0; i < d.size(); ++i) correct += (proj(i) > t) == (d.labels(i) == 1.0);
      best = std::max(best, static_cast<double>(correct) / d.size());
    }
  }
  CHECK(best < 0.9);
}

TEST_CASE("mlp: zero weights give ln 2") {
  RngStream rng(1);
  auto data = std::make_shared<const TwoMoonsDataset>(two_moons_generate(rng, 64, 0.1));
  MlpObjective f(data, MlpSpec{});
  CHECK(f.loss(Vec::Zero(f.dim())) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(MlpSpec{}.parameter_count() == 2 * 64 + 64 + 64 * 64 + 64 + 64 * 64 + 64 + 64 + 1);
}

TEST_CASE("mlp: duplicated dataset leaves loss and gradient unchanged") {
  RngStream rng(2);
  auto base = two_moons_generate(rng, 32, 0.1);
  TwoMoonsDataset twice;
  twice.points.resize(64, 2);
  twice.points << base.points, base.points;
  twice.labels.resize(64);
  twice.labels << base.labels, base.labels;
  MlpSpec spec{{2, 8, 8, 1}};
  MlpObjective f1(std::make_shared<const TwoMoonsDataset>(base), spec);
  MlpObjective f2(std::make_shared<const TwoMoonsDataset>(twice), spec);
  const Vec x = random_vec(rng, f1.dim(), 0.5);
  CHECK(f1.loss(x) == doctest::Approx(f2.loss(x)).epsilon(1e-14));
  CHECK(max_relative_error(f1.gradient(x), f2.gradient(x), 1e-15) < 1e-12);
}

TEST_CASE("mlp: gradient at random coordinates and HVP against finite differences") {
  TaskSpec spec;
  spec.kind = TaskKind::kTwoMoons;
  TaskSampler sampler(spec);
  const auto p = sampler.problem(family::kTest, 0);
  const Vec g = p.gradient(p.x0);
  RngStream rng(7);
  auto f = [&](const Vec& x) { return p.loss(x); };
  for (int t = 0; t < 20; ++t) {
    const long i = static_cast<long>(rng.below(p.dim()));
    const double fd = finite_diff_partial5(f, p.x0, i, 1e-4);
    CHECK(relative_error(g(i), fd, 1e-9) < 1e-5);
  }
  const Vec v = random_vec(rng, p.dim());
  CHECK(max_relative_error(p.hvp(p.x0, v), hvp_oracle(p, p.x0, v, 1e-4), 1e-6) < 1e-5);
}

TEST_CASE("mlp: init scale and zero biases") {
  TaskSpec spec;
  spec.kind = TaskKind::kTwoMoons;
  spec.mlp.widths = {2, 32, 1};
  TaskSampler sampler(spec);
  const auto p = sampler.problem(family::kTrain, 3);
  // Layer 0: W (32 x 2) then b (32).
  CHECK(p.x0.segment(64, 32).cwiseAbs().maxCoeff() == 0.0);
  CHECK(p.x0.tail(1)(0) == 0.0);
  const Vec w1 = p.x0.segment(96, 32);
  CHECK(std::sqrt(w1.squaredNorm() / 32.0) < 0.4);
}

TEST_CASE("mlp spec validation") {
  auto spec = [](std::vector<int> widths) { return MlpSpec{std::move(widths)}; };
  CHECK_THROWS_AS(spec({2, 4}).validate(), DimensionError);
  CHECK_THROWS_AS(spec({3, 4, 1}).validate(), DimensionError);
  CHECK_THROWS_AS(spec({2, 0, 1}).validate(), DimensionError);
  CHECK_NOTHROW(spec({2, 4, 1}).validate());
}

TEST_CASE("sampler: problems are reproducible and families independent") {
  TaskSpec spec;
  spec.kind = TaskKind::kQuadratic;
  spec.seed = 5;
  TaskSampler a(spec), b(spec);
  const auto p = a.problem(family::kTrain, 9);
  const auto q = b.problem(family::kTrain, 9);
  CHECK(p.id == 9);
  CHECK(p.x0 == q.x0);
  CHECK(p.loss(p.x0) == q.loss(q.x0));
  CHECK(a.problem(family::kTest, 9).x0 != p.x0);
  const auto batch = a.problems(family::kTrain, 8, 3);
  CHECK(batch.size() == 3);
  CHECK(batch[1].x0 == p.x0);
}

TEST_CASE("losses are bit-identical on repeated evaluation") {
  for (TaskKind kind : {TaskKind::kQuadratic, TaskKind::kRosenbrock, TaskKind::kTwoMoons}) {
    TaskSpec spec;
    spec.kind = kind;
    spec.mlp.widths = {2, 16, 16, 1};
    TaskSampler s(spec);
    const auto p = s.problem(family::kTest, 1);
    CHECK(p.loss(p.x0) == p.loss(p.x0));
    CHECK(p.gradient(p.x0) == p.gradient(p.x0));
  }
}
