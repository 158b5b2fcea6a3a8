#include "lopt/tasks.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <limits>
#include <numbers>
#include <utility>

#include "lopt/error.hpp"

namespace lopt {

std::string to_string(TaskKind kind) {
  switch (kind) {
    case TaskKind::kQuadratic:
      return "quadratic";
    case TaskKind::kRosenbrock:
      return "rosenbrock";
    case TaskKind::kTwoMoons:
      return "two_moons";
  }
  return "unknown";
}

TaskKind parse_task_kind(const std::string& name) {
  if (name == "quadratic") return TaskKind::kQuadratic;
  if (name == "rosenbrock") return TaskKind::kRosenbrock;
  if (name == "two_moons") return TaskKind::kTwoMoons;
  throw KindError("unknown task kind '" + name + "' (expected quadratic|rosenbrock|two_moons)");
}

double Objective::loss_and_gradient(const Vec& x, Vec& grad) const {
  grad = gradient(x);
  return loss(x);
}

// ---------------------------------------------------------------- quadratic

QuadraticObjective::QuadraticObjective(Mat a, Vec b) : a_(std::move(a)), b_(std::move(b)) {
  if (a_.rows() != b_.size()) throw DimensionError("quadratic: A rows must match b length");
}

double QuadraticObjective::loss(const Vec& x) const {
  return 0.5 * (a_ * x - b_).squaredNorm();
}

Vec QuadraticObjective::gradient(const Vec& x) const { return a_.transpose() * (a_ * x - b_); }

double QuadraticObjective::loss_and_gradient(const Vec& x, Vec& grad) const {
  const Vec residual = a_ * x - b_;
  grad = a_.transpose() * residual;
  return 0.5 * residual.squaredNorm();
}

Vec QuadraticObjective::hvp(const Vec& /*x*/, const Vec& v) const {
  return a_.transpose() * (a_ * v);
}

// --------------------------------------------------------------- rosenbrock

double RosenbrockObjective::loss(const Vec& p) const {
  const double x = p(0), y = p(1);
  const double a = 1.0 - x;
  const double b = y - x * x;
  return a * a + 100.0 * b * b;
}

Vec RosenbrockObjective::gradient(const Vec& p) const {
  const double x = p(0), y = p(1);
  const double b = y - x * x;
  Vec g(2);
  g(0) = -2.0 * (1.0 - x) - 400.0 * x * b;
  g(1) = 200.0 * b;
  return g;
}

Vec RosenbrockObjective::hvp(const Vec& p, const Vec& v) const {
  const double x = p(0), y = p(1);
  const double hxx = 2.0 - 400.0 * y + 1200.0 * x * x;
  const double hxy = -400.0 * x;
  const double hyy = 200.0;
  Vec out(2);
  out(0) = hxx * v(0) + hxy * v(1);
  out(1) = hxy * v(0) + hyy * v(1);
  return out;
}

// ----------------------------------------------------------------- sampling

ProblemInstance make_quadratic(Mat a, Vec b, Vec x0) {
  ProblemInstance out;
  out.kind = TaskKind::kQuadratic;
  out.objective = std::make_shared<QuadraticObjective>(std::move(a), std::move(b));
  out.x0 = std::move(x0);
  return out;
}

ProblemInstance sample_quadratic(RngStream& rng, long d) {
  if (d < 1) throw DimensionError("sample_quadratic: d must be >= 1");
  Mat a(d, d);
  for (long i = 0; i < d; ++i)
    for (long j = 0; j < d; ++j) a(i, j) = rng.normal();
  Vec b(d);
  for (long i = 0; i < d; ++i) b(i) = rng.normal();
  Vec x0(d);
  for (long i = 0; i < d; ++i) x0(i) = rng.normal();
  return make_quadratic(std::move(a), std::move(b), std::move(x0));
}

ProblemInstance sample_rosenbrock(RngStream& rng) {
  ProblemInstance out;
  out.kind = TaskKind::kRosenbrock;
  out.objective = std::make_shared<RosenbrockObjective>();
  out.x0.resize(2);
  out.x0(0) = rng.uniform(-2.0, 2.0);
  out.x0(1) = rng.uniform(-1.0, 3.0);
  return out;
}

TwoMoonsDataset two_moons_generate(RngStream& rng, long n, double noise) {
  if (n < 2) throw DimensionError("two_moons_generate: n must be >= 2");
  if (noise < 0.0) throw DimensionError("two_moons_generate: noise must be >= 0");
  const long n_outer = n / 2;
  const long n_inner = n - n_outer;
  TwoMoonsDataset out;
  out.noise = noise;
  out.points.resize(n, 2);
  out.labels.resize(n);
  auto angle = [](long i, long count) {
    return count > 1 ? std::numbers::pi * static_cast<double>(i) / static_cast<double>(count - 1)
                     : 0.0;
  };
  for (long i = 0; i < n_outer; ++i) {
    const double t = angle(i, n_outer);
    out.points(i, 0) = std::cos(t);
    out.points(i, 1) = std::sin(t);
    out.labels(i) = 0.0;
  }
  for (long i = 0; i < n_inner; ++i) {
    const double t = angle(i, n_inner);
    out.points(n_outer + i, 0) = 1.0 - std::cos(t);
    out.points(n_outer + i, 1) = 0.5 - std::sin(t);
    out.labels(n_outer + i) = 1.0;
  }
  if (noise > 0.0) {
    for (long i = 0; i < n; ++i) {
      out.points(i, 0) += noise * rng.normal();
      out.points(i, 1) += noise * rng.normal();
    }
  }
  return out;
}

ProblemInstance sample_mlp_problem(RngStream& rng, std::shared_ptr<const TwoMoonsDataset> data,
                                   const MlpSpec& spec) {
  spec.validate();
  ProblemInstance out;
  out.kind = TaskKind::kTwoMoons;
  out.x0.resize(spec.parameter_count());
  long offset = 0;
  for (std::size_t l = 1; l < spec.widths.size(); ++l) {
    const long fan_in = spec.widths[l - 1];
    const long fan_out = spec.widths[l];
    const double scale = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (long i = 0; i < fan_in * fan_out; ++i) out.x0(offset++) = scale * rng.normal();
    // Biases start at zero.
    for (long i = 0; i < fan_out; ++i) out.x0(offset++) = 0.0;
  }
  out.objective = std::make_shared<MlpObjective>(std::move(data), spec);
  return out;
}

SpectrumStats quadratic_spectrum_stats(const ProblemInstance& instance) {
  const auto* quad = dynamic_cast<const QuadraticObjective*>(instance.objective.get());
  if (instance.kind != TaskKind::kQuadratic || quad == nullptr) {
    throw KindError("quadratic_spectrum_stats: instance is " + to_string(instance.kind));
  }
  const Mat hessian = quad->a().transpose() * quad->a();
  Eigen::SelfAdjointEigenSolver<Mat> solver(hessian, Eigen::EigenvaluesOnly);
  SpectrumStats out;
  out.lambda_min = solver.eigenvalues().minCoeff();
  out.lambda_max = solver.eigenvalues().maxCoeff();
  out.condition_number = out.lambda_min <= 1e-12 * out.lambda_max
                             ? std::numeric_limits<double>::infinity()
                             : out.lambda_max / out.lambda_min;
  return out;
}

// ------------------------------------------------------------------ sampler

TaskSampler::TaskSampler(TaskSpec spec) : spec_(std::move(spec)) {
  if (spec_.kind == TaskKind::kTwoMoons) {
    spec_.mlp.validate();
    RngStream data_rng(spec_.seed, /*stream=*/0);
    dataset_ = std::make_shared<const TwoMoonsDataset>(
        two_moons_generate(data_rng, spec_.n_points, spec_.noise));
  }
}

ProblemInstance TaskSampler::sample(RngStream& rng) const {
  switch (spec_.kind) {
    case TaskKind::kQuadratic:
      return sample_quadratic(rng, spec_.dim);
    case TaskKind::kRosenbrock:
      return sample_rosenbrock(rng);
    case TaskKind::kTwoMoons:
      return sample_mlp_problem(rng, dataset_, spec_.mlp);
  }
  throw KindError("TaskSampler: unhandled task kind");
}

ProblemInstance TaskSampler::problem(std::uint64_t family, std::uint64_t index) const {
  RngStream rng = RngStream(spec_.seed, family).split(index);
  ProblemInstance out = sample(rng);
  out.id = index;
  return out;
}

std::vector<ProblemInstance> TaskSampler::problems(std::uint64_t family, std::uint64_t first,
                                                   std::uint64_t count) const {
  std::vector<ProblemInstance> out;
  out.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) out.push_back(problem(family, first + i));
  return out;
}

}  // namespace lopt
