#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "lopt/rng.hpp"
#include "lopt/tensor.hpp"

namespace lopt {

enum class TaskKind { kQuadratic, kRosenbrock, kTwoMoons };

std::string to_string(TaskKind kind);
TaskKind parse_task_kind(const std::string& name);

/// Deterministic loss with first- and second-order oracles.
class Objective {
 public:
  virtual ~Objective() = default;
  virtual long dim() const = 0;
  virtual double loss(const Vec& x) const = 0;
  virtual Vec gradient(const Vec& x) const = 0;
  /// Loss and gradient from one evaluation; the default calls both oracles.
  virtual double loss_and_gradient(const Vec& x, Vec& grad) const;
  virtual bool has_hvp() const { return true; }
  /// Hessian of the loss at x applied to v.
  virtual Vec hvp(const Vec& x, const Vec& v) const = 0;
};

/// f(x) = 1/2 ||A x - b||^2.
class QuadraticObjective final : public Objective {
 public:
  QuadraticObjective(Mat a, Vec b);
  long dim() const override { return a_.cols(); }
  double loss(const Vec& x) const override;
  Vec gradient(const Vec& x) const override;
  double loss_and_gradient(const Vec& x, Vec& grad) const override;
  Vec hvp(const Vec& x, const Vec& v) const override;

  const Mat& a() const { return a_; }
  const Vec& b() const { return b_; }

 private:
  Mat a_;
  Vec b_;
};

/// f(x, y) = (1 - x)^2 + 100 (y - x^2)^2.
class RosenbrockObjective final : public Objective {
 public:
  long dim() const override { return 2; }
  double loss(const Vec& x) const override;
  Vec gradient(const Vec& x) const override;
  Vec hvp(const Vec& x, const Vec& v) const override;
};

struct TwoMoonsDataset {
  /// n x 2 coordinates.
  Mat points;
  /// Labels in {0, 1}.
  Vec labels;
  double noise = 0.0;

  long size() const { return points.rows(); }
};

/// Outer arc (cos t, sin t) with label 0 and inner arc (1 - cos t, 1/2 - sin t)
/// with label 1, t evenly spaced on [0, pi]; floor(n/2) outer points.
TwoMoonsDataset two_moons_generate(RngStream& rng, long n, double noise);

struct MlpSpec {
  std::vector<int> widths{2, 64, 64, 64, 1};

  /// Number of scalar parameters: per layer W (out x in) then b (out).
  long parameter_count() const;
  void validate() const;
};

/// Mean logistic loss of a tanh MLP over a full dataset. The flat parameter
/// vector stores, per layer, W row-major followed by b.
class MlpObjective final : public Objective {
 public:
  MlpObjective(std::shared_ptr<const TwoMoonsDataset> data, MlpSpec spec);
  long dim() const override { return spec_.parameter_count(); }
  double loss(const Vec& x) const override;
  Vec gradient(const Vec& x) const override;
  double loss_and_gradient(const Vec& x, Vec& grad) const override;
  /// Forward-over-reverse (Pearlmutter R-operator) product.
  Vec hvp(const Vec& x, const Vec& v) const override;

  /// Network logits for every data point.
  Vec logits(const Vec& x) const;
  const MlpSpec& spec() const { return spec_; }
  const TwoMoonsDataset& data() const { return *data_; }

 private:
  std::shared_ptr<const TwoMoonsDataset> data_;
  MlpSpec spec_;
};

/// One sampled inner problem.
struct ProblemInstance {
  TaskKind kind = TaskKind::kQuadratic;
  std::shared_ptr<const Objective> objective;
  Vec x0;
  /// Identity used to order reductions (e.g. the problem index within its
  /// sampling stream); permutation of a batch never changes sums.
  std::uint64_t id = 0;

  long dim() const { return x0.size(); }
  double loss(const Vec& x) const { return objective->loss(x); }
  Vec gradient(const Vec& x) const { return objective->gradient(x); }
  Vec hvp(const Vec& x, const Vec& v) const { return objective->hvp(x, v); }
};

ProblemInstance sample_quadratic(RngStream& rng, long d);
ProblemInstance make_quadratic(Mat a, Vec b, Vec x0);
ProblemInstance sample_rosenbrock(RngStream& rng);
ProblemInstance sample_mlp_problem(RngStream& rng, std::shared_ptr<const TwoMoonsDataset> data,
                                   const MlpSpec& spec);

struct SpectrumStats {
  double condition_number = 0.0;  ///< +inf when lambda_min <= 1e-12 lambda_max
  double lambda_min = 0.0;
  double lambda_max = 0.0;
};

/// Condition number of A^T A for a quadratic instance. KindError otherwise.
SpectrumStats quadratic_spectrum_stats(const ProblemInstance& instance);

/// Task configuration block.
struct TaskSpec {
  TaskKind kind = TaskKind::kRosenbrock;
  long dim = 10;
  long n_points = 256;
  double noise = 0.1;
  std::uint64_t seed = 0;
  MlpSpec mlp{};
};

/// Samples problems from a task distribution. The two-moons dataset is fixed
/// by the task seed; problems differ in their initial weights.
class TaskSampler {
 public:
  explicit TaskSampler(TaskSpec spec);

  ProblemInstance sample(RngStream& rng) const;
  /// Problem `index` of a named family (e.g. training, test); the instance id
  /// is the index.
  ProblemInstance problem(std::uint64_t family, std::uint64_t index) const;
  std::vector<ProblemInstance> problems(std::uint64_t family, std::uint64_t first,
                                        std::uint64_t count) const;

  const TaskSpec& spec() const { return spec_; }
  const std::shared_ptr<const TwoMoonsDataset>& dataset() const { return dataset_; }

 private:
  TaskSpec spec_;
  std::shared_ptr<const TwoMoonsDataset> dataset_;
};

/// Problem families: independent RNG streams keyed from the task seed.
namespace family {
inline constexpr std::uint64_t kTrain = 1;
inline constexpr std::uint64_t kTest = 2;
inline constexpr std::uint64_t kTune = 3;
inline constexpr std::uint64_t kAnalysis = 4;
}  // namespace family

}  // namespace lopt
