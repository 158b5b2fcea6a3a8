#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lopt/rng.hpp"
#include "lopt/tasks.hpp"
#include "lopt/tensor.hpp"

namespace lopt {

enum class BaselineKind { kGd, kClippedGd, kMomentum, kRmsprop, kAdam };

std::string to_string(BaselineKind kind);
BaselineKind parse_baseline_kind(const std::string& name);

struct BaselineHyperparams {
  BaselineKind kind = BaselineKind::kGd;
  double alpha = 0.01;   ///< learning rate
  double beta = 0.9;     ///< momentum timescale
  double gamma = 0.9;    ///< RMSProp decay
  double beta1 = 0.9;    ///< Adam first-moment decay
  double beta2 = 0.999;  ///< Adam second-moment decay
  double eps = 1e-8;
  std::optional<double> clip;  ///< clip threshold, clipped GD only

  void validate() const;
};

// Single steps, applied component-wise. Momentum uses v' = beta v + g,
// x' = x - alpha v'.
void step_momentum(Vec& x, Vec& v, const Vec& g, const BaselineHyperparams& hp);
void step_rmsprop(Vec& x, Vec& a, const Vec& g, const BaselineHyperparams& hp);
/// t is the 1-based step index used for bias correction.
void step_adam(Vec& x, Vec& m, Vec& v, const Vec& g, long t, const BaselineHyperparams& hp);
void step_clipped_gd(Vec& x, const Vec& g, const BaselineHyperparams& hp);

struct TrainingCurve {
  /// losses[0] = loss(x0), losses[k] after k updates.
  std::vector<double> losses;
  /// Parameter snapshots, filled only when requested.
  std::vector<Vec> params;
  std::uint64_t task_id = 0;
  bool diverged = false;

  /// Number of updates actually performed.
  long steps() const { return static_cast<long>(losses.size()) - 1; }
};

TrainingCurve run_optimizer(const BaselineHyperparams& hp, const ProblemInstance& instance,
                            long steps, bool record_params = false);

/// Arithmetic mean of a loss sequence.
double mean_loss(std::span<const double> losses);

/// Meta-objective of a run: mean of the post-update losses 1..K (loss(x0) is
/// optimizer independent and excluded), +inf for diverged runs so that
/// rankings put them last. A zero-step curve scores its initial loss.
double meta_objective(const TrainingCurve& curve);

// ------------------------------------------------------------------ tuning

enum class AxisScale { kLinear, kLog, kOneMinusLog };

/// One tuned hyperparameter. kOneMinusLog spaces 1 - value logarithmically,
/// with an exact 0 at the lo end when lo == 0 (e.g. beta in [0, 0.999]).
struct GridAxis {
  std::string name;  ///< alpha | beta | gamma | beta1 | beta2
  double lo = 0.0;
  double hi = 1.0;
  int points = 50;
  AxisScale scale = AxisScale::kLinear;

  double value(int index) const;
  /// Continuous grid coordinate of a value (inverse of value()).
  double coordinate(double v) const;
};

struct TuneGrid {
  std::vector<GridAxis> axes;

  std::uint64_t size() const;
  std::vector<int> unravel(std::uint64_t flat) const;
  BaselineHyperparams apply(BaselineHyperparams base, const std::vector<int>& index) const;
};

/// Default ranges: alpha log-uniform [1e-4, 10]; beta and beta1 in [0, 0.999]
/// spaced as 1 - logspace; gamma and beta2 in [0.5, 0.9999].
TuneGrid default_grid(BaselineKind kind);

struct TuneRecord {
  std::vector<int> index;
  BaselineHyperparams hp;
  double score = 0.0;
};

struct TuneResult {
  BaselineHyperparams best;
  std::vector<int> best_index;
  double best_score = 0.0;
  /// One record per candidate, in sampling order.
  std::vector<TuneRecord> records;
  bool best_on_boundary = false;
  std::vector<std::string> warnings;
};

struct TuneOptions {
  long n_samples = 2500;
  long steps = 200;
  /// Candidate visiting order. Only used to prove order invariance.
  std::function<std::vector<std::size_t>(std::size_t)> evaluation_order;
};

/// Random grid search. Distinct grid points are drawn without replacement
/// while n_samples <= grid size, with replacement beyond it. Every candidate
/// is scored on the same problems by the mean meta-objective; ties go to the
/// lowest sample index.
TuneResult tune(BaselineKind kind, const std::vector<ProblemInstance>& problems,
                const TuneGrid& grid, const TuneOptions& options, RngStream& rng);

/// Closed-form heavy-ball optimum for a quadratic with Hessian spectrum in
/// [mu, L]: alpha = (2 / (sqrt L + sqrt mu))^2, beta = ((sqrt L - sqrt mu) /
/// (sqrt L + sqrt mu))^2.
std::pair<double, double> heavy_ball_optimum(double mu, double lipschitz);

}  // namespace lopt
