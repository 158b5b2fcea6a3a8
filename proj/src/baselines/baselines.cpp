#include "lopt/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "lopt/error.hpp"
#include "lopt/parallel.hpp"

namespace lopt {

std::string to_string(BaselineKind kind) {
  switch (kind) {
    case BaselineKind::kGd:
      return "gd";
    case BaselineKind::kClippedGd:
      return "clipped_gd";
    case BaselineKind::kMomentum:
      return "momentum";
    case BaselineKind::kRmsprop:
      return "rmsprop";
    case BaselineKind::kAdam:
      return "adam";
  }
  return "unknown";
}

BaselineKind parse_baseline_kind(const std::string& name) {
  if (name == "gd") return BaselineKind::kGd;
  if (name == "clipped_gd") return BaselineKind::kClippedGd;
  if (name == "momentum") return BaselineKind::kMomentum;
  if (name == "rmsprop") return BaselineKind::kRmsprop;
  if (name == "adam") return BaselineKind::kAdam;
  throw KindError("unknown optimizer '" + name + "'");
}

void BaselineHyperparams::validate() const {
  auto in_unit = [](double v) { return v >= 0.0 && v < 1.0; };
  if (!(alpha > 0.0)) throw ConfigError("hyperparams: alpha must be > 0");
  if (!in_unit(beta) || !in_unit(gamma) || !in_unit(beta1) || !in_unit(beta2)) {
    throw ConfigError("hyperparams: decay parameters must lie in [0, 1)");
  }
  if (!(eps > 0.0)) throw ConfigError("hyperparams: eps must be > 0");
  if (clip && !(*clip > 0.0)) throw ConfigError("hyperparams: clip must be > 0");
}

void step_momentum(Vec& x, Vec& v, const Vec& g, const BaselineHyperparams& hp) {
  v = hp.beta * v + g;
  x -= hp.alpha * v;
}

void step_rmsprop(Vec& x, Vec& a, const Vec& g, const BaselineHyperparams& hp) {
  a = hp.gamma * a + (1.0 - hp.gamma) * g.cwiseProduct(g);
  x.array() -= hp.alpha * g.array() / (a.array() + hp.eps).sqrt();
}

void step_adam(Vec& x, Vec& m, Vec& v, const Vec& g, long t, const BaselineHyperparams& hp) {
  m = hp.beta1 * m + (1.0 - hp.beta1) * g;
  v = hp.beta2 * v + (1.0 - hp.beta2) * g.cwiseProduct(g);
  const double c1 = 1.0 - std::pow(hp.beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(hp.beta2, static_cast<double>(t));
  x.array() -= hp.alpha * (m.array() / c1) / ((v.array() / c2).sqrt() + hp.eps);
}

void step_clipped_gd(Vec& x, const Vec& g, const BaselineHyperparams& hp) {
  const double c = hp.clip.value_or(std::numeric_limits<double>::infinity());
  x -= hp.alpha * g.cwiseMax(-c).cwiseMin(c);
}

TrainingCurve run_optimizer(const BaselineHyperparams& hp, const ProblemInstance& instance,
                            long steps, bool record_params) {
  if (steps < 0) throw ConfigError("run_optimizer: steps must be >= 0");
  TrainingCurve curve;
  curve.task_id = instance.id;
  curve.losses.reserve(steps + 1);

  Vec x = instance.x0;
  Vec g;
  double loss = instance.objective->loss_and_gradient(x, g);
  if (!std::isfinite(loss)) throw InstanceError("run_optimizer: initial loss is not finite");
  curve.losses.push_back(loss);
  if (record_params) curve.params.push_back(x);

  const long d = x.size();
  Vec s1 = Vec::Zero(d);
  Vec s2 = Vec::Zero(d);
  for (long k = 1; k <= steps; ++k) {
    switch (hp.kind) {
      case BaselineKind::kGd:
        x -= hp.alpha * g;
        break;
      case BaselineKind::kClippedGd:
        step_clipped_gd(x, g, hp);
        break;
      case BaselineKind::kMomentum:
        step_momentum(x, s1, g, hp);
        break;
      case BaselineKind::kRmsprop:
        step_rmsprop(x, s1, g, hp);
        break;
      case BaselineKind::kAdam:
        step_adam(x, s1, s2, g, k, hp);
        break;
    }
    loss = instance.objective->loss_and_gradient(x, g);
    if (!std::isfinite(loss) || !g.allFinite()) {
      curve.losses.push_back(loss);
      curve.diverged = true;
      break;
    }
    curve.losses.push_back(loss);
    if (record_params) curve.params.push_back(x);
  }
  return curve;
}

double mean_loss(std::span<const double> losses) {
  if (losses.empty()) return std::numeric_limits<double>::quiet_NaN();
  double total = 0.0;
  for (double v : losses) total += v;
  return total / static_cast<double>(losses.size());
}

double meta_objective(const TrainingCurve& curve) {
  if (curve.diverged) return std::numeric_limits<double>::infinity();
  if (curve.losses.size() <= 1) return curve.losses.empty() ? INFINITY : curve.losses.front();
  const double m = mean_loss(std::span<const double>(curve.losses).subspan(1));
  return std::isfinite(m) ? m : std::numeric_limits<double>::infinity();
}

// ------------------------------------------------------------------ grids

double GridAxis::value(int index) const {
  const double t = points > 1 ? static_cast<double>(index) / (points - 1) : 0.0;
  switch (scale) {
    case AxisScale::kLinear:
      return lo + t * (hi - lo);
    case AxisScale::kLog:
      return std::exp(std::log(lo) + t * (std::log(hi) - std::log(lo)));
    case AxisScale::kOneMinusLog: {
      const double top = std::log10(1.0 - lo);
      const double bottom = std::log10(1.0 - hi);
      const double v = 1.0 - std::pow(10.0, top + t * (bottom - top));
      return index == 0 ? lo : v;
    }
  }
  return lo;
}

double GridAxis::coordinate(double v) const {
  if (points <= 1) return 0.0;
  double t = 0.0;
  switch (scale) {
    case AxisScale::kLinear:
      t = (v - lo) / (hi - lo);
      break;
    case AxisScale::kLog:
      t = (std::log(v) - std::log(lo)) / (std::log(hi) - std::log(lo));
      break;
    case AxisScale::kOneMinusLog:
      t = (std::log10(1.0 - v) - std::log10(1.0 - lo)) /
          (std::log10(1.0 - hi) - std::log10(1.0 - lo));
      break;
  }
  return t * (points - 1);
}

std::uint64_t TuneGrid::size() const {
  std::uint64_t n = 1;
  for (const auto& axis : axes) n *= static_cast<std::uint64_t>(axis.points);
  return n;
}

std::vector<int> TuneGrid::unravel(std::uint64_t flat) const {
  std::vector<int> index(axes.size());
  for (std::size_t a = axes.size(); a-- > 0;) {
    const auto p = static_cast<std::uint64_t>(axes[a].points);
    index[a] = static_cast<int>(flat % p);
    flat /= p;
  }
  return index;
}

BaselineHyperparams TuneGrid::apply(BaselineHyperparams hp, const std::vector<int>& index) const {
  for (std::size_t a = 0; a < axes.size(); ++a) {
    const double v = axes[a].value(index[a]);
    const std::string& name = axes[a].name;
    if (name == "alpha") {
      hp.alpha = v;
    } else if (name == "beta") {
      hp.beta = v;
    } else if (name == "gamma") {
      hp.gamma = v;
    } else if (name == "beta1") {
      hp.beta1 = v;
    } else if (name == "beta2") {
      hp.beta2 = v;
    } else if (name == "clip") {
      hp.clip = v;
    } else {
      throw ConfigError("grid: unknown hyperparameter axis '" + name + "'");
    }
  }
  return hp;
}

TuneGrid default_grid(BaselineKind kind) {
  const GridAxis alpha{"alpha", 1e-4, 1e1, 50, AxisScale::kLog};
  switch (kind) {
    case BaselineKind::kMomentum:
      return {{alpha, {"beta", 0.0, 0.999, 50, AxisScale::kOneMinusLog}}};
    case BaselineKind::kRmsprop:
      return {{alpha, {"gamma", 0.5, 0.9999, 50, AxisScale::kOneMinusLog}}};
    case BaselineKind::kAdam:
      return {{{"alpha", 1e-4, 1e1, 14, AxisScale::kLog},
               {"beta1", 0.0, 0.999, 14, AxisScale::kOneMinusLog},
               {"beta2", 0.5, 0.9999, 14, AxisScale::kOneMinusLog}}};
    case BaselineKind::kGd:
      return {{{"alpha", 1e-4, 1e1, 2500, AxisScale::kLog}}};
    case BaselineKind::kClippedGd:
      return {{alpha, {"clip", 1e-2, 1e2, 50, AxisScale::kLog}}};
  }
  return {};
}

TuneResult tune(BaselineKind kind, const std::vector<ProblemInstance>& problems,
                const TuneGrid& grid, const TuneOptions& options, RngStream& rng) {
  if (options.n_samples < 1) throw TuningError("tune: n_samples must be >= 1");
  if (problems.empty()) throw TuningError("tune: no problems to score on");
  for (const auto& axis : grid.axes) {
    if (axis.points < 1) throw TuningError("tune: axis '" + axis.name + "' has no points");
  }

  // Candidate draw: a partial Fisher-Yates shuffle of the flat grid while the
  // sample count fits, independent draws otherwise.
  const std::uint64_t cells = grid.size();
  const auto n = static_cast<std::uint64_t>(options.n_samples);
  std::vector<std::uint64_t> flat(n);
  if (n <= cells) {
    std::vector<std::uint64_t> perm(cells);
    std::iota(perm.begin(), perm.end(), 0);
    for (std::uint64_t i = 0; i < n; ++i) {
      const std::uint64_t j = i + rng.below(cells - i);
      std::swap(perm[i], perm[j]);
      flat[i] = perm[i];
    }
  } else {
    for (auto& f : flat) f = rng.below(cells);
  }

  BaselineHyperparams base;
  base.kind = kind;
  TuneResult result;
  result.records.resize(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    result.records[i].index = grid.unravel(flat[i]);
    result.records[i].hp = grid.apply(base, result.records[i].index);
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  if (options.evaluation_order) order = options.evaluation_order(n);

  parallel_for(order.size(), [&](std::size_t slot) {
    TuneRecord& rec = result.records[order[slot]];
    double total = 0.0;
    for (const auto& problem : problems) {
      const double score = meta_objective(run_optimizer(rec.hp, problem, options.steps));
      if (!std::isfinite(score)) {
        total = std::numeric_limits<double>::infinity();
        break;
      }
      total += score;
    }
    rec.score = std::isfinite(total) ? total / static_cast<double>(problems.size()) : total;
  });

  std::size_t best = n;
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(result.records[i].score)) continue;
    if (best == n || result.records[i].score < result.records[best].score) best = i;
  }
  if (best == n) throw TuningError("tune: every candidate diverged for " + to_string(kind));

  result.best = result.records[best].hp;
  result.best_index = result.records[best].index;
  result.best_score = result.records[best].score;
  for (std::size_t a = 0; a < grid.axes.size(); ++a) {
    const int idx = result.best_index[a];
    if (grid.axes[a].points > 1 && (idx == 0 || idx == grid.axes[a].points - 1)) {
      result.best_on_boundary = true;
      result.warnings.push_back(to_string(kind) + ": best " + grid.axes[a].name +
                                " lies on the grid edge (index " + std::to_string(idx) + ")");
    }
  }
  return result;
}

std::pair<double, double> heavy_ball_optimum(double mu, double lipschitz) {
  const double sl = std::sqrt(lipschitz);
  const double sm = std::sqrt(mu);
  const double alpha = std::pow(2.0 / (sl + sm), 2);
  const double beta = std::pow((sl - sm) / (sl + sm), 2);
  return {alpha, beta};
}

}  // namespace lopt
