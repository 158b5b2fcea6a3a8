#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>

#include "lopt/analysis.hpp"
#include "lopt/parallel.hpp"
#include "lopt/rng.hpp"

namespace lopt {
namespace {

// Below this q the state is as exact as float64 allows for unit-scale states.
constexpr double kResidualFloor = 1e-32;
constexpr double kMaxDamping = 1e12;

}  // namespace

std::string to_string(FixedPointClass c) {
  switch (c) {
    case FixedPointClass::kFixed:
      return "fixed";
    case FixedPointClass::kSlow:
      return "slow";
    case FixedPointClass::kRejected:
      return "rejected";
  }
  return "unknown";
}

double fixed_point_residual(const StateDynamics& dyn, const Vec& h, double g) {
  return 0.5 * (dyn.step(h, g) - h).squaredNorm();
}

FixedPointClass classify_residual(double q, long n, const FixedPointOptions& options) {
  if (!std::isfinite(q)) return FixedPointClass::kRejected;
  const double scale = static_cast<double>(n);
  if (q < options.tol_fixed_per_dim * scale) return FixedPointClass::kFixed;
  if (q < options.tol_slow_per_dim * scale) return FixedPointClass::kSlow;
  return FixedPointClass::kRejected;
}

FixedPointRecord minimize_residual(const StateDynamics& dyn, double g, const Vec& start,
                                   const FixedPointOptions& options) {
  const long n = dyn.state_dim();
  Vec h = start;
  Vec r = dyn.step(h, g) - h;
  double q = 0.5 * r.squaredNorm();
  double damping = 1e-3;
  long it = 0;
  bool need_jacobian = true;
  Mat a;
  Vec grad;
  Mat normal;
  for (; it < options.max_iterations && q > kResidualFloor; ++it) {
    if (need_jacobian) {
      a = dyn.state_jacobian(h, g);
      a.diagonal().array() -= 1.0;
      grad = a.transpose() * r;
      normal = a.transpose() * a;
      need_jacobian = false;
    }
    Mat system = normal;
    system.diagonal().array() += damping;
    const Vec delta = -system.ldlt().solve(grad);
    const Vec candidate = h + delta;
    const Vec r_new = dyn.step(candidate, g) - candidate;
    const double q_new = 0.5 * r_new.squaredNorm();
    if (std::isfinite(q_new) && q_new < q) {
      h = candidate;
      r = r_new;
      q = q_new;
      damping = std::max(damping / 3.0, 1e-15);
      need_jacobian = true;
    } else {
      damping *= 4.0;
      if (damping > kMaxDamping) break;
    }
  }

  FixedPointRecord rec;
  rec.state = h;
  rec.input = g;
  rec.residual = fixed_point_residual(dyn, h, g);
  rec.classification = classify_residual(rec.residual, n, options);
  rec.readout = dyn.readout().dot(h);
  rec.iterations = it;
  return rec;
}

FixedPointSearch find_fixed_points(const StateDynamics& dyn, double g,
                                   const std::vector<Vec>& seeds,
                                   const FixedPointOptions& options) {
  FixedPointSearch out;
  out.seeds = static_cast<long>(seeds.size());
  std::vector<FixedPointRecord> results(seeds.size());
  const RngStream base(options.seed, 31);
  parallel_for(seeds.size(), [&](std::size_t i) {
    Vec start = seeds[i];
    if (options.seed_jitter > 0.0) {
      RngStream rng = base.split(i);
      for (long j = 0; j < start.size(); ++j) start(j) += options.seed_jitter * rng.normal();
    }
    results[i] = minimize_residual(dyn, g, start, options);
  });

  for (auto& rec : results) {
    out.best_residual = std::min(out.best_residual, rec.residual);
    switch (rec.classification) {
      case FixedPointClass::kFixed:
        ++out.converged_fixed;
        break;
      case FixedPointClass::kSlow:
        ++out.converged_slow;
        break;
      case FixedPointClass::kRejected:
        ++out.rejected;
        continue;
    }
    bool merged = false;
    for (auto& kept : out.records) {
      if ((kept.state - rec.state).norm() < options.dedup_radius) {
        if (rec.residual < kept.residual) kept = rec;
        merged = true;
        break;
      }
    }
    if (!merged) out.records.push_back(rec);
  }
  return out;
}

FixedPointRecord convergence_point(const StateDynamics& dyn, long steps,
                                   const FixedPointOptions& options) {
  Vec h = dyn.initial_state();
  for (long k = 0; k < steps; ++k) h = dyn.step(h, 0.0);
  return minimize_residual(dyn, 0.0, h, options);
}

}  // namespace lopt
