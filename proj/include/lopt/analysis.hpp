#pragma once

#include <complex>
#include <optional>
#include <string>
#include <vector>

#include "lopt/baselines.hpp"
#include "lopt/dynamics.hpp"
#include "lopt/spectral.hpp"

namespace lopt {

// ------------------------------------------------------- update functions

struct UpdateCurve {
  Vec state;
  Vec gradients;  ///< strictly increasing
  Vec updates;    ///< w^T F(h, g_j)
  double slope_at_zero = 0.0;
};

/// One-step projected update at every grid point; the state is not advanced.
UpdateCurve update_function(const StateDynamics& dyn, const Vec& h, const Vec& grid);

/// -d(w^T F(h, g))/dg at g = 0. Positive values mean descent.
double effective_lr(const StateDynamics& dyn, const Vec& h);

/// Gradient magnitudes beyond which the local slope of the update curve has
/// fallen below `fraction` of its slope at zero (first crossing on each
/// side). Missing crossings are reported as +/-inf.
struct SaturationThresholds {
  double negative = -INFINITY;
  double positive = INFINITY;
};
SaturationThresholds saturation_thresholds(const UpdateCurve& curve, double fraction = 0.5);

/// R^2 of a least-squares line through the points with |g| <= half_width.
double linear_fit_r2(const UpdateCurve& curve, double half_width);

// ------------------------------------------------------------ fixed points

enum class FixedPointClass { kFixed, kSlow, kRejected };
std::string to_string(FixedPointClass c);

struct FixedPointOptions {
  /// Thresholds on q scale with the state dimension n.
  double tol_fixed_per_dim = 1e-12;
  double tol_slow_per_dim = 1e-6;
  double dedup_radius = 1e-4;
  long max_iterations = 10000;
  /// Std of the Gaussian jitter added to seed states.
  double seed_jitter = 0.01;
  std::uint64_t seed = 0;
};

struct FixedPointRecord {
  Vec state;
  double input = 0.0;
  double residual = 0.0;  ///< q = 1/2 ||F(h, g) - h||^2
  FixedPointClass classification = FixedPointClass::kRejected;
  double readout = 0.0;   ///< w^T h
  long iterations = 0;
};

struct FixedPointSearch {
  /// Accepted (fixed or slow) points after deduplication.
  std::vector<FixedPointRecord> records;
  long seeds = 0;
  long converged_fixed = 0;
  long converged_slow = 0;
  long rejected = 0;
  double best_residual = INFINITY;
};

double fixed_point_residual(const StateDynamics& dyn, const Vec& h, double g);
FixedPointClass classify_residual(double q, long n, const FixedPointOptions& options);

/// Minimizes q from a single starting state with damped Gauss-Newton steps
/// and backtracking; the gradient of q is (J - I)^T (F - h).
FixedPointRecord minimize_residual(const StateDynamics& dyn, double g, const Vec& start,
                                   const FixedPointOptions& options);

/// Searches from every seed (jittered), classifies, and deduplicates. No
/// converged seed yields an empty record list, not an error.
FixedPointSearch find_fixed_points(const StateDynamics& dyn, double g,
                                   const std::vector<Vec>& seeds,
                                   const FixedPointOptions& options = {});

/// Zero-input convergence point: long autonomous rollout from h0 followed by
/// residual minimization.
FixedPointRecord convergence_point(const StateDynamics& dyn, long steps = 2000,
                                   const FixedPointOptions& options = {});

// ----------------------------------------------------------- linearization

struct LinearizedModel {
  Vec h_star;
  double g_star = 0.0;
  Vec base;           ///< F(h*, g*)
  Mat jacobian;       ///< dF/dh
  Vec input_jacobian; ///< dF/dg
  Vec readout;
  Vec initial_state;
  EigenDecomp decomp;
  CVec beta;   ///< eigenvalues
  CVec alpha;  ///< l_j^T dF/dg
  CVec rho;    ///< w^T r_j
  CVec eta;    ///< -rho_j alpha_j
  CVec offset; ///< l_j^T (F(h*, g*) - h*), the constant of the modal recursion
  bool non_normal_warning = false;

  long modes() const { return beta.size(); }
  /// F(h*, g*) + J (h - h*) + dF/dg (g - g*).
  Vec predict_state(const Vec& h, double g) const;
  /// w^T predict_state(h, g).
  double predict_update(const Vec& h, double g) const;
  /// Same quantity assembled mode by mode.
  double modal_update(const Vec& h, double g) const;
};

LinearizedModel linearize(const StateDynamics& dyn, const Vec& h_star, double g_star,
                          double biorthogonality_tolerance = 1e-6);

struct ModeRow {
  long mode = 0;  ///< index into LinearizedModel
  std::complex<double> eigenvalue;
  double magnitude = 0.0;
  double angle = 0.0;
  std::complex<double> eta;
};

/// Modes sorted by |lambda| descending (ties by index).
std::vector<ModeRow> modal_spectrum_report(const LinearizedModel& model);

struct ReducedRollout {
  TrainingCurve curve;
  std::vector<Vec> params;
};

/// Runs v_j' = beta_j v_j + alpha_j (g - g*) + const_j over the selected
/// modes, moving each coordinate by w^T h* + sum_j rho_j v_j'. Conjugate
/// pairs are advanced once in complex arithmetic and contribute twice the
/// real part, which is the real 2x2 block recursion. SelectionError if the selection is
/// not closed under conjugation.
ReducedRollout reduced_mode_rollout(const LinearizedModel& model, const std::vector<long>& modes,
                                    const ProblemInstance& instance, long steps);

/// Mode with the largest total response |eta_j| / (1 - |lambda_j|) to a
/// constant unit gradient; used to pick "the momentum mode".
long dominant_mode(const LinearizedModel& model);
/// Adds the conjugate partner of a complex mode.
std::vector<long> conjugate_closure(const LinearizedModel& model, std::vector<long> modes);

// -------------------------------------------------------------- schedules

struct AutonomousTrace {
  std::vector<Vec> states;        ///< h^0..h^K under zero input
  std::vector<double> effective_lr;  ///< at h^0..h^K
  std::vector<double> readout_magnitude;  ///< |w^T h^{k+1}|, k = 0..K-1
};

AutonomousTrace autonomous_rollout(const StateDynamics& dyn, long steps);

struct ScheduleSubspace {
  Mat basis;           ///< n x 2
  Mat projected;       ///< (K+1) x 2, centered coordinates
  Vec explained_variance;
  double total_variance = 0.0;
  std::vector<double> angle_to_readout;  ///< radians in [0, pi/2]
  Mat slow_points;     ///< projected slow/fixed points (m x 2)
  bool degenerate = false;
};

ScheduleSubspace schedule_subspace(const AutonomousTrace& trace, const Vec& readout,
                                   const std::vector<FixedPointRecord>& slow_points = {});

// ---------------------------------------------------------------- S-curve

struct SCurveEntry {
  double g = 0.0;
  FixedPointRecord record;
  double effective_lr = 0.0;
  bool converged = false;
};

struct SCurve {
  FixedPointRecord zero_point;
  std::vector<SCurveEntry> negative_arm;  ///< ordered by increasing |g|
  std::vector<SCurveEntry> positive_arm;
  std::vector<SCurveEntry> zero_entries;  ///< g values exactly 0
  double success_rate = 0.0;
  /// Spearman correlation of eta vs |g| per arm (NaN with < 3 points).
  double spearman_negative = NAN;
  double spearman_positive = NAN;
};

/// Continuation along both arms from the zero-input fixed point.
SCurve s_curve(const StateDynamics& dyn, const std::vector<double>& g_values,
               const FixedPointRecord& zero_point, const FixedPointOptions& options = {});

double spearman(const std::vector<double>& a, const std::vector<double>& b);

// ------------------------------------------------------- state statistics

/// Per step, trace of the covariance of h^k pooled over problems and
/// coordinates, with the n-1 (unbiased) denominator.
std::vector<double> state_variance(const std::vector<RolloutTrace>& traces);

struct Histogram {
  Vec edges;  ///< bins + 1
  Vec mass;   ///< sums to 1
  long count = 0;
};

/// Gradients of all traces on a symmetric range [-m, m], m = max |g|
/// (1 if every gradient is 0), with an odd bin count so 0 is a bin center.
Histogram gradient_histogram(const std::vector<RolloutTrace>& traces, long bins = 101);

/// Fraction of encountered gradients outside the saturation thresholds.
double saturated_fraction(const std::vector<RolloutTrace>& traces,
                          const SaturationThresholds& thresholds);

}  // namespace lopt
