#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "lopt/baselines.hpp"
#include "lopt/meta_train.hpp"
#include "lopt/tasks.hpp"

namespace lopt {

struct TuneSettings {
  std::vector<BaselineKind> kinds{BaselineKind::kGd, BaselineKind::kMomentum,
                                  BaselineKind::kRmsprop, BaselineKind::kAdam};
  long n_samples = 2500;
  long n_problems = 32;
  long steps = 200;
};

struct EvaluateSettings {
  long n_eval_seeds = 128;  ///< loss curves
  long n_meta_eval = 64;    ///< meta-objective bars
  long steps = 200;
};

struct AnalysisSettings {
  long n_problems = 8;            ///< analysis-family problems for traces
  long steps = 200;
  long fixed_point_seeds = 64;
  long update_fn_points = 201;
  /// Half width of the update-function grid; 0 uses the largest observed |g|.
  double gradient_range = 0.0;
  long s_curve_points = 16;       ///< per arm
  long autonomous_steps = 200;
  long n_variance_problems = 64;
  /// Rollout length for the variance mode; states need longer than the
  /// unroll to settle on slow tasks.
  long variance_steps = 1000;
  long histogram_bins = 101;
  double saturation_fraction = 0.5;
};

struct ExperimentConfig {
  TaskSpec task{};
  TuneSettings tune{};
  MetaConfig meta{};
  EvaluateSettings evaluate{};
  AnalysisSettings analysis{};
  std::string outdir = "runs";
  std::uint64_t seed = 0;
  /// Explicit checkpoint for evaluate/analyze; empty means the meta-train output.
  std::string checkpoint;

  void validate() const;
};

/// Parses a JSON config. Missing keys keep their defaults, with the
/// meta block starting from the desk profile of the task. Unknown keys and
/// type mismatches raise ConfigError.
ExperimentConfig parse_experiment_config(const std::string& json_text);
/// Canonical JSON of the effective config (sorted keys, fixed formatting).
std::string experiment_config_json(const ExperimentConfig& config);

inline const std::vector<std::string>& analysis_modes() {
  static const std::vector<std::string> modes{"update-fn", "fixed-points", "momentum-modes",
                                              "reduced-rollout", "schedule", "s-curve",
                                              "variance", "grad-hist"};
  return modes;
}

/// Entry point of the `lopt` executable. Exit codes: 0 success, 2 config
/// error, 3 compute error, 4 missing artifact.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace lopt
