#include <algorithm>
#include <cmath>
#include <numeric>

#include "internal.hpp"
#include "lopt/analysis.hpp"
#include "lopt/checkpoint.hpp"
#include "lopt/error.hpp"
#include "lopt/parallel.hpp"
#include "lopt/rollout.hpp"

namespace lopt::cli {

namespace {

// Hash of everything that determines a stage's outputs. Paths are excluded
// so that moving a run directory does not invalidate it.
std::string input_hash(const RunContext& run, const std::vector<std::string>& extra) {
  json c = config_to_json(run.config);
  c.erase("outdir");
  c.erase("checkpoint");
  std::string text = c.dump() + "\n" + kToolVersion;
  for (const auto& e : extra) text += "\n" + e;
  return sha256_hex(text);
}

std::string fmt(double v) { return format_double(v); }

struct MeanStderr {
  double mean = NAN;
  double stderr_ = NAN;
  long n = 0;
};

MeanStderr mean_stderr(const std::vector<double>& v) {
  MeanStderr out;
  out.n = static_cast<long>(v.size());
  if (v.empty()) return out;
  out.mean = std::accumulate(v.begin(), v.end(), 0.0) / out.n;
  if (out.n < 2) {
    out.stderr_ = 0.0;
    return out;
  }
  double ss = 0.0;
  for (double x : v) ss += (x - out.mean) * (x - out.mean);
  out.stderr_ = std::sqrt(ss / (out.n - 1) / out.n);
  return out;
}

json hp_to_json(const BaselineHyperparams& hp) {
  json j{{"kind", to_string(hp.kind)}, {"alpha", hp.alpha}, {"beta", hp.beta},
         {"gamma", hp.gamma},          {"beta1", hp.beta1}, {"beta2", hp.beta2},
         {"eps", hp.eps}};
  if (hp.clip) j["clip"] = *hp.clip;
  return j;
}

BaselineHyperparams hp_from_json(const json& j) {
  BaselineHyperparams hp;
  hp.kind = parse_baseline_kind(j.at("kind").get<std::string>());
  hp.alpha = j.at("alpha").get<double>();
  hp.beta = j.at("beta").get<double>();
  hp.gamma = j.at("gamma").get<double>();
  hp.beta1 = j.at("beta1").get<double>();
  hp.beta2 = j.at("beta2").get<double>();
  hp.eps = j.at("eps").get<double>();
  if (j.contains("clip")) hp.clip = j.at("clip").get<double>();
  return hp;
}

double hp_value(const BaselineHyperparams& hp, const std::string& axis) {
  if (axis == "alpha") return hp.alpha;
  if (axis == "beta") return hp.beta;
  if (axis == "gamma") return hp.gamma;
  if (axis == "beta1") return hp.beta1;
  if (axis == "beta2") return hp.beta2;
  if (axis == "clip") return hp.clip.value_or(NAN);
  return NAN;
}

// Scores of a 2-D slice of the tuning grid, minimized over any further axes.
CsvTable tune_heatmap(const TuneGrid& grid, const TuneResult& r) {
  const GridAxis& ax = grid.axes[0];
  const GridAxis& ay = grid.axes[1];
  Mat best = Mat::Constant(ay.points, ax.points, INFINITY);
  Mat seen = Mat::Zero(ay.points, ax.points);
  for (const auto& rec : r.records) {
    const int i = rec.index[0], j = rec.index[1];
    seen(j, i) = 1.0;
    if (rec.score < best(j, i)) best(j, i) = rec.score;
  }
  CsvTable t({ax.name, ay.name, "x_index", "y_index", "score", "log10_score"});
  for (int j = 0; j < ay.points; ++j) {
    for (int i = 0; i < ax.points; ++i) {
      const double s = seen(j, i) != 0.0 ? best(j, i) : NAN;
      const double l = std::isfinite(s) && s > 0.0 ? std::log10(s) : NAN;
      t.add_row({ax.value(i), ay.value(j), static_cast<double>(i), static_cast<double>(j), s, l});
    }
  }
  return t;
}

LearnedOptimizerCheckpoint load_required_checkpoint(const RunContext& run, fs::path* used) {
  fs::path path = run.config.checkpoint.empty()
                      ? run.task_dir() / "meta-train" / "checkpoint.json"
                      : fs::path(run.config.checkpoint);
  if (!fs::exists(path)) {
    throw MissingArtifactError("checkpoint not found at " + path.string() +
                               "; run `lopt meta-train` or pass --checkpoint");
  }
  if (used) *used = path;
  return load_checkpoint(path);
}

TrainingCurve to_curve(const RolloutTrace& trace) {
  TrainingCurve c;
  c.losses = trace.losses;
  c.diverged = trace.diverged;
  return c;
}

}  // namespace

// ------------------------------------------------------------------- tune

void cmd_tune(RunContext& run) {
  const ExperimentConfig& c = run.config;
  Manifest manifest(c.outdir);
  Stage stage(run, manifest, "tune", input_hash(run, {"tune"}));
  if (!run.force && stage.up_to_date()) {
    *run.out << "tune: outputs up to date, skipping\n";
    return;
  }
  TaskSampler sampler(c.task);
  const auto problems = sampler.problems(family::kTune, 0, c.tune.n_problems);
  json best = json::object();
  for (BaselineKind kind : c.tune.kinds) {
    const TuneGrid grid = default_grid(kind);
    TuneOptions options;
    options.n_samples = c.tune.n_samples;
    options.steps = c.tune.steps;
    RngStream rng = RngStream(c.seed, 0x74756e65).split(static_cast<std::uint64_t>(kind));
    const TuneResult r = tune(kind, problems, grid, options, rng);
    const std::string name = to_string(kind);

    std::vector<std::string> header{"sample"};
    for (const auto& a : grid.axes) header.push_back(a.name);
    for (const auto& a : grid.axes) header.push_back(a.name + "_index");
    header.push_back("score");
    CsvTable samples(header);
    for (std::size_t s = 0; s < r.records.size(); ++s) {
      std::vector<double> row{static_cast<double>(s)};
      for (const auto& a : grid.axes) row.push_back(hp_value(r.records[s].hp, a.name));
      for (int idx : r.records[s].index) row.push_back(idx);
      row.push_back(r.records[s].score);
      samples.add_row(row);
    }
    stage.write_table(name + "_samples", samples);

    if (grid.axes.size() >= 2) {
      stage.write_table(name + "_heatmap", tune_heatmap(grid, r));
    } else {
      CsvTable scan({grid.axes[0].name, "score"});
      for (const auto& rec : r.records) scan.add_row({hp_value(rec.hp, grid.axes[0].name), rec.score});
      stage.write_table(name + "_scan", scan);
    }
    for (const auto& w : r.warnings) *run.out << "WARNING: " << w << "\n";
    json entry = hp_to_json(r.best);
    entry["score"] = r.best_score;
    entry["on_boundary"] = r.best_on_boundary;
    entry["warnings"] = r.warnings;
    best[name] = entry;
    *run.out << "tune: " << name << " best score " << fmt(r.best_score) << "\n";
  }
  stage.write_json("best.json", best);
  stage.commit();
}

// -------------------------------------------------------------- meta-train

void cmd_meta_train(RunContext& run) {
  const ExperimentConfig& c = run.config;
  Manifest manifest(c.outdir);
  Stage stage(run, manifest, "meta-train", input_hash(run, {"meta-train"}));
  if (!run.force && stage.up_to_date()) {
    *run.out << "meta-train: outputs up to date, skipping\n";
    return;
  }
  const long report_every = std::max<long>(1, c.meta.meta_steps / 40);
  const TrainResult result = train(
      c.meta,
      [&](const LearnedOptimizerCheckpoint& ck) {
        stage.write("checkpoint_step" + std::to_string(ck.meta.meta_step) + ".json",
                    checkpoint_to_json(ck));
      },
      [&](const MetaStepDiagnostics& d) {
        if (d.step % report_every == 0 || d.step + 1 == c.meta.meta_steps) {
          *run.out << "meta-train: step " << d.step << " objective " << fmt(d.meta_objective)
                   << " grad_norm " << fmt(d.grad_norm) << "\n" << std::flush;
        }
      });

  CsvTable log({"step", "meta_objective", "grad_norm", "clipped_grad_norm", "learning_rate",
                "diverged"});
  for (const auto& d : result.log) {
    log.add_row({static_cast<double>(d.step), d.meta_objective, d.grad_norm, d.clipped_grad_norm,
                 d.learning_rate, static_cast<double>(d.diverged)});
  }
  stage.write_table("training_log", log);
  stage.write("checkpoint.json", checkpoint_to_json(result.checkpoint));

  json summary{{"meta_steps", static_cast<long>(result.log.size())}};
  if (!result.log.empty()) {
    // The batch objective is noisy; the final value averages the last 5% of steps.
    const std::size_t window = std::max<std::size_t>(1, result.log.size() / 20);
    double tail = 0.0;
    for (std::size_t i = result.log.size() - window; i < result.log.size(); ++i) {
      tail += result.log[i].meta_objective;
    }
    tail /= static_cast<double>(window);
    summary["initial_objective"] = result.log.front().meta_objective;
    summary["final_objective"] = tail;
    summary["final_window"] = window;
    summary["final_over_initial"] = tail / result.log.front().meta_objective;
  }
  stage.write_json("summary.json", summary);
  stage.commit();
}

// ---------------------------------------------------------------- evaluate

void cmd_evaluate(RunContext& run) {
  const ExperimentConfig& c = run.config;
  const fs::path best_path = run.task_dir() / "tune" / "best.json";
  if (!fs::exists(best_path)) {
    throw MissingArtifactError("evaluate: tuned baselines not found, expected " +
                               best_path.string() + " (run `lopt tune` first)");
  }
  const std::string best_text = read_file(best_path);
  const json best = json::parse(best_text);

  std::optional<LearnedOptimizerCheckpoint> ckpt;
  std::string ckpt_digest = "none";
  const fs::path default_ckpt = run.task_dir() / "meta-train" / "checkpoint.json";
  if (!c.checkpoint.empty() || fs::exists(default_ckpt)) {
    fs::path used;
    ckpt = load_required_checkpoint(run, &used);
    ckpt_digest = sha256_hex(read_file(used));
  } else {
    *run.out << "evaluate: no checkpoint, comparing baselines only\n";
  }

  Manifest manifest(c.outdir);
  Stage stage(run, manifest, "evaluate",
              input_hash(run, {"evaluate", sha256_hex(best_text), ckpt_digest}));
  if (!run.force && stage.up_to_date()) {
    *run.out << "evaluate: outputs up to date, skipping\n";
    return;
  }

  struct Entry {
    std::string name;
    std::function<TrainingCurve(const ProblemInstance&)> run;
  };
  std::vector<Entry> optimizers;
  for (const auto& [name, hpj] : best.items()) {
    const BaselineHyperparams hp = hp_from_json(hpj);
    optimizers.push_back({name, [hp, &c](const ProblemInstance& p) {
                            return run_optimizer(hp, p, c.evaluate.steps);
                          }});
  }
  if (ckpt) {
    optimizers.push_back({"learned", [&](const ProblemInstance& p) {
                            return to_curve(rollout(*ckpt, p, c.evaluate.steps));
                          }});
  }

  const long n = std::max(c.evaluate.n_eval_seeds, c.evaluate.n_meta_eval);
  const auto problems = TaskSampler(c.task).problems(family::kTest, 0, n);
  std::vector<std::vector<TrainingCurve>> curves(optimizers.size());
  for (std::size_t o = 0; o < optimizers.size(); ++o) {
    curves[o].resize(problems.size());
    parallel_for(problems.size(), [&](std::size_t i) { curves[o][i] = optimizers[o].run(problems[i]); });
  }

  std::vector<std::string> header{"step"};
  for (const auto& o : optimizers) {
    header.push_back(o.name + "_mean");
    header.push_back(o.name + "_stderr");
  }
  CsvTable loss_table(header);
  for (long k = 0; k <= c.evaluate.steps; ++k) {
    std::vector<double> row{static_cast<double>(k)};
    for (std::size_t o = 0; o < optimizers.size(); ++o) {
      std::vector<double> v;
      for (long i = 0; i < c.evaluate.n_eval_seeds; ++i) {
        const auto& cur = curves[o][static_cast<std::size_t>(i)];
        if (!cur.diverged && k < static_cast<long>(cur.losses.size())) {
          v.push_back(cur.losses[static_cast<std::size_t>(k)]);
        }
      }
      const auto ms = mean_stderr(v);
      row.push_back(ms.mean);
      row.push_back(ms.stderr_);
    }
    loss_table.add_row(row);
  }
  stage.write_table("loss_curves", loss_table);

  CsvTable bars({"index", "optimizer", "meta_objective", "stderr", "n", "diverged"});
  json comparison = json::object();
  for (std::size_t o = 0; o < optimizers.size(); ++o) {
    std::vector<double> v;
    long diverged = 0;
    for (long i = 0; i < c.evaluate.n_meta_eval; ++i) {
      const auto& cur = curves[o][static_cast<std::size_t>(i)];
      v.push_back(meta_objective(cur));
      diverged += cur.diverged ? 1 : 0;
    }
    const auto ms = mean_stderr(v);
    bars.add_text_row({std::to_string(o), optimizers[o].name, fmt(ms.mean), fmt(ms.stderr_),
                       std::to_string(ms.n), std::to_string(diverged)});
    comparison[optimizers[o].name] = {{"meta_objective", ms.mean},
                                      {"stderr", ms.stderr_},
                                      {"diverged", diverged}};
  }
  stage.write_table("meta_objective", bars);

  json summary{{"optimizers", comparison}, {"n_meta_eval", c.evaluate.n_meta_eval},
               {"n_eval_seeds", c.evaluate.n_eval_seeds}};
  std::string best_name;
  double best_score = INFINITY;
  for (const auto& [name, v] : comparison.items()) {
    if (name == "learned") continue;
    const double s = v["meta_objective"].is_number() ? v["meta_objective"].get<double>() : INFINITY;
    if (best_name.empty() || s < best_score) {
      best_name = name;
      best_score = s;
    }
  }
  summary["best_baseline"] = best_name;
  if (ckpt && comparison.contains("momentum")) {
    summary["learned_over_momentum"] = comparison["learned"]["meta_objective"].get<double>() /
                                       comparison["momentum"]["meta_objective"].get<double>();
  }
  stage.write_json("comparison.json", summary);
  stage.commit();
  for (const auto& [name, v] : comparison.items()) {
    *run.out << "evaluate: " << name << " meta-objective " << v["meta_objective"].dump() << "\n";
  }
}

// ----------------------------------------------------------------- analyze

namespace {

struct AnalysisContext {
  const ExperimentConfig& config;
  LearnedOptimizerCheckpoint ckpt;
  GruDynamics dyn;
  std::vector<RolloutTrace> traces;
  double g_range = 1.0;
  FixedPointOptions fp;
  FixedPointRecord zero;

  AnalysisContext(const ExperimentConfig& c, LearnedOptimizerCheckpoint k)
      : config(c), ckpt(std::move(k)), dyn(ckpt) {
    const auto problems = TaskSampler(c.task).problems(family::kAnalysis, 0, c.analysis.n_problems);
    traces.resize(problems.size());
    parallel_for(problems.size(),
                 [&](std::size_t i) { traces[i] = rollout(ckpt, problems[i], c.analysis.steps, true); });
    double gmax = 0.0;
    for (const auto& t : traces) {
      for (const auto& g : t.gradients) {
        if (g.allFinite()) gmax = std::max(gmax, g.cwiseAbs().maxCoeff());
      }
    }
    g_range = c.analysis.gradient_range > 0.0 ? c.analysis.gradient_range
                                              : (gmax > 0.0 ? gmax : 1.0);
    fp.seed = c.seed;
    zero = convergence_point(dyn, 2000, fp);
  }

  Vec grid() const {
    return Vec::LinSpaced(config.analysis.update_fn_points, -g_range, g_range);
  }
  SaturationThresholds thresholds() const {
    return saturation_thresholds(update_function(dyn, zero.state, grid()),
                                 config.analysis.saturation_fraction);
  }
  double max_trajectory_readout() const {
    double m = 0.0;
    for (const auto& t : traces) {
      for (const auto& u : t.updates) {
        if (u.allFinite()) m = std::max(m, u.cwiseAbs().maxCoeff());
      }
    }
    return m;
  }
};

json complex_json(std::complex<double> z) { return json::array({z.real(), z.imag()}); }

void analyze_update_fn(AnalysisContext& a, Stage& s) {
  const Vec grid = a.grid();
  const auto at_init = update_function(a.dyn, a.dyn.initial_state(), grid);
  const auto at_fixed = update_function(a.dyn, a.zero.state, grid);
  CsvTable t({"g", "update_initial", "update_fixed_point"});
  for (long j = 0; j < grid.size(); ++j) t.add_row({grid(j), at_init.updates(j), at_fixed.updates(j)});
  s.write_table("update_function", t);
  const auto th = saturation_thresholds(at_fixed, a.config.analysis.saturation_fraction);
  s.write_json("summary.json",
               {{"gradient_range", a.g_range},
                {"effective_lr_initial", -at_init.slope_at_zero},
                {"effective_lr_fixed_point", -at_fixed.slope_at_zero},
                {"threshold_negative", th.negative},
                {"threshold_positive", th.positive},
                {"linear_r2_central_tenth", linear_fit_r2(at_fixed, a.g_range / 10.0)},
                {"saturated_fraction", saturated_fraction(a.traces, th)}});
}

void analyze_fixed_points(AnalysisContext& a, Stage& s) {
  RngStream rng(a.config.seed, 0x66707473);
  std::vector<Vec> seeds;
  for (long i = 0; i < a.config.analysis.fixed_point_seeds; ++i) {
    const auto& t = a.traces[rng.below(a.traces.size())];
    const Mat& h = t.states[rng.below(t.states.size())];
    seeds.push_back(h.col(static_cast<long>(rng.below(static_cast<std::uint64_t>(h.cols())))));
  }
  const auto found = find_fixed_points(a.dyn, 0.0, seeds, a.fp);
  CsvTable t({"id", "classification", "residual", "readout", "iterations", "distance_to_convergence_point"});
  long distinct_fixed = 0, distinct_slow = 0;
  for (std::size_t i = 0; i < found.records.size(); ++i) {
    const auto& r = found.records[i];
    (r.classification == FixedPointClass::kFixed ? distinct_fixed : distinct_slow) += 1;
    t.add_text_row({std::to_string(i), to_string(r.classification), fmt(r.residual), fmt(r.readout),
                    std::to_string(r.iterations), fmt((r.state - a.zero.state).norm())});
  }
  s.write_table("fixed_points", t);
  const double max_readout = a.max_trajectory_readout();
  const double fixed_readout = std::abs(a.zero.readout);
  s.write_json("summary.json",
               {{"seeds", found.seeds},
                {"converged_fixed", found.converged_fixed},
                {"converged_slow", found.converged_slow},
                {"rejected", found.rejected},
                {"distinct_fixed", distinct_fixed},
                {"distinct_slow", distinct_slow},
                {"convergence_point_residual", a.zero.residual},
                {"convergence_point_class", to_string(a.zero.classification)},
                {"fixed_point_readout", fixed_readout},
                {"max_trajectory_readout", max_readout},
                {"readout_ratio", max_readout > 0.0 ? fixed_readout / max_readout : NAN}});
}

void analyze_modes(AnalysisContext& a, Stage& s) {
  const auto model = linearize(a.dyn, a.zero.state, 0.0);
  const auto rows = modal_spectrum_report(model);
  CsvTable modes({"mode", "real", "imag", "magnitude", "angle", "timescale", "eta_real", "eta_imag",
                  "eta_abs"});
  CsvTable eig({"mode", "real", "imag"});
  CsvTable ts({"mode", "timescale", "eta_abs"});
  for (const auto& r : rows) {
    const double tau = r.magnitude < 1.0 ? -1.0 / std::log(r.magnitude) : INFINITY;
    const double m = static_cast<double>(r.mode);
    modes.add_row({m, r.eigenvalue.real(), r.eigenvalue.imag(), r.magnitude, r.angle, tau,
                   r.eta.real(), r.eta.imag(), std::abs(r.eta)});
    eig.add_row({m, r.eigenvalue.real(), r.eigenvalue.imag()});
    ts.add_row({m, tau, std::abs(r.eta)});
  }
  s.write_table("modes", modes);
  s.write_table("eigenvalues", eig);
  s.write_table("timescales", ts);
  const long d = dominant_mode(model);
  s.write_json("summary.json",
               {{"dominant_mode", d},
                {"dominant_eigenvalue", complex_json(model.beta(d))},
                {"dominant_eta", complex_json(model.eta(d))},
                {"spectral_radius", rows.empty() ? 0.0 : rows.front().magnitude},
                {"non_normal_warning", model.non_normal_warning}});
}

void analyze_reduced(AnalysisContext& a, Stage& s) {
  const auto model = linearize(a.dyn, a.zero.state, 0.0);
  const auto selection = conjugate_closure(model, {dominant_mode(model)});
  const auto problems =
      TaskSampler(a.config.task).problems(family::kAnalysis, 0, a.config.analysis.n_problems);
  const long steps = a.config.analysis.steps;
  std::vector<std::vector<double>> full(problems.size()), reduced(problems.size());
  parallel_for(problems.size(), [&](std::size_t i) {
    full[i] = rollout(a.ckpt, problems[i], steps).losses;
    reduced[i] = reduced_mode_rollout(model, selection, problems[i], steps).curve.losses;
  });
  CsvTable t({"step", "full_loss", "reduced_loss", "n"});
  double diff = 0.0, total = 0.0;
  for (long k = 0; k <= steps; ++k) {
    double f = 0.0, r = 0.0;
    long n = 0;
    for (std::size_t i = 0; i < problems.size(); ++i) {
      const auto uk = static_cast<std::size_t>(k);
      if (uk < full[i].size() && uk < reduced[i].size() && std::isfinite(full[i][uk]) &&
          std::isfinite(reduced[i][uk])) {
        f += full[i][uk];
        r += reduced[i][uk];
        ++n;
      }
    }
    const double fm = n ? f / n : NAN, rm = n ? r / n : NAN;
    t.add_row({static_cast<double>(k), fm, rm, static_cast<double>(n)});
    if (n) {
      diff += std::abs(fm - rm);
      total += std::abs(fm);
    }
  }
  s.write_table("reduced_rollout", t);
  json eigs = json::array();
  for (long m : selection) eigs.push_back(complex_json(model.beta(m)));
  s.write_json("summary.json", {{"modes", selection},
                                {"eigenvalues", eigs},
                                {"relative_area_between_curves", total > 0.0 ? diff / total : NAN}});
}

void analyze_schedule(AnalysisContext& a, Stage& s) {
  const auto trace = autonomous_rollout(a.dyn, a.config.analysis.autonomous_steps);
  const auto sub = schedule_subspace(trace, a.dyn.readout(), {a.zero});
  CsvTable fps({"pc1", "pc2"});
  for (long i = 0; i < sub.slow_points.rows(); ++i) {
    fps.add_row({sub.slow_points(i, 0), sub.slow_points(i, 1)});
  }
  s.write_table("schedule_fixed_points", fps);
  CsvTable proj({"step", "pc1", "pc2"});
  for (long k = 0; k < sub.projected.rows(); ++k) {
    proj.add_row({static_cast<double>(k), sub.projected(k, 0), sub.projected(k, 1)});
  }
  s.write_table("schedule_projection", proj);
  CsvTable lr({"step", "effective_lr", "readout_magnitude"});
  for (std::size_t k = 1; k < trace.states.size(); ++k) {
    lr.add_row({static_cast<double>(k), trace.effective_lr[k], trace.readout_magnitude[k - 1]});
  }
  s.write_table("schedule_lr", lr);
  s.write_json("summary.json",
               {{"explained_variance", std::vector<double>(sub.explained_variance.data(),
                                                           sub.explained_variance.data() +
                                                               sub.explained_variance.size())},
                {"total_variance", sub.total_variance},
                {"angle_to_readout", sub.angle_to_readout},
                {"degenerate", sub.degenerate},
                {"effective_lr_start", trace.effective_lr.front()},
                {"effective_lr_end", trace.effective_lr.back()}});
}

void analyze_s_curve(AnalysisContext& a, Stage& s) {
  const long p = a.config.analysis.s_curve_points;
  std::vector<double> gs{0.0};
  for (long i = 0; i < p; ++i) {
    const double e = p == 1 ? 0.0 : -3.0 + 3.0 * static_cast<double>(i) / static_cast<double>(p - 1);
    const double mag = a.g_range * std::pow(10.0, e);
    gs.push_back(mag);
    gs.push_back(-mag);
  }
  const auto sc = s_curve(a.dyn, gs, a.zero, a.fp);
  std::vector<const SCurveEntry*> all;
  for (const auto* arm : {&sc.negative_arm, &sc.zero_entries, &sc.positive_arm}) {
    for (const auto& e : *arm) all.push_back(&e);
  }
  std::stable_sort(all.begin(), all.end(), [](auto* x, auto* y) { return x->g < y->g; });
  CsvTable t({"g", "converged", "effective_lr", "residual", "readout"});
  for (const auto* e : all) {
    t.add_row({e->g, e->converged ? 1.0 : 0.0, e->effective_lr, e->record.residual, e->record.readout});
  }
  s.write_table("s_curve", t);
  s.write_json("summary.json", {{"success_rate", sc.success_rate},
                                {"spearman_negative", sc.spearman_negative},
                                {"spearman_positive", sc.spearman_positive},
                                {"points", static_cast<long>(gs.size())}});
}

void analyze_variance(AnalysisContext& a, Stage& s) {
  const auto problems = TaskSampler(a.config.task)
                            .problems(family::kTest, 0, a.config.analysis.n_variance_problems);
  std::vector<RolloutTrace> traces(problems.size());
  parallel_for(problems.size(), [&](std::size_t i) {
    traces[i] = rollout(a.ckpt, problems[i], a.config.analysis.variance_steps, true);
  });
  const auto var = state_variance(traces);
  CsvTable t({"step", "variance"});
  for (std::size_t k = 0; k < var.size(); ++k) t.add_row({static_cast<double>(k), var[k]});
  s.write_table("variance", t);
  // Every problem starts from the shared h0, so step 0 has no spread; the
  // reference is the first update.
  const double initial = var.size() > 1 ? var[1] : NAN;
  const double final_v = var.back();
  long diverged = 0;
  for (const auto& tr : traces) diverged += tr.diverged ? 1 : 0;
  s.write_json("summary.json", {{"initial_variance", initial},
                                {"final_variance", final_v},
                                {"ratio", initial > 0.0 ? final_v / initial : NAN},
                                {"problems", static_cast<long>(traces.size())},
                                {"diverged", diverged}});
}

void analyze_grad_hist(AnalysisContext& a, Stage& s) {
  const auto h = gradient_histogram(a.traces, a.config.analysis.histogram_bins);
  const auto th = a.thresholds();
  CsvTable t({"bin_center", "mass", "lower_threshold", "upper_threshold"});
  for (long b = 0; b < h.mass.size(); ++b) {
    t.add_row({0.5 * (h.edges(b) + h.edges(b + 1)), h.mass(b), th.negative, th.positive});
  }
  s.write_table("grad_hist", t);
  s.write_json("summary.json", {{"count", h.count},
                                {"threshold_negative", th.negative},
                                {"threshold_positive", th.positive},
                                {"saturated_fraction", saturated_fraction(a.traces, th)}});
}

}  // namespace

void cmd_analyze(RunContext& run, const std::vector<std::string>& modes) {
  for (const auto& m : modes) {
    const auto& known = analysis_modes();
    if (std::find(known.begin(), known.end(), m) == known.end()) {
      std::string list;
      for (const auto& k : known) list += (list.empty() ? "" : ", ") + k;
      throw ConfigError("unknown analysis mode '" + m + "'; valid modes: " + list + ", all");
    }
  }
  fs::path used;
  LearnedOptimizerCheckpoint ckpt = load_required_checkpoint(run, &used);
  const std::string digest = sha256_hex(read_file(used));
  Manifest manifest(run.config.outdir);
  std::unique_ptr<AnalysisContext> ctx;
  for (const auto& mode : modes) {
    Stage stage(run, manifest, "analyze/" + mode, input_hash(run, {"analyze", mode, digest}));
    if (!run.force && stage.up_to_date()) {
      *run.out << "analyze " << mode << ": outputs up to date, skipping\n";
      continue;
    }
    if (!ctx) ctx = std::make_unique<AnalysisContext>(run.config, ckpt);
    if (mode == "update-fn") analyze_update_fn(*ctx, stage);
    else if (mode == "fixed-points") analyze_fixed_points(*ctx, stage);
    else if (mode == "momentum-modes") analyze_modes(*ctx, stage);
    else if (mode == "reduced-rollout") analyze_reduced(*ctx, stage);
    else if (mode == "schedule") analyze_schedule(*ctx, stage);
    else if (mode == "s-curve") analyze_s_curve(*ctx, stage);
    else if (mode == "variance") analyze_variance(*ctx, stage);
    else if (mode == "grad-hist") analyze_grad_hist(*ctx, stage);
    stage.commit();
    *run.out << "analyze " << mode << ": wrote " << stage.dir().string() << "\n";
  }
}

// -------------------------------------------------------------------- plot

void cmd_plot(RunContext& run) {
  const fs::path root = run.task_dir();
  if (!fs::exists(root)) throw MissingArtifactError("plot: no outputs under " + root.string());
  long rendered = 0;
  std::vector<fs::path> csvs;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file() && e.path().extension() == ".csv") csvs.push_back(e.path());
  }
  std::sort(csvs.begin(), csvs.end());
  for (const auto& path : csvs) {
    const auto svg = render_plot(path.parent_path(), path.stem().string(), parse_csv(read_file(path)));
    if (!svg) continue;
    fs::path target = path;
    target.replace_extension(".svg");
    write_file_atomic(target, *svg);
    ++rendered;
  }
  *run.out << "plot: rendered " << rendered << " figures under " << root.string() << "\n";
}

}  // namespace lopt::cli
