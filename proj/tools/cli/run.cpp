#include <CLI11.hpp>
#include <ostream>

#include "internal.hpp"
#include "lopt/error.hpp"
#include "lopt/parallel.hpp"

namespace lopt {

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Learned optimizer toolkit: tune baselines, meta-train, evaluate, analyze, plot",
               "lopt"};
  app.fallthrough();
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string outdir;
  int threads = 0;
  bool force = false;
  std::string checkpoint;
  std::vector<std::string> modes{"all"};

  app.add_option("--config", config_path, "JSON experiment config");
  app.add_option("--seed", seed, "master seed (overrides the config)");
  app.add_option("--outdir", outdir, "output root (overrides the config)");
  app.add_option("--threads", threads, "worker threads, 0 = hardware concurrency")
      ->check(CLI::NonNegativeNumber);
  app.add_flag("--force", force, "recompute even when outputs are up to date");

  auto* tune = app.add_subcommand("tune", "random-grid tuning of the baseline optimizers");
  auto* meta = app.add_subcommand("meta-train", "train the learned optimizer");
  auto* eval = app.add_subcommand("evaluate", "compare tuned baselines and the learned optimizer");
  eval->add_option("--checkpoint", checkpoint, "learned optimizer checkpoint");
  auto* analyze = app.add_subcommand("analyze", "dynamical-systems analysis of a checkpoint");
  analyze->add_option("--checkpoint", checkpoint, "learned optimizer checkpoint");
  std::string mode_help = "analysis modes: all";
  for (const auto& m : analysis_modes()) mode_help += ", " + m;
  analyze->add_option("--mode", modes, mode_help)->delimiter(',');
  auto* plot = app.add_subcommand("plot", "re-render SVG figures from the data files");

  std::vector<std::string> argv_rev(args.rbegin(), args.rend());
  try {
    app.parse(argv_rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  cli::RunContext run;
  run.out = &out;
  run.force = force;
  try {
    if (!config_path.empty()) {
      if (!std::filesystem::exists(config_path)) {
        throw ConfigError("config file not found: " + config_path);
      }
      run.config = parse_experiment_config(read_file(config_path));
    } else {
      run.config = parse_experiment_config("{}");
    }
    if (seed) run.config.seed = *seed;
    if (!outdir.empty()) run.config.outdir = outdir;
    if (!checkpoint.empty()) run.config.checkpoint = checkpoint;
    cli::sync_derived(run.config);
    run.config.validate();
    set_thread_count(threads);

    if (tune->parsed()) {
      cli::cmd_tune(run);
    } else if (meta->parsed()) {
      cli::cmd_meta_train(run);
    } else if (eval->parsed()) {
      cli::cmd_evaluate(run);
    } else if (analyze->parsed()) {
      std::vector<std::string> selected;
      for (const auto& m : modes) {
        if (m == "all") {
          selected.insert(selected.end(), analysis_modes().begin(), analysis_modes().end());
        } else {
          selected.push_back(m);
        }
      }
      cli::cmd_analyze(run, selected);
    } else if (plot->parsed()) {
      cli::cmd_plot(run);
    }
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return 2;
  } catch (const MissingArtifactError& e) {
    err << "missing artifact: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}

}  // namespace lopt
