#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <json.hpp>

#include "lopt/cli.hpp"
#include "lopt/io.hpp"

namespace lopt::cli {

namespace fs = std::filesystem;
using nlohmann::json;

inline constexpr const char* kToolVersion = "0.1.0";

/// Copies the master seed and task block into the nested configs.
void sync_derived(ExperimentConfig& config);
json config_to_json(const ExperimentConfig& config);

/// Root manifest: one entry per stage with its input hash and file digests.
class Manifest {
 public:
  explicit Manifest(fs::path outdir);
  const json* stage(const std::string& name) const;
  void set_stage(const std::string& name, json entry);
  void save() const;
  const fs::path& outdir() const { return outdir_; }

 private:
  fs::path outdir_;
  json doc_;
};

struct RunContext {
  ExperimentConfig config;
  bool force = false;
  std::ostream* out = nullptr;
  fs::path task_dir() const { return fs::path(config.outdir) / to_string(config.task.kind); }
};

/// Output directory of one stage. Files are written atomically and recorded
/// with their digests; commit() stores the entry in the manifest.
class Stage {
 public:
  Stage(RunContext& run, Manifest& manifest, std::string name, std::string input_hash);

  /// True when the manifest entry matches the input hash and every listed
  /// file is present with the recorded digest.
  bool up_to_date() const;
  const fs::path& dir() const { return dir_; }

  void write(const std::string& filename, const std::string& content);
  void write_json(const std::string& filename, const json& doc);
  /// CSV plus, when a renderer is registered for the stem, its SVG.
  void write_table(const std::string& stem, const CsvTable& table);
  void commit();

 private:
  RunContext& run_;
  Manifest& manifest_;
  std::string name_;
  std::string input_hash_;
  fs::path dir_;
  std::map<std::string, std::string> files_;
  std::string started_;
};

/// SVG for a data table, keyed by file stem; nullopt if the stem has no plot.
std::optional<std::string> render_plot(const fs::path& dir, const std::string& stem,
                                       const ParsedCsv& csv);

std::string utc_timestamp();

// Subcommands.
void cmd_tune(RunContext& run);
void cmd_meta_train(RunContext& run);
void cmd_evaluate(RunContext& run);
void cmd_analyze(RunContext& run, const std::vector<std::string>& modes);
void cmd_plot(RunContext& run);

}  // namespace lopt::cli
