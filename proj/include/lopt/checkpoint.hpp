#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "lopt/gru.hpp"
#include "lopt/tasks.hpp"

namespace lopt {

struct CheckpointMetadata {
  int format_version = 1;
  std::string task = "rosenbrock";
  std::uint64_t seed = 0;
  long meta_step = 0;
  long hidden_size = 0;
};

struct LearnedOptimizerCheckpoint {
  OptimizerParams params;
  CheckpointMetadata meta;

  long hidden_size() const { return params.hidden_size(); }
  void validate() const;
};

/// JSON document; every array is base64 of little-endian float64 values.
/// See docs/checkpoint_format.md.
std::string checkpoint_to_json(const LearnedOptimizerCheckpoint& ckpt);
LearnedOptimizerCheckpoint checkpoint_from_json(const std::string& text);

/// Atomic write (temporary file then rename).
void save_checkpoint(const LearnedOptimizerCheckpoint& ckpt, const std::filesystem::path& path);
LearnedOptimizerCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace lopt
