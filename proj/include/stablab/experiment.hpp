#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "stablab/config.hpp"

namespace stablab {

inline constexpr int kSchemaVersion = 1;

enum class Stage { GenData, Train, Stability, Bounds, Poison, Run };

struct StageResult {
  bool ok = true;
  std::vector<std::filesystem::path> artifacts;
  std::vector<std::string> warnings;
  std::string error_kind;
  std::string error_message;
};

// Runs one stage into cfg.out. Errors never escape: they are written to
// error.json next to whatever artifacts were completed, and status.json marks
// the run as partial.
StageResult run_stage(const ExperimentConfig& cfg, Stage stage);

// Full pipeline from a config file: constants.json, bounds.csv, stability.csv,
// gapsweep.csv and plotdata/{gap_vs_eps,gap_vs_epoch,bound_vs_measured}.csv.
StageResult run_experiment(const std::filesystem::path& config_path);

// Merges bounds.csv of each artifact directory into <out>/report.csv and
// writes <out>/summary.txt. Throws Error(Schema) on mismatched inputs.
void report(const std::vector<std::filesystem::path>& dirs, const std::filesystem::path& out);

// Writes via a temporary file and rename, so readers never see partial files.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

}  // namespace stablab
