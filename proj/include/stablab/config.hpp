#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "stablab/adversary.hpp"
#include "stablab/constants.hpp"
#include "stablab/datasets.hpp"
#include "stablab/model.hpp"
#include "stablab/poison.hpp"
#include "stablab/trainer.hpp"

namespace stablab {

// Flat "key = value" lines with dotted namespaces; '#' starts a comment.
std::map<std::string, std::string> parse_key_values(std::string_view text);

struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::filesystem::path out = "out";
  std::size_t jobs = 1;

  DatasetSpec dataset;
  ModelSpec model;
  bool zero_init = false;
  AdversaryConfig adversary;

  std::size_t n = 10;
  std::size_t T = 10;
  std::size_t passes = 1;
  StepSchedule schedule = ConstantStep{0.1};
  bool reshuffle = false;

  bool exact = false;
  std::size_t stability_trials = 200;
  std::size_t gap_trials = 200;
  double enumeration_cap = 1e7;

  LipschitzProbeConfig probes;  // center and seed are filled in by the runner
  // Parameter ball around the origin; default ||theta_1|| + 5.
  std::optional<double> ball_radius;
  std::size_t opt_restarts = 3;
  std::size_t opt_steps = 500;
  std::size_t snapshots = 8;
  std::size_t power_iters = 200;

  std::vector<double> sweep_eps;
  bool sweep_epochs = false;
  std::optional<double> B;

  std::optional<PoisonConfig> poison;
  std::vector<std::size_t> craft_hidden = {16};

  // Every field with its resolved value; reparsing it gives the same config.
  std::map<std::string, std::string> entries() const;
  std::string canonical() const;
  // FNV-1a of the canonical text without `out` and `jobs`.
  std::uint64_t hash() const;
  std::string hash_hex() const;

  // Named sub-stream of the master seed.
  std::uint64_t stream(std::string_view name) const;

  TrainConfig train_config(const Vec& theta1) const;
};

// Unknown keys are rejected; missing keys take defaults.
ExperimentConfig config_from_entries(const std::map<std::string, std::string>& kv);
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::filesystem::path& path);

}  // namespace stablab
