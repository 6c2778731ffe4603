#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <variant>
#include <vector>

#include "stablab/adversary.hpp"
#include "stablab/data.hpp"
#include "stablab/model.hpp"

namespace stablab {

struct ConstantStep {
  double alpha = 0.1;
};
// alpha_t = c / t, t counted from 1.
struct InverseStep {
  double c = 0.1;
};
using StepSchedule = std::variant<ConstantStep, InverseStep>;

double step_size(const StepSchedule& schedule, std::size_t t);
std::vector<double> step_series(const StepSchedule& schedule, std::size_t steps);
std::string describe(const StepSchedule& schedule);

struct TrainConfig {
  std::size_t steps = 0;  // T
  std::size_t passes = 1;
  StepSchedule schedule = ConstantStep{};
  Vec init;  // theta_1
  std::uint64_t perm_seed = 0;
  // Draw a fresh permutation per pass instead of cycling one fixed order.
  bool reshuffle_each_pass = false;

  void validate(std::size_t n, std::size_t param_dim) const;
};

struct StepRecord {
  std::size_t index = 0;  // pi(t), 0-based position in S
  LabeledExample adversarial;
  double grad_norm = 0.0;
  double alpha = 0.0;
};

// Full SGD-without-replacement record. params[t-1] holds theta_t, so
// params.size() == steps.size() + 1 and output() is A(S) = theta_{T+1}.
struct Trajectory {
  std::vector<Vec> params;
  std::vector<std::size_t> order;  // visiting order over all passes
  std::vector<StepRecord> steps;

  const Vec& output() const { return params.back(); }
  std::span<const std::size_t> permutation(std::size_t n) const { return {order.data(), n}; }
  // 1-based step at which index i is first visited; steps()+1 when never.
  std::size_t first_visit(std::size_t i) const;
};

// One permutation of [0, n) from the seed, repeated `passes` times (or
// redrawn per pass when `reshuffle` is set).
std::vector<std::size_t> permute(std::uint64_t seed, std::size_t n, std::size_t passes,
                                 bool reshuffle = false);

// Update rule G(theta, z, alpha) = theta - alpha * adv_grad(theta, z).
Vec sgd_step(const Model& model, std::span<const double> theta, const LabeledExample& z,
             double alpha, const AdversaryConfig& adv);

Trajectory sgd_adv_train(const Model& model, std::span<const LabeledExample> sample,
                         const TrainConfig& cfg, const AdversaryConfig& adv);
// Same as sgd_adv_train with an explicit visiting order (cfg.perm_seed unused).
Trajectory sgd_adv_train_order(const Model& model, std::span<const LabeledExample> sample,
                               std::span<const std::size_t> order, const TrainConfig& cfg,
                               const AdversaryConfig& adv);
// Output only, without recording; same arithmetic as the recorded path.
Vec sgd_adv_output(const Model& model, std::span<const LabeledExample> sample,
                   std::span<const std::size_t> order, const TrainConfig& cfg,
                   const AdversaryConfig& adv);

// Re-executes the update from the recorded indices and step sizes.
std::vector<Vec> replay(const Model& model, std::span<const LabeledExample> sample,
                        const Trajectory& traj, const AdversaryConfig& adv);

struct PairedRun {
  Trajectory original;
  Trajectory replaced;
  std::vector<double> delta;  // delta_t = ||theta_t - theta'_t||, t = 1..T+1
};

// Runs S and S^{i,z} with the same permutation and adversary.
PairedRun paired_trajectories(const Model& model, std::span<const LabeledExample> sample,
                              std::size_t i, const LabeledExample& replacement,
                              const TrainConfig& cfg, const AdversaryConfig& adv);

// Writes `<dir>/steps.csv` (step,index,alpha,grad_norm) and `<dir>/params.bin`
// with theta_t for t = 1, 1+stride, ... and always theta_{T+1}.
void write_trajectory(const Trajectory& traj, const std::filesystem::path& dir,
                      std::size_t stride);

struct ParamSnapshot {
  std::uint64_t step = 0;
  Vec theta;
};
std::vector<ParamSnapshot> read_param_snapshots(const std::filesystem::path& file);

}  // namespace stablab
