#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "stablab/adversary.hpp"
#include "stablab/constants.hpp"
#include "stablab/data.hpp"
#include "stablab/model.hpp"
#include "stablab/stability.hpp"

namespace stablab {

enum class PoisonAttack { EM, REM, ADV, HYP, RAN };

std::string to_string(PoisonAttack a);
PoisonAttack poison_attack_from_string(const std::string& s);

// Budgets are in feature units of [0,1]^d. The image-scale recipe
// (8/255 poison, 2/255 protection/crafting) is mapped by ratio, not by value:
// the crafting and REM budgets default to budget/4.
struct PoisonConfig {
  PoisonAttack attack = PoisonAttack::EM;
  double budget = 0.0;  // eps'
  NormP norm = NormP::Linf;
  std::optional<double> rem_rho;       // REM protection radius, default budget/4
  std::optional<double> craft_budget;  // HYP crafting-model training budget, default budget/4
  std::size_t craft_steps = 300;       // ADV/HYP crafting-model training steps
  std::optional<int> inner_steps;      // perturbation PGD steps: 100 (ADV/HYP), 10 (EM/REM)
  std::size_t rounds = 5;              // EM/REM alternations
  std::size_t victim_steps = 20;       // EM/REM model steps per alternation
  std::uint64_t seed = 0;
  std::size_t jobs = 1;

  double rem_rho_value() const { return rem_rho.value_or(budget / 4.0); }
  double craft_budget_value() const { return craft_budget.value_or(budget / 4.0); }
  int inner_steps_value() const;
  void validate() const;
};

nlohmann::json to_json(const PoisonConfig& cfg);
std::uint64_t config_hash(const PoisonConfig& cfg);

struct PoisonResult {
  FinitePopulation population;
  Vec craft_params;  // frozen crafting model (empty for RAN)
  std::uint64_t craft_hash = 0;
  std::vector<std::string> warnings;
};

// P_#D: same points, labels and weights with features moved inside the
// budget ball (and the unit box). EM/REM/ADV/HYP craft on the whole
// population; RAN applies one random vector per class. When STABLAB_CACHE
// names a directory, ADV/HYP crafting models are stored and reused there.
PoisonResult poison(const FinitePopulation& pop, const PoisonConfig& cfg, const Model& craft_model);

// gen_gap with sampling and evaluation both over the poisoned population.
GapEstimate poisoned_gen_gap(const Model& model, const FinitePopulation& poisoned, std::size_t n,
                             const TrainConfig& train, const AdversaryConfig& adv,
                             std::size_t trials, std::uint64_t seed, std::size_t jobs = 1);

// estimate_constants on the poisoned population, tagged with the config hash.
ConstantsReport poisoned_constants(const Model& model, const FinitePopulation& poisoned,
                                   std::span<const double> theta1,
                                   std::span<const Vec> theta_probes, const AdversaryConfig& adv,
                                   const ConstantsConfig& cfg, const PoisonConfig& poison_cfg);

}  // namespace stablab
