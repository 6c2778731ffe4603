#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "stablab/adversary.hpp"
#include "stablab/data.hpp"
#include "stablab/model.hpp"
#include "stablab/trainer.hpp"

namespace stablab {

struct StabilityMode {
  bool exact = false;
  std::size_t trials = 200;
  std::uint64_t seed = 0;
  // Exact mode is refused when |D|^n * n! * |D| * n exceeds this.
  double enumeration_cap = 1e7;
  std::size_t jobs = 1;

  static StabilityMode exact_mode(double cap = 1e7) { return {true, 0, 0, cap, 1}; }
  static StabilityMode monte_carlo(std::size_t trials, std::uint64_t seed, std::size_t jobs = 1) {
    return {false, trials, seed, 1e7, jobs};
  }
};

// perIndex[i] estimates E_{S,z,pi}[h(A(S),z) - h(A(S^{i,z}),z)].
struct StabilityEstimate {
  std::vector<double> per_index;
  std::vector<double> std_err;  // zero in exact mode
  double sup_index = 0.0;
  std::size_t argmax = 0;
  StabilityMode mode;
};

struct GapEstimate {
  double mean = 0.0;
  double std_err = 0.0;
  std::vector<double> per_trial;
};

// Number of terms exact mode enumerates: |D|^n * n! * |D| * n.
double enumeration_count(std::size_t support, std::size_t n);

// The training config's perm_seed is ignored here: the permutation is part of
// the randomness being averaged (enumerated exactly, or drawn per trial).
StabilityEstimate on_average_stability(const Model& model, const FinitePopulation& pop,
                                       std::size_t n, const TrainConfig& train,
                                       const AdversaryConfig& adv, const StabilityMode& mode);

// Monte Carlo estimator with independent draws for the two terms. Only useful
// as a variance reference for the paired estimator.
StabilityEstimate on_average_stability_unpaired(const Model& model, const FinitePopulation& pop,
                                                std::size_t n, const TrainConfig& train,
                                                const AdversaryConfig& adv, std::size_t trials,
                                                std::uint64_t seed);

// E_{S,pi}[R_D(A(S)) - R_S(A(S))] by sampling S ~ D^n and pi per trial.
GapEstimate gen_gap(const Model& model, const FinitePopulation& pop, std::size_t n,
                    const TrainConfig& train, const AdversaryConfig& adv, std::size_t trials,
                    std::uint64_t seed, std::size_t jobs = 1);
// Exact expectation over all S in supp(D)^n and all permutations.
GapEstimate gen_gap_exact(const Model& model, const FinitePopulation& pop, std::size_t n,
                          const TrainConfig& train, const AdversaryConfig& adv,
                          double enumeration_cap = 1e7);
// R_D(A(S)) - R_S(A(S)) for one sample and visiting order.
double sample_gap(const Model& model, const FinitePopulation& pop,
                  std::span<const LabeledExample> sample, std::span<const std::size_t> order,
                  const TrainConfig& train, const AdversaryConfig& adv);

struct GapStabilityReport {
  double gap = 0.0;
  double gap_std_err = 0.0;
  double sup_index = 0.0;
  double sup_std_err = 0.0;
  double tolerance = 0.0;
  bool pass = false;
  StabilityEstimate stability;
};

// Checks gap <= sup_i eps_i + tolerance; tolerance is 1e-10 in exact mode and
// 3 * sqrt(se_gap^2 + se_sup^2) in Monte Carlo mode.
GapStabilityReport gap_stability_check(const Model& model, const FinitePopulation& pop, std::size_t n,
                      const TrainConfig& train, const AdversaryConfig& adv,
                      const StabilityMode& mode);

}  // namespace stablab
