#pragma once

#include <cstdint>
#include <optional>
#include <variant>

#include "json.hpp"
#include "stablab/data.hpp"
#include "stablab/model.hpp"

namespace stablab {

// Exact maximizer for binary linear-softmax cross-entropy under an L-inf ball:
// the loss is monotone in the margin, so each coordinate moves to the end of
// its feasible interval opposite the margin direction.
struct ClosedFormLinear {};

// Projected gradient ascent starting at z. Each iteration: ascent step (sign
// of the input gradient for L-inf, normalized gradient for L2), projection on
// the budget ball, clip to [0,1]^d. The best iterate (z included) is returned.
struct Pgd {
  int steps = 10;
  double step_size = 0.0;
  std::optional<std::uint64_t> random_start_seed;
};

// Exhaustive search over a lattice of the given resolution covering the ball.
// The L2 ball reuses the L-inf lattice, filtered by radius.
struct GridOracle {
  double resolution = 0.01;
};

struct AdversaryConfig {
  double epsilon = 0.0;
  NormP norm = NormP::Linf;
  std::variant<Pgd, ClosedFormLinear, GridOracle> method = Pgd{};

  // PGD with step epsilon/4.
  static AdversaryConfig pgd(double eps, NormP p = NormP::Linf, int steps = 10);
  static AdversaryConfig grid(double eps, NormP p, double resolution);
  static AdversaryConfig closed_form(double eps);

  void validate() const;
  std::string describe() const;
};

nlohmann::json to_json(const AdversaryConfig& cfg);

struct AttackResult {
  LabeledExample point;
  double loss = 0.0;
  // Grid oracle only: lattice points whose loss is within 1e-9 of the max.
  std::size_t ties = 0;
};

AttackResult attack_detailed(const Model& model, std::span<const double> theta,
                             const LabeledExample& z, const AdversaryConfig& cfg);
LabeledExample attack(const Model& model, std::span<const double> theta, const LabeledExample& z,
                      const AdversaryConfig& cfg);
// h(theta, z): loss at the attack output.
double adv_loss(const Model& model, std::span<const double> theta, const LabeledExample& z,
                const AdversaryConfig& cfg);
// Danskin surrogate: grad_theta l(theta, z') at the attack output z'.
Vec adv_grad(const Model& model, std::span<const double> theta, const LabeledExample& z,
             const AdversaryConfig& cfg);
// Both of the above from a single attack; `point` optionally receives z'.
double adv_loss_and_grad(const Model& model, std::span<const double> theta,
                         const LabeledExample& z, const AdversaryConfig& cfg, Vec& grad,
                         LabeledExample* point = nullptr);

}  // namespace stablab
