#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "stablab/constants.hpp"
#include "stablab/trainer.hpp"

namespace stablab {

// Constants consumed by the bound formulas (a subset of ConstantsReport).
struct BoundConstants {
  double L = 0.0;
  double beta = 0.0;
  double eta = 0.0;
  double sigma = 0.0;
  double r = 0.0;
  double gamma = 0.0;

  static BoundConstants from(const ConstantsReport& report);
};

// Convex, general step sizes:
//   (2 sigma L / n + L eta) S1 + (4L/n) sqrt(S1) sqrt(r + (beta sigma^2 / 2) S2 + eta L S1)
// with S1 = sum alpha_t, S2 = sum alpha_t^2.
double bound_convex_general(const BoundConstants& k, std::span<const double> alphas,
                            std::size_t n);
// Convex, constant step alpha:
//   eta alpha L T + (2 alpha L T / n)(sigma + sqrt(2) sigma + 2 sqrt(eta L)) + 4 L sqrt(alpha r T) / n
double bound_convex_constant(const BoundConstants& k, double alpha, std::size_t T, std::size_t n);
// Shared form of the non-convex and multi-pass bounds for q = c * curvature:
//   ((1 + 1/q) / n) (2 c L^2 + n c eta L)^(1/(1+q)) (risk T)^(q/(1+q))
// Throws DegenerateExponent when q == 0 (the q -> 0 limit is +inf).
double nonconvex_form(double L, double eta, double curvature, double c, std::size_t T,
                      std::size_t n, double risk);
// Single pass, alpha_t = c/t, curvature gamma.
double bound_nonconvex(const BoundConstants& k, double c, std::size_t T, std::size_t n,
                       double risk_at_output);
// Multiple passes, curvature beta.
double bound_multipass(const BoundConstants& k, double c, std::size_t T, std::size_t n,
                       double risk_at_output);

struct Baselines {
  double xing_convex = 0.0;      // alpha L^2 sqrt(T) + alpha L^2 T / n (order-only, unit constants)
  double xiao_convex = 0.0;      // (eta + 2L/n) alpha T L
  double xiao_nonconvex = 0.0;   // multi-pass form with the loss bound B in place of the risk
};
Baselines bound_baselines(const BoundConstants& k, double alpha, double c, std::size_t T,
                          std::size_t n, double B);
// Same, also checking B against the largest observed loss.
Baselines bound_baselines(const BoundConstants& k, double alpha, double c, std::size_t T,
                          std::size_t n, double B, double max_observed_loss);

struct BoundInputs {
  BoundConstants consts;
  std::size_t n = 1;
  std::size_t T = 1;
  StepSchedule schedule = ConstantStep{};
  double risk_at_output = 0.0;
  double B = 1.0;
};

// One named bound value. `value` is +inf for a degenerate exponent.
struct BoundValue {
  std::string name;
  double value = 0.0;
  std::vector<std::string> flags;
};

struct BoundReport {
  BoundInputs inputs;
  std::vector<BoundValue> values;  // fixed order, see bound_names()

  const BoundValue& get(const std::string& name) const;
};

const std::vector<std::string>& bound_names();

// Evaluates all seven formulas. The constant-step formulas use alpha_1 of
// the schedule; the c-parameterized formulas use c (= alpha for a constant
// schedule). Violated preconditions are recorded as flags, never thrown.
BoundReport evaluate_bounds(const BoundInputs& in);

nlohmann::json to_json(const BoundReport& report);
BoundReport bound_report_from_json(const nlohmann::json& j);

}  // namespace stablab
