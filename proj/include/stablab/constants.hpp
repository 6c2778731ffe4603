#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "stablab/adversary.hpp"
#include "stablab/data.hpp"
#include "stablab/model.hpp"

namespace stablab {

struct Provenance {
  std::string source;  // "estimated" | "supplied" | "derived"
  std::size_t samples = 0;
  double ball_radius = 0.0;
  std::string note;
};

// Every symbol the bound formulas consume.
//   beta = L_theta, rho = H_theta, eta = 2 eps L_z, nu = 2 eps H_z
// gamma = min(beta, gamma_raw) where gamma_raw is the explicit curvature
// expression at t = T (see gamma_delta).
struct ConstantsReport {
  double epsilon = 0.0;
  double L = 0.0;
  double L_theta = 0.0;
  double L_z = 0.0;
  double H_theta = 0.0;
  double H_z = 0.0;
  double beta = 0.0;
  double rho = 0.0;
  double eta = 0.0;
  double nu = 0.0;
  double sigma = 0.0;
  double r = 0.0;
  double hess_norm_init = 0.0;
  double gamma = 0.0;
  double gamma_raw = 0.0;
  double delta_star = 0.0;
  std::map<std::string, Provenance> provenance;
  std::vector<std::string> warnings;
  std::string tag;

  // Recomputes beta, rho, eta, nu from the base constants and epsilon.
  void derive_smoothness();
};

nlohmann::json to_json(const ConstantsReport& report);
ConstantsReport constants_from_json(const nlohmann::json& j);

struct LipschitzProbeConfig {
  Vec center;                 // parameter ball center; empty = origin
  double ball_radius = 5.0;   // parameter ball radius
  double input_radius = 0.1;  // max ||z1 - z2||_p for the z-direction quotients
  std::size_t probes = 1000;
  std::uint64_t seed = 0;
  std::size_t power_iters = 100;
};

// Sampled maxima of the difference quotients of the base loss:
//   L       |l(t1,z) - l(t2,z)| / ||t1 - t2||
//   L_theta ||grad l(t1,z) - grad l(t2,z)|| / ||t1 - t2||
//   H_theta ||hess l(t1,z) - hess l(t2,z)||_2 / ||t1 - t2||
//   L_z     ||grad l(t,z1) - grad l(t,z2)|| / ||z1 - z2||_p
//   H_z     ||hess l(t,z1) - hess l(t,z2)||_2 / ||z1 - z2||_p
// (grad and hess are in theta). These are lower estimates of the true local
// constants. Probe j depends only on (seed, j), so a larger probe count with the
// same seed can only raise each estimate. Inputs are drawn uniformly from the
// unit box, so the result does not depend on any data distribution.
ConstantsReport estimate_lipschitz(const Model& model, const AdversaryConfig& adv,
                                   const LipschitzProbeConfig& cfg);

// R_D(theta) = sum_z w_z h(theta, z).
double population_risk(const Model& model, std::span<const double> theta,
                       const FinitePopulation& pop, const AdversaryConfig& adv);
// Empirical adversarial risk over a sample (uniform weights).
double empirical_risk(const Model& model, std::span<const double> theta,
                      std::span<const LabeledExample> sample, const AdversaryConfig& adv);
// Risk together with the Danskin gradient of R_D.
double population_risk_grad(const Model& model, std::span<const double> theta,
                            const FinitePopulation& pop, const AdversaryConfig& adv, Vec& grad);

// max over probes of sqrt(E_z ||grad h(theta,z) - grad R_D(theta)||^2).
double estimate_sigma(const Model& model, std::span<const Vec> theta_probes,
                      const FinitePopulation& pop, const AdversaryConfig& adv);

struct OptBudget {
  std::size_t restarts = 3;
  std::size_t steps = 500;
  double init_scale = 1.0;  // random restarts use model init scaled by this
  std::uint64_t seed = 0;
  double grad_tol = 1e-10;
  std::vector<Vec> starts;  // explicit starting points tried before random restarts
};

struct OptResult {
  Vec theta;
  double risk = 0.0;
  // Set for non-convex models: the risk is only an upper bound on R_D(theta*).
  bool upper_bound = false;
};

// Full-population adversarial gradient descent with Armijo backtracking and
// restarts. Throws OptimizationFailure if the risk grows tenfold from a start.
OptResult estimate_opt_risk(const Model& model, const FinitePopulation& pop,
                            const AdversaryConfig& adv, const OptBudget& budget);

struct HessNormResult {
  double value = 0.0;
  bool converged = true;
};

// E_z ||hess_theta l(theta1, z')||_2 with z' the attack output, each norm by
// power iteration on hvp until the quotient changes by < 1e-8.
HessNormResult hessian_norm_init(const Model& model, std::span<const double> theta1,
                                 const FinitePopulation& pop, const AdversaryConfig& adv,
                                 std::size_t power_iters);

struct GammaDelta {
  double gamma = 0.0;
  double gamma_raw = 0.0;  // explicit curvature expression before min with beta
  double delta_star = 0.0;
  std::vector<std::string> warnings;
};

// delta* = rho (sqrt(r c) + c sigma + c sqrt(eta L))
// G      = hessNormInit + nu + 2 rho sqrt(r c (1 + ln T))
//          + 2 rho sigma c sqrt(beta c (1 + ln T)) + rho c (sigma + 2 sqrt(eta L)) (1 + ln T)
// gamma  = min(beta, G)
// Negative r (estimation noise) is clamped to 0 with a warning.
GammaDelta gamma_delta(const ConstantsReport& consts, double c, std::size_t T);

struct ConstantsConfig {
  LipschitzProbeConfig lipschitz;
  OptBudget opt;
  std::size_t power_iters = 200;
  double c = 0.1;
  std::size_t T = 1;
};

// Runs every estimator: Lipschitz constants, sigma at the given snapshots,
// r = R_D(theta1) - R_D(theta*hat), the init Hessian norm and gamma/delta*.
ConstantsReport estimate_constants(const Model& model, const FinitePopulation& pop,
                                   std::span<const double> theta1,
                                   std::span<const Vec> theta_probes, const AdversaryConfig& adv,
                                   const ConstantsConfig& cfg);

}  // namespace stablab
