#include "stablab/constants.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "stablab/error.hpp"
#include "stablab/rng.hpp"

namespace stablab {
namespace {

using Operator = std::function<Vec(const Vec&)>;

struct PowerResult {
  double value = 0.0;
  bool converged = false;
};

// Largest |eigenvalue| of a symmetric operator: ||A v|| over unit iterates.
PowerResult power_norm(const Operator& apply, std::size_t dim, std::size_t iters, double tol,
                       std::uint64_t seed) {
  Rng rng(seed);
  Vec v = rng.normal_vector(dim);
  double n = norm2(v);
  for (auto& x : v) x /= n;
  double prev = -1.0;
  for (std::size_t k = 0; k < iters; ++k) {
    Vec w = apply(v);
    const double lambda = norm2(w);
    if (lambda == 0.0) return {0.0, true};
    if (std::abs(lambda - prev) < tol * std::max(1.0, lambda)) return {lambda, true};
    prev = lambda;
    for (std::size_t j = 0; j < dim; ++j) v[j] = w[j] / lambda;
  }
  return {prev, false};
}

Vec sample_in_ball(Rng& rng, const Vec& center, double radius) {
  const std::size_t k = center.size();
  Vec dir = rng.normal_vector(k);
  const double n = norm2(dir);
  const double r = radius * std::pow(rng.uniform(), 1.0 / static_cast<double>(k));
  Vec out = center;
  for (std::size_t j = 0; j < k; ++j) out[j] += r * dir[j] / n;
  return out;
}

Vec clamp_to_ball(Vec v, const Vec& center, double radius) {
  Vec d = sub(v, center);
  const double n = norm2(d);
  if (n <= radius) return v;
  for (std::size_t j = 0; j < v.size(); ++j) v[j] = center[j] + d[j] * radius / n;
  return v;
}

nlohmann::json provenance_json(const Provenance& p) {
  return {{"source", p.source}, {"samples", p.samples}, {"ball_radius", p.ball_radius},
          {"note", p.note}};
}

}  // namespace

void ConstantsReport::derive_smoothness() {
  beta = L_theta;
  rho = H_theta;
  eta = 2.0 * epsilon * L_z;
  nu = 2.0 * epsilon * H_z;
  for (const char* k : {"beta", "rho", "eta", "nu"}) provenance[k].source = "derived";
}

nlohmann::json to_json(const ConstantsReport& r) {
  nlohmann::json prov = nlohmann::json::object();
  for (const auto& [k, p] : r.provenance) prov[k] = provenance_json(p);
  return {{"epsilon", r.epsilon},   {"L", r.L},
          {"L_theta", r.L_theta},   {"L_z", r.L_z},
          {"H_theta", r.H_theta},   {"H_z", r.H_z},
          {"beta", r.beta},         {"rho", r.rho},
          {"eta", r.eta},           {"nu", r.nu},
          {"sigma", r.sigma},       {"r", r.r},
          {"hessNormInit", r.hess_norm_init},
          {"gamma", r.gamma},       {"gammaRaw", r.gamma_raw},
          {"deltaStar", r.delta_star},
          {"provenance", prov},     {"warnings", r.warnings},
          {"tag", r.tag}};
}

ConstantsReport constants_from_json(const nlohmann::json& j) {
  ConstantsReport r;
  r.epsilon = j.at("epsilon").get<double>();
  r.L = j.at("L").get<double>();
  r.L_theta = j.at("L_theta").get<double>();
  r.L_z = j.at("L_z").get<double>();
  r.H_theta = j.at("H_theta").get<double>();
  r.H_z = j.at("H_z").get<double>();
  r.beta = j.at("beta").get<double>();
  r.rho = j.at("rho").get<double>();
  r.eta = j.at("eta").get<double>();
  r.nu = j.at("nu").get<double>();
  r.sigma = j.at("sigma").get<double>();
  r.r = j.at("r").get<double>();
  r.hess_norm_init = j.at("hessNormInit").get<double>();
  r.gamma = j.at("gamma").get<double>();
  r.gamma_raw = j.at("gammaRaw").get<double>();
  r.delta_star = j.at("deltaStar").get<double>();
  if (j.contains("provenance")) {
    for (const auto& [k, p] : j.at("provenance").items()) {
      r.provenance[k] = Provenance{p.value("source", std::string()), p.value("samples", std::size_t{0}),
                                   p.value("ball_radius", 0.0), p.value("note", std::string())};
    }
  }
  if (j.contains("warnings")) r.warnings = j.at("warnings").get<std::vector<std::string>>();
  r.tag = j.value("tag", std::string());
  return r;
}

ConstantsReport estimate_lipschitz(const Model& model, const AdversaryConfig& adv,
                                   const LipschitzProbeConfig& cfg) {
  adv.validate();
  require(cfg.probes >= 100, ErrorKind::Config, "Lipschitz estimation needs at least 100 probes");
  require(cfg.ball_radius > 0.0, ErrorKind::Config, "degenerate parameter ball (radius 0)");
  require(cfg.input_radius > 0.0, ErrorKind::Config, "degenerate input ball (radius 0)");
  const std::size_t k = model.param_dim(), d = model.input_dim();
  const Vec center = cfg.center.empty() ? Vec(k, 0.0) : cfg.center;
  require(center.size() == k, ErrorKind::Contract, "ball center has wrong length");

  ConstantsReport rep;
  rep.epsilon = adv.epsilon;
  for (std::size_t p = 0; p < cfg.probes; ++p) {
    Rng rng(derive_seed(cfg.seed, p));
    LabeledExample z{Vec(d), rng.below(model.num_classes())};
    for (auto& x : z.features) x = rng.uniform();
    const Vec t1 = sample_in_ball(rng, center, cfg.ball_radius);
    // Alternate far pairs (secant slopes) with near pairs (local slopes).
    Vec t2 = (p % 2 == 0)
                 ? sample_in_ball(rng, center, cfg.ball_radius)
                 : clamp_to_ball(sample_in_ball(rng, t1, 1e-2 * cfg.ball_radius), center,
                                 cfg.ball_radius);
    LabeledExample z2 = z;
    {
      Vec off(d);
      for (auto& x : off) x = rng.uniform(-1.0, 1.0);
      const double n = norm(off, adv.norm);
      const double r = cfg.input_radius * rng.uniform();
      for (std::size_t j = 0; j < d; ++j) {
        z2.features[j] = std::clamp(z.features[j] + off[j] * r / n, 0.0, 1.0);
      }
    }
    const std::uint64_t pseed = derive_seed(cfg.seed ^ 0x5eedULL, p);

    const double dt = dist2(t1, t2);
    if (dt > 0.0) {
      Vec g1, g2;
      const double l1 = model.loss_and_grads(t1, z, &g1, nullptr);
      const double l2 = model.loss_and_grads(t2, z, &g2, nullptr);
      rep.L = std::max(rep.L, std::abs(l1 - l2) / dt);
      rep.L_theta = std::max(rep.L_theta, dist2(g1, g2) / dt);
      const auto hdiff = power_norm(
          [&](const Vec& v) { return sub(model.hvp_theta(t1, z, v), model.hvp_theta(t2, z, v)); },
          k, cfg.power_iters, 1e-10, pseed);
      rep.H_theta = std::max(rep.H_theta, hdiff.value / dt);
    }
    const double dz = dist(z.features, z2.features, adv.norm);
    if (dz > 0.0) {
      rep.L_z = std::max(rep.L_z, dist2(model.grad_theta(t1, z), model.grad_theta(t1, z2)) / dz);
      const auto hdiff = power_norm(
          [&](const Vec& v) { return sub(model.hvp_theta(t1, z, v), model.hvp_theta(t1, z2, v)); },
          k, cfg.power_iters, 1e-10, pseed + 1);
      rep.H_z = std::max(rep.H_z, hdiff.value / dz);
    }
  }
  const Provenance est{"estimated", cfg.probes, cfg.ball_radius,
                       "sampled maximum (lower estimate); input radius " +
                           format_real(cfg.input_radius)};
  for (const char* key : {"L", "L_theta", "L_z", "H_theta", "H_z"}) rep.provenance[key] = est;
  rep.derive_smoothness();
  return rep;
}

double population_risk(const Model& model, std::span<const double> theta,
                       const FinitePopulation& pop, const AdversaryConfig& adv) {
  double risk = 0.0;
  for (std::size_t i = 0; i < pop.size(); ++i) {
    if (pop.weight(i) == 0.0) continue;
    risk += pop.weight(i) * adv_loss(model, theta, pop.point(i), adv);
  }
  return risk;
}

double empirical_risk(const Model& model, std::span<const double> theta,
                      std::span<const LabeledExample> sample, const AdversaryConfig& adv) {
  require(!sample.empty(), ErrorKind::EmptyDataset, "empirical risk over an empty sample");
  double risk = 0.0;
  for (const auto& z : sample) risk += adv_loss(model, theta, z, adv);
  return risk / static_cast<double>(sample.size());
}

double population_risk_grad(const Model& model, std::span<const double> theta,
                            const FinitePopulation& pop, const AdversaryConfig& adv, Vec& grad) {
  grad.assign(model.param_dim(), 0.0);
  double risk = 0.0;
  Vec g;
  for (std::size_t i = 0; i < pop.size(); ++i) {
    const double w = pop.weight(i);
    if (w == 0.0) continue;
    risk += w * adv_loss_and_grad(model, theta, pop.point(i), adv, g);
    simd::axpy(w, g, grad);
  }
  return risk;
}

double estimate_sigma(const Model& model, std::span<const Vec> theta_probes,
                      const FinitePopulation& pop, const AdversaryConfig& adv) {
  require(!theta_probes.empty(), ErrorKind::Contract, "sigma needs at least one parameter probe");
  double sigma = 0.0;
  std::vector<Vec> grads(pop.size());
  for (const Vec& theta : theta_probes) {
    Vec mean(model.param_dim(), 0.0);
    for (std::size_t i = 0; i < pop.size(); ++i) {
      if (pop.weight(i) == 0.0) continue;
      adv_loss_and_grad(model, theta, pop.point(i), adv, grads[i]);
      simd::axpy(pop.weight(i), grads[i], mean);
    }
    double var = 0.0;
    for (std::size_t i = 0; i < pop.size(); ++i) {
      if (pop.weight(i) == 0.0) continue;
      const Vec diff = sub(grads[i], mean);
      var += pop.weight(i) * simd::dot(diff, diff);
    }
    sigma = std::max(sigma, std::sqrt(var));
  }
  return sigma;
}

OptResult estimate_opt_risk(const Model& model, const FinitePopulation& pop,
                            const AdversaryConfig& adv, const OptBudget& budget) {
  require(budget.restarts + budget.starts.size() >= 1, ErrorKind::Config,
          "optimization budget has no starting point");
  std::vector<Vec> starts = budget.starts;
  for (std::size_t r = 0; r < budget.restarts; ++r) {
    Vec t = model.init_params(derive_seed(budget.seed, r));
    for (auto& x : t) x *= budget.init_scale;
    starts.push_back(std::move(t));
  }
  OptResult best;
  best.risk = std::numeric_limits<double>::infinity();
  best.upper_bound = model.kind() == ModelKind::Mlp;
  Vec grad, trial;
  for (const Vec& start : starts) {
    require(start.size() == model.param_dim(), ErrorKind::Contract, "start has wrong length");
    Vec theta = start;
    double risk = population_risk_grad(model, theta, pop, adv, grad);
    const double initial = risk;
    double step = 1.0;
    for (std::size_t it = 0; it < budget.steps; ++it) {
      const double g2 = simd::dot(grad, grad);
      if (std::sqrt(g2) < budget.grad_tol) break;
      bool accepted = false;
      while (step > 1e-14) {
        trial = theta;
        simd::axpy(-step, grad, trial);
        Vec trial_grad;
        const double trial_risk = population_risk_grad(model, trial, pop, adv, trial_grad);
        require(std::isfinite(trial_risk) || step > 1e-10, ErrorKind::OptimizationFailure,
                "population risk became non-finite");
        if (std::isfinite(trial_risk) && trial_risk <= risk - 1e-4 * step * g2) {
          theta = std::move(trial);
          risk = trial_risk;
          grad = std::move(trial_grad);
          accepted = true;
          step *= 2.0;
          break;
        }
        step *= 0.5;
      }
      require(risk <= 10.0 * initial + 1e-12, ErrorKind::OptimizationFailure,
              "population risk diverged (10x the starting risk)");
      if (!accepted) break;
    }
    if (risk < best.risk) {
      best.risk = risk;
      best.theta = theta;
    }
  }
  return best;
}

HessNormResult hessian_norm_init(const Model& model, std::span<const double> theta1,
                                 const FinitePopulation& pop, const AdversaryConfig& adv,
                                 std::size_t power_iters) {
  require(power_iters >= 20, ErrorKind::Config, "power iteration needs at least 20 iterations");
  HessNormResult out;
  const Vec theta(theta1.begin(), theta1.end());
  for (std::size_t i = 0; i < pop.size(); ++i) {
    if (pop.weight(i) == 0.0) continue;
    const LabeledExample zadv = attack(model, theta, pop.point(i), adv);
    const auto pr = power_norm([&](const Vec& v) { return model.hvp_theta(theta, zadv, v); },
                               model.param_dim(), power_iters, 1e-8, 0x4e55ULL);
    out.value += pop.weight(i) * pr.value;
    out.converged = out.converged && pr.converged;
  }
  return out;
}

GammaDelta gamma_delta(const ConstantsReport& k, double c, std::size_t T) {
  require(c > 0.0, ErrorKind::Contract, "c must be positive");
  require(T >= 1, ErrorKind::Contract, "T must be at least 1");
  GammaDelta out;
  double r = k.r;
  if (r < 0.0) {
    out.warnings.push_back("r=" + format_real(r) + " < 0 clamped to 0 (estimation noise)");
    r = 0.0;
  }
  const double log_factor = 1.0 + std::log(static_cast<double>(T));
  const double sqrt_eta_l = std::sqrt(k.eta * k.L);
  out.delta_star = k.rho * (std::sqrt(r * c) + c * k.sigma + c * sqrt_eta_l);
  out.gamma_raw = k.hess_norm_init + k.nu + 2.0 * k.rho * std::sqrt(r * c * log_factor) +
                  2.0 * k.rho * k.sigma * c * std::sqrt(k.beta * c * log_factor) +
                  k.rho * c * (k.sigma + 2.0 * sqrt_eta_l) * log_factor;
  out.gamma = std::min(k.beta, out.gamma_raw);
  return out;
}

ConstantsReport estimate_constants(const Model& model, const FinitePopulation& pop,
                                   std::span<const double> theta1,
                                   std::span<const Vec> theta_probes, const AdversaryConfig& adv,
                                   const ConstantsConfig& cfg) {
  ConstantsReport rep = estimate_lipschitz(model, adv, cfg.lipschitz);
  rep.sigma = estimate_sigma(model, theta_probes, pop, adv);
  rep.provenance["sigma"] = {"estimated", theta_probes.size(), 0.0,
                             "max over parameter snapshots, exact population expectation"};

  OptBudget budget = cfg.opt;
  budget.starts.insert(budget.starts.begin(), Vec(theta1.begin(), theta1.end()));
  const OptResult opt = estimate_opt_risk(model, pop, adv, budget);
  rep.r = population_risk(model, theta1, pop, adv) - opt.risk;
  rep.provenance["r"] = {"estimated", budget.starts.size() + budget.restarts, 0.0,
                         opt.upper_bound ? "non-convex: R_D(theta*) replaced by a found value "
                                           "(upper bound), r is a lower estimate"
                                         : "convex: gradient descent optimum"};
  if (rep.r < -1e-9) rep.warnings.push_back("r estimated negative: " + format_real(rep.r));

  const auto hn = hessian_norm_init(model, theta1, pop, adv, cfg.power_iters);
  rep.hess_norm_init = hn.value;
  rep.provenance["hessNormInit"] = {"estimated", pop.size(), 0.0,
                                    hn.converged ? "power iteration converged"
                                                 : "power iteration hit the iteration cap"};
  if (!hn.converged) rep.warnings.push_back("hessian power iteration did not converge");

  const auto gd = gamma_delta(rep, cfg.c, cfg.T);
  rep.gamma = gd.gamma;
  rep.gamma_raw = gd.gamma_raw;
  rep.delta_star = gd.delta_star;
  for (const auto& w : gd.warnings) rep.warnings.push_back(w);
  rep.provenance["gamma"] = {"derived", 0, 0.0, "min(beta, explicit curvature bound at t=T)"};
  rep.provenance["deltaStar"] = {"derived", 0, 0.0, ""};
  return rep;
}

}  // namespace stablab
