#include "stablab/poison.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "stablab/error.hpp"
#include "stablab/parallel.hpp"
#include "stablab/rng.hpp"

namespace stablab {
namespace {

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::uint64_t hash_params(std::span<const double> theta) {
  std::string s;
  for (double x : theta) s += format_real(x) + ",";
  return fnv1a64(s);
}

std::uint64_t hash_population(const FinitePopulation& pop) {
  std::string s;
  for (std::size_t i = 0; i < pop.size(); ++i) {
    s += format_real(pop.weight(i)) + ":" + std::to_string(pop.point(i).label);
    for (double x : pop.point(i).features) s += "," + format_real(x);
    s += ";";
  }
  return fnv1a64(s);
}

// Moves x + delta back into the budget ball around x and into [0,1]^d. Box
// clipping shrinks every coordinate of delta, so the ball constraint survives.
Vec project(std::span<const double> x, Vec delta, double eps, NormP p) {
  if (p == NormP::Linf) {
    for (auto& d : delta) d = std::clamp(d, -eps, eps);
  } else {
    const double n = norm2(delta);
    if (n > eps) {
      for (auto& d : delta) d *= eps / n;
    }
  }
  Vec out(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) out[j] = std::clamp(x[j] + delta[j], 0.0, 1.0);
  return out;
}

struct Objective {
  const Model& model;
  std::span<const double> theta;
  // Protection radius: when positive the loss is taken at the worst point of
  // this ball around the candidate (robust error-minimizing noise).
  double protect = 0.0;
  NormP norm = NormP::Linf;

  double eval(const LabeledExample& z, Vec& g_input) const {
    if (protect <= 0.0) return model.loss_and_grads(theta, z, nullptr, &g_input);
    const auto inner = AdversaryConfig::pgd(protect, norm, 10);
    const LabeledExample zadv = attack(model, theta, z, inner);
    return model.loss_and_grads(theta, zadv, nullptr, &g_input);
  }
};

struct Minimized {
  Vec features;
  bool improved = false;
};

// Projected descent on the objective over the perturbation ball; best iterate.
Minimized minimize_perturbation(const Objective& obj, const LabeledExample& z,
                                std::size_t target, double eps, NormP p, int steps) {
  const double step = 2.5 * eps / static_cast<double>(steps);
  LabeledExample cur{z.features, target};
  Vec g;
  double best_loss = obj.eval(cur, g);
  const double start_loss = best_loss;
  Minimized best{cur.features, false};
  for (int s = 0; s < steps; ++s) {
    Vec delta = sub(cur.features, z.features);
    if (p == NormP::Linf) {
      for (std::size_t j = 0; j < delta.size(); ++j) {
        delta[j] -= step * static_cast<double>((g[j] > 0.0) - (g[j] < 0.0));
      }
    } else {
      const double gn = norm2(g);
      if (gn == 0.0) break;
      for (std::size_t j = 0; j < delta.size(); ++j) delta[j] -= step * g[j] / gn;
    }
    cur.features = project(z.features, std::move(delta), eps, p);
    const double loss = obj.eval(cur, g);
    if (loss < best_loss) {
      best_loss = loss;
      best.features = cur.features;
    }
  }
  best.improved = best_loss < start_loss;
  return best;
}

Vec train_full_batch(const Model& model, const FinitePopulation& pop, Vec start, double budget,
                     NormP norm, std::size_t steps) {
  if (steps == 0) return start;
  OptBudget b;
  b.restarts = 0;
  b.steps = steps;
  b.starts = {std::move(start)};
  const auto adv = budget > 0.0 ? AdversaryConfig::pgd(budget, norm) : AdversaryConfig{};
  return estimate_opt_risk(model, pop, adv, b).theta;
}

std::filesystem::path cache_path(const PoisonConfig& cfg, const Model& model,
                                 const FinitePopulation& pop) {
  const char* dir = std::getenv("STABLAB_CACHE");
  if (dir == nullptr || *dir == '\0') return {};
  nlohmann::json key = to_json(cfg);
  key.erase("jobs");
  key.erase("budget");  // crafting depends on the budget only through craft_budget
  key["craft_budget"] = cfg.attack == PoisonAttack::HYP ? cfg.craft_budget_value() : 0.0;
  key["model"] = to_json(model.spec());
  key["population"] = hex64(hash_population(pop));
  return std::filesystem::path(dir) / ("craft-" + hex64(fnv1a64(key.dump())) + ".txt");
}

std::optional<Vec> load_cached(const std::filesystem::path& path, std::size_t k) {
  if (path.empty() || !std::filesystem::exists(path)) return std::nullopt;
  std::ifstream in(path);
  Vec theta;
  double x;
  while (in >> x) theta.push_back(x);
  if (theta.size() != k) return std::nullopt;
  return theta;
}

void store_cached(const std::filesystem::path& path, std::span<const double> theta) {
  if (path.empty()) return;
  std::filesystem::create_directories(path.parent_path());
  const auto tmp = path.string() + ".tmp" + hex64(hash_params(theta));
  {
    std::ofstream out(tmp);
    for (double x : theta) out << format_real(x) << '\n';
  }
  std::filesystem::rename(tmp, path);
}

Vec random_offset(Rng& rng, std::size_t d, double eps, NormP p) {
  if (p == NormP::Linf) {
    Vec v(d);
    for (auto& x : v) x = rng.uniform(-eps, eps);
    return v;
  }
  Vec v = rng.normal_vector(d);
  const double n = norm2(v);
  const double r = eps * std::pow(rng.uniform(), 1.0 / static_cast<double>(d));
  for (auto& x : v) x *= r / n;
  return v;
}

}  // namespace

std::string to_string(PoisonAttack a) {
  switch (a) {
    case PoisonAttack::EM: return "EM";
    case PoisonAttack::REM: return "REM";
    case PoisonAttack::ADV: return "ADV";
    case PoisonAttack::HYP: return "HYP";
    case PoisonAttack::RAN: return "RAN";
  }
  return "?";
}

PoisonAttack poison_attack_from_string(const std::string& s) {
  for (auto a : {PoisonAttack::EM, PoisonAttack::REM, PoisonAttack::ADV, PoisonAttack::HYP,
                 PoisonAttack::RAN}) {
    if (to_string(a) == s) return a;
  }
  throw Error(ErrorKind::Config, "unknown poison attack '" + s + "'");
}

int PoisonConfig::inner_steps_value() const {
  if (inner_steps) return *inner_steps;
  return attack == PoisonAttack::ADV || attack == PoisonAttack::HYP ? 100 : 10;
}

void PoisonConfig::validate() const {
  require(std::isfinite(budget) && budget >= 0.0, ErrorKind::Config, "poison budget must be >= 0");
  require(rem_rho_value() >= 0.0, ErrorKind::Config, "REM protection radius must be >= 0");
  require(craft_budget_value() >= 0.0, ErrorKind::Config, "crafting budget must be >= 0");
  require(inner_steps_value() >= 1, ErrorKind::Config, "inner steps must be >= 1");
}

nlohmann::json to_json(const PoisonConfig& c) {
  return {{"attack", to_string(c.attack)},
          {"budget", c.budget},
          {"norm", c.norm == NormP::L2 ? "2" : "inf"},
          {"rem_rho", c.rem_rho_value()},
          {"craft_budget", c.craft_budget_value()},
          {"craft_steps", c.craft_steps},
          {"inner_steps", c.inner_steps_value()},
          {"rounds", c.rounds},
          {"victim_steps", c.victim_steps},
          {"seed", c.seed},
          {"jobs", c.jobs}};
}

std::uint64_t config_hash(const PoisonConfig& cfg) {
  nlohmann::json j = to_json(cfg);
  j.erase("jobs");
  return fnv1a64(j.dump());
}

PoisonResult poison(const FinitePopulation& pop, const PoisonConfig& cfg,
                    const Model& craft_model) {
  cfg.validate();
  const std::size_t n = pop.size();
  const std::size_t d = pop.dim();
  PoisonResult res{pop, {}, 0, {}};
  std::vector<Vec> features(n);
  for (std::size_t i = 0; i < n; ++i) features[i] = pop.point(i).features;

  if (cfg.budget == 0.0) {
    // identity poison
  } else if (cfg.attack == PoisonAttack::RAN) {
    Rng rng(derive_seed(cfg.seed, "ran"));
    std::vector<Vec> per_class(pop.num_classes());
    for (auto& v : per_class) v = random_offset(rng, d, cfg.budget, cfg.norm);
    for (std::size_t i = 0; i < n; ++i) {
      features[i] = project(pop.point(i).features, per_class[pop.point(i).label], cfg.budget,
                            cfg.norm);
    }
  } else {
    require(craft_model.kind() != ModelKind::Quadratic, ErrorKind::UnsupportedMethod,
            to_string(cfg.attack) + " needs a classifier as crafting model");
    require(craft_model.input_dim() == d && craft_model.num_classes() == pop.num_classes(),
            ErrorKind::UnsupportedMethod, "crafting model does not match the population shape");
    const int steps = cfg.inner_steps_value();
    Vec theta = craft_model.init_params(derive_seed(cfg.seed, "craft-init"));
    std::size_t stalled = 0;

    auto perturb_all = [&](const Objective& obj, bool targeted) {
      std::vector<char> improved(n, 1);
      parallel_for(n, cfg.jobs, [&](std::size_t i) {
        const auto& z = pop.point(i);
        const std::size_t target = targeted ? (z.label + 1) % pop.num_classes() : z.label;
        // The search starts from the current poisoned point but stays inside
        // the ball around the clean one.
        const LabeledExample start{features[i], z.label};
        auto m = minimize_perturbation(obj, start, target, cfg.budget, cfg.norm, steps);
        Vec delta = sub(m.features, z.features);
        features[i] = project(z.features, std::move(delta), cfg.budget, cfg.norm);
        improved[i] = m.improved;
      });
      return static_cast<std::size_t>(std::count(improved.begin(), improved.end(), 0));
    };

    if (cfg.attack == PoisonAttack::EM || cfg.attack == PoisonAttack::REM) {
      const double protect = cfg.attack == PoisonAttack::REM ? cfg.rem_rho_value() : 0.0;
      for (std::size_t round = 0; round < cfg.rounds; ++round) {
        const FinitePopulation current = pop.with_features(features);
        theta = train_full_batch(craft_model, current, std::move(theta), protect, cfg.norm,
                                 cfg.victim_steps);
        stalled = perturb_all(Objective{craft_model, theta, protect, cfg.norm}, false);
      }
    } else {
      const double craft_eps = cfg.attack == PoisonAttack::HYP ? cfg.craft_budget_value() : 0.0;
      const auto path = cache_path(cfg, craft_model, pop);
      if (auto cached = load_cached(path, craft_model.param_dim())) {
        theta = std::move(*cached);
      } else {
        theta = train_full_batch(craft_model, pop, std::move(theta), craft_eps, cfg.norm,
                                 cfg.craft_steps);
        store_cached(path, theta);
      }
      stalled = perturb_all(Objective{craft_model, theta, 0.0, cfg.norm},
                            cfg.attack == PoisonAttack::ADV);
    }
    if (stalled > 0) {
      res.warnings.push_back(std::to_string(stalled) +
                             " points: perturbation search did not lower the crafting loss");
    }
    res.craft_params = theta;
    res.craft_hash = hash_params(theta);
  }

  res.population = pop.with_features(std::move(features));
  res.population.meta = pop.meta;
  res.population.meta["poison.attack"] = to_string(cfg.attack);
  res.population.meta["poison.budget"] = format_real(cfg.budget);
  res.population.meta["poison.norm"] = cfg.norm == NormP::L2 ? "2" : "inf";
  res.population.meta["poison.seed"] = std::to_string(cfg.seed);
  res.population.meta["poison.config_hash"] = hex64(config_hash(cfg));
  res.population.meta["poison.craft_model_hash"] = hex64(res.craft_hash);
  res.population.meta["poison.budget_units"] =
      "feature units on [0,1]^d; image recipe ratios kept (craft/protect = budget/4)";
  return res;
}

GapEstimate poisoned_gen_gap(const Model& model, const FinitePopulation& poisoned, std::size_t n,
                             const TrainConfig& train, const AdversaryConfig& adv,
                             std::size_t trials, std::uint64_t seed, std::size_t jobs) {
  return gen_gap(model, poisoned, n, train, adv, trials, seed, jobs);
}

ConstantsReport poisoned_constants(const Model& model, const FinitePopulation& poisoned,
                                   std::span<const double> theta1,
                                   std::span<const Vec> theta_probes, const AdversaryConfig& adv,
                                   const ConstantsConfig& cfg, const PoisonConfig& poison_cfg) {
  ConstantsReport rep = estimate_constants(model, poisoned, theta1, theta_probes, adv, cfg);
  rep.tag = "poison:" + hex64(config_hash(poison_cfg));
  return rep;
}

}  // namespace stablab
