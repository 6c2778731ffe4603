#include "stablab/adversary.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "stablab/error.hpp"
#include "stablab/rng.hpp"

namespace stablab {
namespace {

constexpr std::size_t kMaxGridPoints = 5'000'000;

void project(Vec& x, const Vec& z, double eps, NormP p) {
  if (p == NormP::Linf) {
    for (std::size_t j = 0; j < x.size(); ++j) x[j] = std::clamp(x[j], z[j] - eps, z[j] + eps);
  } else {
    Vec d = sub(x, z);
    const double n = norm2(d);
    if (n > eps) {
      const double s = eps / n;
      for (std::size_t j = 0; j < x.size(); ++j) x[j] = z[j] + s * d[j];
    }
  }
  for (auto& v : x) v = std::clamp(v, 0.0, 1.0);
}

AttackResult run_pgd(const Model& model, std::span<const double> theta, const LabeledExample& z,
                     const AdversaryConfig& cfg, const Pgd& pgd) {
  AttackResult best{z, model.loss(theta, z), 0};
  LabeledExample x = z;
  if (pgd.random_start_seed) {
    Rng rng(*pgd.random_start_seed);
    for (auto& v : x.features) v += rng.uniform(-cfg.epsilon, cfg.epsilon);
    project(x.features, z.features, cfg.epsilon, cfg.norm);
  }
  Vec g;
  for (int s = 0; s <= pgd.steps; ++s) {
    const double value = model.loss_and_grads(theta, x, nullptr, s < pgd.steps ? &g : nullptr);
    if (value > best.loss) best = {x, value, 0};
    if (s == pgd.steps) break;
    if (cfg.norm == NormP::Linf) {
      for (std::size_t j = 0; j < g.size(); ++j) {
        const double sg = g[j] > 0 ? 1.0 : (g[j] < 0 ? -1.0 : 0.0);
        x.features[j] += pgd.step_size * sg;
      }
    } else {
      const double gn = norm2(g);
      if (gn == 0.0) break;
      simd::axpy(pgd.step_size / gn, g, x.features);
    }
    project(x.features, z.features, cfg.epsilon, cfg.norm);
  }
  return best;
}

AttackResult run_closed_form(const Model& model, std::span<const double> theta,
                             const LabeledExample& z, double eps) {
  const std::size_t d = model.input_dim();
  const std::size_t y = z.label, o = 1 - z.label;
  const double* wy = theta.data() + model.weight_offset(0) + y * d;
  const double* wo = theta.data() + model.weight_offset(0) + o * d;
  LabeledExample x = z;
  for (std::size_t j = 0; j < d; ++j) {
    const double u = wy[j] - wo[j];
    if (u > 0) x.features[j] = std::max(0.0, z.features[j] - eps);
    else if (u < 0) x.features[j] = std::min(1.0, z.features[j] + eps);
  }
  const double value = model.loss(theta, x);
  return {std::move(x), value, 0};
}

AttackResult run_grid(const Model& model, std::span<const double> theta, const LabeledExample& z,
                      const AdversaryConfig& cfg, double res) {
  const double eps = cfg.epsilon;
  Vec offsets;
  const auto count = static_cast<std::size_t>(std::floor(2.0 * eps / res + 1e-9));
  for (std::size_t k = 0; k <= count; ++k) offsets.push_back(-eps + static_cast<double>(k) * res);
  if (offsets.back() < eps - 1e-12) offsets.push_back(eps);
  const std::size_t d = z.features.size();
  double total = 1.0;
  for (std::size_t j = 0; j < d; ++j) total *= static_cast<double>(offsets.size());
  require(total <= static_cast<double>(kMaxGridPoints), ErrorKind::Config,
          "grid oracle lattice too large for this input dimension/resolution");

  std::vector<std::size_t> idx(d, 0);
  std::vector<double> losses;
  AttackResult best{z, model.loss(theta, z), 0};
  LabeledExample x = z;
  Vec off(d);
  while (true) {
    for (std::size_t j = 0; j < d; ++j) off[j] = offsets[idx[j]];
    if (cfg.norm == NormP::Linf || norm2(off) <= eps + 1e-12) {
      for (std::size_t j = 0; j < d; ++j) {
        x.features[j] = std::clamp(z.features[j] + off[j], 0.0, 1.0);
      }
      const double value = model.loss(theta, x);
      losses.push_back(value);
      if (value > best.loss) best = {x, value, 0};
    }
    std::size_t j = 0;
    while (j < d && ++idx[j] == offsets.size()) idx[j++] = 0;
    if (j == d) break;
  }
  for (double v : losses) {
    if (v >= best.loss - 1e-9) ++best.ties;
  }
  return best;
}

}  // namespace

AdversaryConfig AdversaryConfig::pgd(double eps, NormP p, int steps) {
  return {eps, p, Pgd{steps, eps / 4.0, std::nullopt}};
}

AdversaryConfig AdversaryConfig::grid(double eps, NormP p, double resolution) {
  return {eps, p, GridOracle{resolution}};
}

AdversaryConfig AdversaryConfig::closed_form(double eps) {
  return {eps, NormP::Linf, ClosedFormLinear{}};
}

void AdversaryConfig::validate() const {
  require(epsilon >= 0.0 && std::isfinite(epsilon), ErrorKind::Config,
          "adversarial budget must be nonnegative");
  if (const auto* p = std::get_if<Pgd>(&method)) {
    require(p->steps >= 1, ErrorKind::Config, "pgd needs at least one step");
    require(epsilon == 0.0 || p->step_size > 0.0, ErrorKind::Config,
            "pgd step size must be positive");
  } else if (const auto* g = std::get_if<GridOracle>(&method)) {
    require(g->resolution > 0.0, ErrorKind::Config, "grid resolution must be positive");
  } else {
    require(norm == NormP::Linf, ErrorKind::Config, "closed-form maximizer is L-inf only");
  }
}

std::string AdversaryConfig::describe() const {
  std::ostringstream os;
  os << "eps=" << format_real(epsilon) << " norm=" << (norm == NormP::L2 ? "2" : "inf");
  if (const auto* p = std::get_if<Pgd>(&method)) {
    os << " method=pgd steps=" << p->steps << " step=" << format_real(p->step_size);
  } else if (const auto* g = std::get_if<GridOracle>(&method)) {
    os << " method=grid res=" << format_real(g->resolution);
  } else {
    os << " method=closed-form";
  }
  return os.str();
}

nlohmann::json to_json(const AdversaryConfig& cfg) {
  nlohmann::json j{{"eps", cfg.epsilon}, {"norm", cfg.norm == NormP::L2 ? "2" : "inf"}};
  if (const auto* p = std::get_if<Pgd>(&cfg.method)) {
    j["method"] = "pgd";
    j["pgd_steps"] = p->steps;
    j["pgd_step_size"] = p->step_size;
  } else if (const auto* g = std::get_if<GridOracle>(&cfg.method)) {
    j["method"] = "grid";
    j["grid_res"] = g->resolution;
  } else {
    j["method"] = "closed-form";
  }
  return j;
}

namespace {

void check_method(const Model& model, const AdversaryConfig& cfg) {
  cfg.validate();
  if (std::holds_alternative<ClosedFormLinear>(cfg.method)) {
    require(model.is_linear_binary_ce(), ErrorKind::UnsupportedMethod,
            "closed-form maximizer requires a binary linear-softmax cross-entropy model");
  }
}

}  // namespace

AttackResult attack_detailed(const Model& model, std::span<const double> theta,
                             const LabeledExample& z, const AdversaryConfig& cfg) {
  check_method(model, cfg);
  if (cfg.epsilon == 0.0) return {z, model.loss(theta, z), 0};
  if (const auto* p = std::get_if<Pgd>(&cfg.method)) return run_pgd(model, theta, z, cfg, *p);
  if (const auto* g = std::get_if<GridOracle>(&cfg.method)) {
    return run_grid(model, theta, z, cfg, g->resolution);
  }
  return run_closed_form(model, theta, z, cfg.epsilon);
}

LabeledExample attack(const Model& model, std::span<const double> theta, const LabeledExample& z,
                      const AdversaryConfig& cfg) {
  return attack_detailed(model, theta, z, cfg).point;
}

double adv_loss(const Model& model, std::span<const double> theta, const LabeledExample& z,
                const AdversaryConfig& cfg) {
  return attack_detailed(model, theta, z, cfg).loss;
}

Vec adv_grad(const Model& model, std::span<const double> theta, const LabeledExample& z,
             const AdversaryConfig& cfg) {
  Vec g;
  adv_loss_and_grad(model, theta, z, cfg, g);
  return g;
}

double adv_loss_and_grad(const Model& model, std::span<const double> theta,
                         const LabeledExample& z, const AdversaryConfig& cfg, Vec& grad,
                         LabeledExample* point) {
  if (cfg.epsilon == 0.0) {
    check_method(model, cfg);
    if (point) *point = z;
    return model.loss_and_grads(theta, z, &grad, nullptr);
  }
  AttackResult r = attack_detailed(model, theta, z, cfg);
  model.loss_and_grads(theta, r.point, &grad, nullptr);
  if (point) *point = std::move(r.point);
  return r.loss;
}

}  // namespace stablab
