#include "stablab/bounds.hpp"

#include <cmath>
#include <limits>

#include "stablab/error.hpp"

namespace stablab {
namespace {

void check_nonneg(const BoundConstants& k) {
  for (double v : {k.L, k.beta, k.eta, k.sigma, k.r, k.gamma}) {
    require(v >= 0.0 && !std::isnan(v), ErrorKind::Contract, "bound inputs must be nonnegative");
  }
}

double xing_convex(const BoundConstants& k, double alpha, std::size_t T, std::size_t n) {
  const double nn = static_cast<double>(n), tt = static_cast<double>(T);
  return alpha * k.L * k.L * std::sqrt(tt) + alpha * k.L * k.L * tt / nn;
}

double xiao_convex(const BoundConstants& k, double alpha, std::size_t T, std::size_t n) {
  const double nn = static_cast<double>(n), tt = static_cast<double>(T);
  return (k.eta + 2.0 * k.L / nn) * alpha * tt * k.L;
}

}  // namespace

BoundConstants BoundConstants::from(const ConstantsReport& r) {
  return {r.L, r.beta, r.eta, r.sigma, std::max(0.0, r.r), r.gamma};
}

double bound_convex_general(const BoundConstants& k, std::span<const double> alphas,
                            std::size_t n) {
  check_nonneg(k);
  require(n >= 1, ErrorKind::Contract, "n must be positive");
  double s1 = 0.0, s2 = 0.0;
  for (double a : alphas) {
    require(a >= 0.0, ErrorKind::Contract, "negative step size");
    s1 += a;
    s2 += a * a;
  }
  const double nn = static_cast<double>(n);
  return (2.0 * k.sigma * k.L / nn + k.L * k.eta) * s1 +
         (4.0 * k.L / nn) * std::sqrt(s1) *
             std::sqrt(k.r + 0.5 * k.beta * k.sigma * k.sigma * s2 + k.eta * k.L * s1);
}

double bound_convex_constant(const BoundConstants& k, double alpha, std::size_t T, std::size_t n) {
  check_nonneg(k);
  require(n >= 1 && alpha >= 0.0, ErrorKind::Contract, "invalid step size or n");
  const double nn = static_cast<double>(n), tt = static_cast<double>(T);
  return k.eta * alpha * k.L * tt +
         (2.0 * alpha * k.L * tt / nn) *
             (k.sigma + std::sqrt(2.0) * k.sigma + 2.0 * std::sqrt(k.eta * k.L)) +
         4.0 * k.L * std::sqrt(alpha * k.r * tt) / nn;
}

double nonconvex_form(double L, double eta, double curvature, double c, std::size_t T,
                      std::size_t n, double risk) {
  require(L >= 0 && eta >= 0 && curvature >= 0 && c > 0 && risk >= 0 && n >= 1,
          ErrorKind::Contract, "invalid non-convex bound inputs");
  const double q = c * curvature;
  require(q > 0.0, ErrorKind::DegenerateExponent,
          "c*curvature = 0: exponent degenerates (limit is +inf)");
  const double nn = static_cast<double>(n), tt = static_cast<double>(T);
  return ((1.0 + 1.0 / q) / nn) * std::pow(2.0 * c * L * L + nn * c * eta * L, 1.0 / (1.0 + q)) *
         std::pow(risk * tt, q / (1.0 + q));
}

double bound_nonconvex(const BoundConstants& k, double c, std::size_t T, std::size_t n,
                       double risk_at_output) {
  check_nonneg(k);
  return nonconvex_form(k.L, k.eta, k.gamma, c, T, n, risk_at_output);
}

double bound_multipass(const BoundConstants& k, double c, std::size_t T, std::size_t n,
                       double risk_at_output) {
  check_nonneg(k);
  return nonconvex_form(k.L, k.eta, k.beta, c, T, n, risk_at_output);
}

Baselines bound_baselines(const BoundConstants& k, double alpha, double c, std::size_t T,
                          std::size_t n, double B) {
  check_nonneg(k);
  require(B >= 0.0, ErrorKind::Contract, "loss bound B must be nonnegative");
  Baselines b;
  b.xing_convex = xing_convex(k, alpha, T, n);
  b.xiao_convex = xiao_convex(k, alpha, T, n);
  b.xiao_nonconvex = nonconvex_form(k.L, k.eta, k.beta, c, T, n, B);
  return b;
}

Baselines bound_baselines(const BoundConstants& k, double alpha, double c, std::size_t T,
                          std::size_t n, double B, double max_observed_loss) {
  require(B >= max_observed_loss, ErrorKind::Contract,
          "loss bound B is below the largest observed loss");
  return bound_baselines(k, alpha, c, T, n, B);
}

const std::vector<std::string>& bound_names() {
  static const std::vector<std::string> names{"convexGeneral", "convexConstant", "nonConvex",
                                              "multiPass",     "xingConvex",     "xiaoConvex",
                                              "xiaoNonConvex"};
  return names;
}

const BoundValue& BoundReport::get(const std::string& name) const {
  for (const auto& v : values) {
    if (v.name == name) return v;
  }
  throw Error(ErrorKind::Contract, "no bound named " + name);
}

BoundReport evaluate_bounds(const BoundInputs& in) {
  BoundReport rep{in, {}};
  const auto& k = in.consts;
  const bool constant = std::holds_alternative<ConstantStep>(in.schedule);
  const double alpha = step_size(in.schedule, 1);
  const double c = alpha;
  const auto alphas = step_series(in.schedule, in.T);
  const double log_t = std::log(static_cast<double>(std::max<std::size_t>(in.T, 1)));

  auto add = [&](const std::string& name, auto&& fn, std::vector<std::string> flags) {
    BoundValue v{name, 0.0, std::move(flags)};
    try {
      v.value = fn();
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::DegenerateExponent) throw;
      v.value = std::numeric_limits<double>::infinity();
      v.flags.push_back("degenerate-exponent");
    }
    rep.values.push_back(std::move(v));
  };

  std::vector<std::string> step_flags;
  for (double a : alphas) {
    if (k.beta > 0.0 && a > 1.0 / k.beta) {
      step_flags.push_back("step-exceeds-1/beta");
      break;
    }
  }
  std::vector<std::string> const_flags = step_flags;
  if (!constant) const_flags.push_back("schedule-not-constant");

  std::vector<std::string> inv_flags;
  if (constant) inv_flags.push_back("schedule-not-inverse");
  std::vector<std::string> nc_flags = inv_flags;
  if (k.beta > 0.0) {
    double cap = 1.0 / k.beta;
    if (log_t > 0.0) {
      cap = std::min({cap, 1.0 / (4.0 * k.beta * log_t),
                      1.0 / (8.0 * (k.beta * log_t) * (k.beta * log_t))});
    }
    if (c > cap) nc_flags.push_back("c-exceeds-cap");
  }
  std::vector<std::string> mp_flags = inv_flags;
  if (k.beta > 0.0 && c > 1.0 / k.beta) mp_flags.push_back("c-exceeds-1/beta");
  mp_flags.push_back("convexity-not-checked");

  add("convexGeneral", [&] { return bound_convex_general(k, alphas, in.n); }, step_flags);
  add("convexConstant", [&] { return bound_convex_constant(k, alpha, in.T, in.n); }, const_flags);
  add("nonConvex", [&] { return bound_nonconvex(k, c, in.T, in.n, in.risk_at_output); },
      nc_flags);
  add("multiPass", [&] { return bound_multipass(k, c, in.T, in.n, in.risk_at_output); },
      mp_flags);
  add("xingConvex", [&] { return xing_convex(k, alpha, in.T, in.n); }, {"order-only"});
  add("xiaoConvex", [&] { return xiao_convex(k, alpha, in.T, in.n); }, step_flags);
  add("xiaoNonConvex", [&] { return nonconvex_form(k.L, k.eta, k.beta, c, in.T, in.n, in.B); },
      mp_flags);
  return rep;
}

namespace {

nlohmann::json schedule_json(const StepSchedule& s) {
  if (const auto* c = std::get_if<ConstantStep>(&s)) return {{"kind", "constant"}, {"alpha", c->alpha}};
  return {{"kind", "inverse"}, {"c", std::get<InverseStep>(s).c}};
}

StepSchedule schedule_from_json(const nlohmann::json& j) {
  if (j.at("kind") == "constant") return ConstantStep{j.at("alpha").get<double>()};
  return InverseStep{j.at("c").get<double>()};
}

nlohmann::json real_json(double v) {
  if (std::isinf(v)) return "inf";
  return v;
}

double real_from_json(const nlohmann::json& j) {
  if (j.is_string()) return std::numeric_limits<double>::infinity();
  return j.get<double>();
}

}  // namespace

nlohmann::json to_json(const BoundReport& rep) {
  const auto& in = rep.inputs;
  nlohmann::json inputs{{"L", in.consts.L},         {"beta", in.consts.beta},
                        {"eta", in.consts.eta},     {"sigma", in.consts.sigma},
                        {"r", in.consts.r},         {"gamma", in.consts.gamma},
                        {"n", in.n},                {"T", in.T},
                        {"schedule", schedule_json(in.schedule)},
                        {"riskAtOutput", in.risk_at_output},
                        {"B", in.B}};
  nlohmann::json values = nlohmann::json::array();
  for (const auto& v : rep.values) {
    values.push_back({{"name", v.name}, {"value", real_json(v.value)}, {"flags", v.flags}});
  }
  return {{"inputs", inputs}, {"values", values}};
}

BoundReport bound_report_from_json(const nlohmann::json& j) {
  BoundReport rep;
  const auto& in = j.at("inputs");
  rep.inputs.consts = {in.at("L").get<double>(),     in.at("beta").get<double>(),
                       in.at("eta").get<double>(),   in.at("sigma").get<double>(),
                       in.at("r").get<double>(),     in.at("gamma").get<double>()};
  rep.inputs.n = in.at("n").get<std::size_t>();
  rep.inputs.T = in.at("T").get<std::size_t>();
  rep.inputs.schedule = schedule_from_json(in.at("schedule"));
  rep.inputs.risk_at_output = in.at("riskAtOutput").get<double>();
  rep.inputs.B = in.at("B").get<double>();
  for (const auto& v : j.at("values")) {
    rep.values.push_back({v.at("name").get<std::string>(), real_from_json(v.at("value")),
                          v.at("flags").get<std::vector<std::string>>()});
  }
  return rep;
}

}  // namespace stablab
