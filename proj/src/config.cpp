#include "stablab/config.hpp"

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "stablab/error.hpp"
#include "stablab/rng.hpp"

namespace stablab {
namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "seed", "out", "jobs",
      "dataset.name", "dataset.d", "dataset.m", "dataset.separation", "dataset.spread",
      "dataset.noise", "dataset.size", "dataset.seed",
      "model.kind", "model.hidden", "model.activation", "model.loss", "model.init",
      "adversary.eps", "adversary.norm", "adversary.method", "adversary.steps",
      "adversary.grid_res",
      "train.n", "train.T", "train.passes", "train.schedule", "train.alpha", "train.c",
      "train.reshuffle",
      "stability.mode", "stability.trials", "stability.gap_trials", "stability.cap",
      "constants.probes", "constants.ball_radius", "constants.input_radius",
      "constants.restarts", "constants.opt_steps", "constants.snapshots",
      "constants.power_iters",
      "sweep.eps", "sweep.epochs", "bounds.B",
      "poison.attack", "poison.budget", "poison.norm", "poison.rem_rho", "poison.craft_budget",
      "poison.craft_steps", "poison.inner_steps", "poison.rounds", "poison.victim_steps",
      "poison.craft_hidden", "poison.seed",
  };
  return keys;
}

class Reader {
 public:
  explicit Reader(const std::map<std::string, std::string>& kv) : kv_(kv) {}

  bool has(const std::string& k) const { return kv_.contains(k); }
  std::string str(const std::string& k, std::string def) const {
    auto it = kv_.find(k);
    return it == kv_.end() ? def : it->second;
  }
  double real(const std::string& k, double def) const {
    auto it = kv_.find(k);
    if (it == kv_.end()) return def;
    return parse_real(k, it->second);
  }
  std::uint64_t integer(const std::string& k, std::uint64_t def) const {
    auto it = kv_.find(k);
    if (it == kv_.end()) return def;
    return parse_int(k, it->second);
  }
  bool flag(const std::string& k, bool def) const {
    const std::string v = str(k, def ? "true" : "false");
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw Error(ErrorKind::Config, k + ": expected true/false, got '" + v + "'");
  }
  template <class T, class F>
  std::vector<T> list(const std::string& k, std::vector<T> def, F parse) const {
    auto it = kv_.find(k);
    if (it == kv_.end()) return def;
    std::vector<T> out;
    std::stringstream ss(it->second);
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = trim(item);
      if (!item.empty()) out.push_back(parse(k, item));
    }
    return out;
  }

  static double parse_real(const std::string& k, const std::string& v) {
    double x = 0.0;
    const auto r = std::from_chars(v.data(), v.data() + v.size(), x);
    require(r.ec == std::errc{} && r.ptr == v.data() + v.size(), ErrorKind::Config,
            k + ": expected a number, got '" + v + "'");
    return x;
  }
  static std::uint64_t parse_int(const std::string& k, const std::string& v) {
    std::uint64_t x = 0;
    const auto r = std::from_chars(v.data(), v.data() + v.size(), x);
    require(r.ec == std::errc{} && r.ptr == v.data() + v.size(), ErrorKind::Config,
            k + ": expected a nonnegative integer, got '" + v + "'");
    return x;
  }

 private:
  const std::map<std::string, std::string>& kv_;
};

NormP norm_from(const std::string& k, const std::string& v) {
  if (v == "inf") return NormP::Linf;
  if (v == "2") return NormP::L2;
  throw Error(ErrorKind::Config, k + ": norm must be 'inf' or '2'");
}

std::string norm_str(NormP p) { return p == NormP::L2 ? "2" : "inf"; }

template <class T>
std::string join(const std::vector<T>& xs) {
  std::string s;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) s += ",";
    if constexpr (std::is_floating_point_v<T>) {
      s += format_real(xs[i]);
    } else {
      s += std::to_string(xs[i]);
    }
  }
  return s;
}

}  // namespace

std::map<std::string, std::string> parse_key_values(std::string_view text) {
  std::map<std::string, std::string> kv;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    require(eq != std::string::npos, ErrorKind::Config,
            "line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(std::string_view(t).substr(0, eq));
    const std::string value = trim(std::string_view(t).substr(eq + 1));
    require(!key.empty(), ErrorKind::Config, "line " + std::to_string(line_no) + ": empty key");
    require(!kv.contains(key), ErrorKind::Config, "duplicate key '" + key + "'");
    kv[key] = value;
  }
  return kv;
}

ExperimentConfig config_from_entries(const std::map<std::string, std::string>& kv) {
  for (const auto& [k, v] : kv) {
    require(known_keys().contains(k), ErrorKind::Config, "unknown config key '" + k + "'");
  }
  Reader r(kv);
  ExperimentConfig c;
  c.seed = r.integer("seed", 0);
  c.out = r.str("out", "out");
  c.jobs = r.integer("jobs", 1);

  auto& ds = c.dataset;
  ds.name = r.str("dataset.name", ds.name);
  if (ds.name == "two-moons") {
    ds.d = 2;
    ds.m = 2;
  } else if (ds.name == "grid-digits") {
    ds.d = 15;
    ds.m = 10;
  }
  ds.d = r.integer("dataset.d", ds.d);
  ds.m = r.integer("dataset.m", ds.m);
  ds.separation = r.real("dataset.separation", ds.separation);
  ds.spread = r.real("dataset.spread", ds.spread);
  ds.noise = r.real("dataset.noise", ds.noise);
  ds.size = r.integer("dataset.size", ds.size);
  ds.seed = r.integer("dataset.seed", derive_seed(c.seed, "dataset"));

  const std::string kind = r.str("model.kind", "linear-softmax");
  auto hidden = r.list<std::size_t>("model.hidden", {16}, Reader::parse_int);
  std::vector<std::size_t> widths = {ds.d};
  if (kind == "mlp") widths.insert(widths.end(), hidden.begin(), hidden.end());
  if (kind != "quadratic") widths.push_back(ds.m);
  c.model = model_spec_from_json({{"kind", kind},
                                  {"widths", widths},
                                  {"activation", r.str("model.activation", "softplus")},
                                  {"loss", r.str("model.loss", "cross-entropy")}});
  const std::string init = r.str("model.init", "random");
  require(init == "random" || init == "zero", ErrorKind::Config,
          "model.init must be 'random' or 'zero'");
  c.zero_init = init == "zero";

  const double eps = r.real("adversary.eps", 0.0);
  const NormP norm = norm_from("adversary.norm", r.str("adversary.norm", "inf"));
  const std::string method = r.str("adversary.method", "pgd");
  if (method == "pgd") {
    c.adversary = AdversaryConfig::pgd(eps, norm, static_cast<int>(r.integer("adversary.steps", 10)));
  } else if (method == "grid") {
    c.adversary = AdversaryConfig::grid(eps, norm, r.real("adversary.grid_res", 0.01));
  } else if (method == "closed-form") {
    c.adversary = AdversaryConfig::closed_form(eps);
    c.adversary.norm = norm;
  } else {
    throw Error(ErrorKind::Config, "adversary.method must be pgd, grid or closed-form");
  }
  c.adversary.validate();

  c.n = r.integer("train.n", c.n);
  c.T = r.integer("train.T", c.T);
  c.passes = r.integer("train.passes", c.passes);
  const std::string sched = r.str("train.schedule", "constant");
  if (sched == "constant") {
    c.schedule = ConstantStep{r.real("train.alpha", 0.1)};
  } else if (sched == "inverse") {
    c.schedule = InverseStep{r.real("train.c", 0.1)};
  } else {
    throw Error(ErrorKind::Config, "train.schedule must be 'constant' or 'inverse'");
  }
  c.reshuffle = r.flag("train.reshuffle", false);

  const std::string mode = r.str("stability.mode", "mc");
  require(mode == "mc" || mode == "exact", ErrorKind::Config,
          "stability.mode must be 'mc' or 'exact'");
  c.exact = mode == "exact";
  c.stability_trials = r.integer("stability.trials", c.stability_trials);
  c.gap_trials = r.integer("stability.gap_trials", c.gap_trials);
  c.enumeration_cap = r.real("stability.cap", c.enumeration_cap);

  c.probes.probes = r.integer("constants.probes", c.probes.probes);
  if (r.str("constants.ball_radius", "auto") != "auto") {
    c.ball_radius = r.real("constants.ball_radius", 0.0);
    require(*c.ball_radius > 0.0, ErrorKind::Config, "constants.ball_radius must be positive");
  }
  c.probes.input_radius = r.real("constants.input_radius", c.probes.input_radius);
  c.opt_restarts = r.integer("constants.restarts", c.opt_restarts);
  c.opt_steps = r.integer("constants.opt_steps", c.opt_steps);
  c.snapshots = r.integer("constants.snapshots", c.snapshots);
  c.power_iters = r.integer("constants.power_iters", c.power_iters);

  c.sweep_eps = r.list<double>("sweep.eps", {}, Reader::parse_real);
  c.sweep_epochs = r.flag("sweep.epochs", false);
  if (r.has("bounds.B")) c.B = r.real("bounds.B", 0.0);

  const std::string attack = r.str("poison.attack", "none");
  if (attack != "none") {
    PoisonConfig p;
    p.attack = poison_attack_from_string(attack);
    p.budget = r.real("poison.budget", 0.0);
    p.norm = norm_from("poison.norm", r.str("poison.norm", norm_str(norm)));
    if (r.has("poison.rem_rho")) p.rem_rho = r.real("poison.rem_rho", 0.0);
    if (r.has("poison.craft_budget")) p.craft_budget = r.real("poison.craft_budget", 0.0);
    p.craft_steps = r.integer("poison.craft_steps", p.craft_steps);
    if (r.has("poison.inner_steps")) {
      p.inner_steps = static_cast<int>(r.integer("poison.inner_steps", 0));
    }
    p.rounds = r.integer("poison.rounds", p.rounds);
    p.victim_steps = r.integer("poison.victim_steps", p.victim_steps);
    p.seed = r.integer("poison.seed", derive_seed(c.seed, "poison"));
    p.jobs = c.jobs;
    p.validate();
    c.poison = p;
    c.craft_hidden = r.list<std::size_t>("poison.craft_hidden", c.craft_hidden, Reader::parse_int);
  }

  require(c.n >= 1, ErrorKind::Config, "train.n must be >= 1");
  require(c.passes >= 1, ErrorKind::Config, "train.passes must be >= 1");
  require(c.T <= c.n * c.passes, ErrorKind::Config, "train.T exceeds train.n * train.passes");
  require(c.gap_trials >= 1, ErrorKind::Config, "stability.gap_trials must be >= 1");
  require(c.jobs >= 1, ErrorKind::Config, "jobs must be >= 1");
  return c;
}

std::map<std::string, std::string> ExperimentConfig::entries() const {
  std::map<std::string, std::string> e;
  e["seed"] = std::to_string(seed);
  e["out"] = out.string();
  e["jobs"] = std::to_string(jobs);
  e["dataset.name"] = dataset.name;
  e["dataset.d"] = std::to_string(dataset.d);
  e["dataset.m"] = std::to_string(dataset.m);
  e["dataset.separation"] = format_real(dataset.separation);
  e["dataset.spread"] = format_real(dataset.spread);
  e["dataset.noise"] = format_real(dataset.noise);
  e["dataset.size"] = std::to_string(dataset.size);
  e["dataset.seed"] = std::to_string(dataset.seed);
  e["model.kind"] = to_string(model.kind);
  if (model.kind == ModelKind::Mlp) {
    e["model.hidden"] =
        join(std::vector<std::size_t>(model.widths.begin() + 1, model.widths.end() - 1));
  }
  e["model.activation"] = to_string(model.activation);
  e["model.loss"] = to_string(model.loss);
  e["model.init"] = zero_init ? "zero" : "random";
  e["adversary.eps"] = format_real(adversary.epsilon);
  e["adversary.norm"] = norm_str(adversary.norm);
  if (const auto* p = std::get_if<Pgd>(&adversary.method)) {
    e["adversary.method"] = "pgd";
    e["adversary.steps"] = std::to_string(p->steps);
  } else if (const auto* g = std::get_if<GridOracle>(&adversary.method)) {
    e["adversary.method"] = "grid";
    e["adversary.grid_res"] = format_real(g->resolution);
  } else {
    e["adversary.method"] = "closed-form";
  }
  e["train.n"] = std::to_string(n);
  e["train.T"] = std::to_string(T);
  e["train.passes"] = std::to_string(passes);
  if (const auto* s = std::get_if<ConstantStep>(&schedule)) {
    e["train.schedule"] = "constant";
    e["train.alpha"] = format_real(s->alpha);
  } else {
    e["train.schedule"] = "inverse";
    e["train.c"] = format_real(std::get<InverseStep>(schedule).c);
  }
  e["train.reshuffle"] = reshuffle ? "true" : "false";
  e["stability.mode"] = exact ? "exact" : "mc";
  e["stability.trials"] = std::to_string(stability_trials);
  e["stability.gap_trials"] = std::to_string(gap_trials);
  e["stability.cap"] = format_real(enumeration_cap);
  e["constants.probes"] = std::to_string(probes.probes);
  e["constants.ball_radius"] = ball_radius ? format_real(*ball_radius) : "auto";
  e["constants.input_radius"] = format_real(probes.input_radius);
  e["constants.restarts"] = std::to_string(opt_restarts);
  e["constants.opt_steps"] = std::to_string(opt_steps);
  e["constants.snapshots"] = std::to_string(snapshots);
  e["constants.power_iters"] = std::to_string(power_iters);
  if (!sweep_eps.empty()) e["sweep.eps"] = join(sweep_eps);
  e["sweep.epochs"] = sweep_epochs ? "true" : "false";
  if (B) e["bounds.B"] = format_real(*B);
  if (poison) {
    e["poison.attack"] = to_string(poison->attack);
    e["poison.budget"] = format_real(poison->budget);
    e["poison.norm"] = norm_str(poison->norm);
    e["poison.rem_rho"] = format_real(poison->rem_rho_value());
    e["poison.craft_budget"] = format_real(poison->craft_budget_value());
    e["poison.craft_steps"] = std::to_string(poison->craft_steps);
    e["poison.inner_steps"] = std::to_string(poison->inner_steps_value());
    e["poison.rounds"] = std::to_string(poison->rounds);
    e["poison.victim_steps"] = std::to_string(poison->victim_steps);
    e["poison.craft_hidden"] = join(craft_hidden);
    e["poison.seed"] = std::to_string(poison->seed);
  }
  return e;
}

std::string ExperimentConfig::canonical() const {
  std::string s;
  for (const auto& [k, v] : entries()) s += k + " = " + v + "\n";
  return s;
}

std::uint64_t ExperimentConfig::hash() const {
  auto e = entries();
  e.erase("out");
  e.erase("jobs");
  std::string s;
  for (const auto& [k, v] : e) s += k + "=" + v + "\n";
  return fnv1a64(s);
}

std::string ExperimentConfig::hash_hex() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash()));
  return buf;
}

std::uint64_t ExperimentConfig::stream(std::string_view name) const {
  return derive_seed(seed, name);
}

TrainConfig ExperimentConfig::train_config(const Vec& theta1) const {
  TrainConfig t;
  t.steps = T;
  t.passes = passes;
  t.schedule = schedule;
  t.init = theta1;
  t.perm_seed = stream("train");
  t.reshuffle_each_pass = reshuffle;
  return t;
}

ExperimentConfig parse_config(std::string_view text) {
  return config_from_entries(parse_key_values(text));
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), ErrorKind::Io, "cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

}  // namespace stablab
