#include "stablab/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>

#include "json.hpp"
#include "stablab/bounds.hpp"
#include "stablab/error.hpp"
#include "stablab/stability.hpp"

namespace stablab {
namespace {

namespace fs = std::filesystem;

class Csv {
 public:
  explicit Csv(std::vector<std::string> header) : header_(std::move(header)) {}

  void row(std::vector<std::string> cells) {
    require(cells.size() == header_.size(), ErrorKind::Contract, "csv row width mismatch");
    rows_.push_back(std::move(cells));
  }
  std::string str() const {
    std::string s = "schema_version";
    for (const auto& h : header_) s += "," + h;
    s += "\n";
    for (const auto& r : rows_) {
      s += std::to_string(kSchemaVersion);
      for (const auto& c : r) s += "," + c;
      s += "\n";
    }
    return s;
  }

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

std::string join_flags(const std::vector<std::string>& flags) {
  std::string s;
  for (const auto& f : flags) s += (s.empty() ? "" : ";") + f;
  return s;
}

AdversaryConfig with_epsilon(const AdversaryConfig& adv, double eps) {
  if (const auto* p = std::get_if<Pgd>(&adv.method)) {
    return AdversaryConfig::pgd(eps, adv.norm, p->steps);
  }
  if (const auto* g = std::get_if<GridOracle>(&adv.method)) {
    return AdversaryConfig::grid(eps, adv.norm, g->resolution);
  }
  AdversaryConfig out = adv;
  out.epsilon = eps;
  return out;
}

struct Measured {
  ConstantsReport consts;
  BoundReport bounds;
  GapEstimate gap;
};

class Runner {
 public:
  Runner(const ExperimentConfig& cfg, StageResult& result)
      : cfg_(cfg),
        result_(result),
        clean_(make_dataset(cfg.dataset)),
        model_(cfg.model),
        theta1_(cfg.zero_init ? Vec(model_.param_dim(), 0.0)
                              : model_.init_params(cfg.stream("init"))) {
    require(clean_.dim() == model_.input_dim(), ErrorKind::Config,
            "model input width does not match the dataset");
    fs::create_directories(cfg_.out);
  }

  void gen_data() {
    save_population(clean_, path("population.csv"));
    added("population.csv");
  }

  void poison_stage() {
    require(cfg_.poison.has_value(), ErrorKind::Config, "no poison.* section in the config");
    ensure_poisoned();
    save_population(poisoned_->population, path("poisoned.csv"));
    added("poisoned.csv");
    nlohmann::json j = to_json(*cfg_.poison);
    j["config_hash"] = cfg_.hash_hex();
    j["craft_model_hash"] = poisoned_->population.meta.at("poison.craft_model_hash");
    j["warnings"] = poisoned_->warnings;
    write_json("poison.json", j);
  }

  void train_stage() {
    const auto& pop = data();
    Rng rng(cfg_.stream("sample"));
    const auto sample = pop.sample(cfg_.n, rng);
    const auto traj = sgd_adv_train(model_, sample, cfg_.train_config(theta1_), cfg_.adversary);
    write_trajectory(traj, path("trajectory"), std::max<std::size_t>(1, cfg_.T / 100));
    added("trajectory/steps.csv");
    added("trajectory/params.bin");
    const double rd = population_risk(model_, traj.output(), pop, cfg_.adversary);
    const double rs = empirical_risk(model_, traj.output(), sample, cfg_.adversary);
    write_json("train.json", {{"config_hash", cfg_.hash_hex()},
                              {"steps", cfg_.T},
                              {"population_risk", rd},
                              {"empirical_risk", rs},
                              {"gap", rd - rs}});
  }

  void stability_stage() {
    const auto mode = cfg_.exact ? StabilityMode::exact_mode(cfg_.enumeration_cap)
                                 : StabilityMode::monte_carlo(cfg_.stability_trials,
                                                              cfg_.stream("stability"), cfg_.jobs);
    const auto rep = gap_stability_check(model_, data(), cfg_.n, cfg_.train_config(theta1_),
                                cfg_.adversary, mode);
    Csv csv({"config_hash", "i", "eps_hat", "stderr", "mode"});
    const std::string mode_name =
        cfg_.exact ? "exact" : "monte-carlo(" + std::to_string(cfg_.stability_trials) + ")";
    for (std::size_t i = 0; i < rep.stability.per_index.size(); ++i) {
      csv.row({cfg_.hash_hex(), std::to_string(i), format_real(rep.stability.per_index[i]),
               format_real(rep.stability.std_err[i]), mode_name});
    }
    write("stability.csv", csv.str());
    write_json("stability.json", {{"config_hash", cfg_.hash_hex()},
                                  {"mode", mode_name},
                                  {"sup_index", rep.sup_index},
                                  {"argmax", rep.stability.argmax},
                                  {"sup_stderr", rep.sup_std_err},
                                  {"gap", rep.gap},
                                  {"gap_stderr", rep.gap_std_err},
                                  {"tolerance", rep.tolerance},
                                  {"gap_within_stability", rep.pass}});
    sup_index_ = rep.sup_index;
  }

  void bounds_stage() {
    measured_ = measure(cfg_.adversary);
    write_json("constants.json", to_json(measured_->consts));
    Csv csv({"config_hash", "eps", "n", "T", "schedule", "bound", "value", "flags",
             "measured_gap", "measured_gap_stderr"});
    for (const auto& b : measured_->bounds.values) {
      csv.row({cfg_.hash_hex(), format_real(cfg_.adversary.epsilon), std::to_string(cfg_.n),
               std::to_string(cfg_.T), describe(cfg_.schedule), b.name, format_real(b.value),
               join_flags(b.flags), format_real(measured_->gap.mean),
               format_real(measured_->gap.std_err)});
    }
    write("bounds.csv", csv.str());
  }

  void sweep_stage() {
    const auto eps_list =
        cfg_.sweep_eps.empty() ? std::vector<double>{cfg_.adversary.epsilon} : cfg_.sweep_eps;
    std::vector<std::string> header = {"config_hash", "eps", "gap_mean", "gap_stderr"};
    for (const auto& n : bound_names()) header.push_back(n);
    Csv sweep(header);
    Csv plot({"eps", "gap_mean", "gap_stderr", "convexGeneral"});
    for (double eps : eps_list) {
      const auto m = measure(with_epsilon(cfg_.adversary, eps));
      std::vector<std::string> row = {cfg_.hash_hex(), format_real(eps), format_real(m.gap.mean),
                                      format_real(m.gap.std_err)};
      for (const auto& b : m.bounds.values) row.push_back(format_real(b.value));
      sweep.row(row);
      plot.row({format_real(eps), format_real(m.gap.mean), format_real(m.gap.std_err),
                format_real(m.bounds.get("convexGeneral").value)});
    }
    write("gapsweep.csv", sweep.str());
    write("plotdata/gap_vs_eps.csv", plot.str());

    Csv epochs({"epoch", "steps", "gap_mean", "gap_stderr"});
    const std::size_t first = cfg_.sweep_epochs ? 1 : cfg_.passes;
    for (std::size_t e = first; e <= cfg_.passes; ++e) {
      TrainConfig t = cfg_.train_config(theta1_);
      t.passes = e;
      t.steps = std::min(cfg_.T, e * cfg_.n);
      const auto g = gen_gap(model_, data(), cfg_.n, t, cfg_.adversary, cfg_.gap_trials,
                             cfg_.stream("gap"), cfg_.jobs);
      epochs.row({std::to_string(e), std::to_string(t.steps), format_real(g.mean),
                  format_real(g.std_err)});
    }
    write("plotdata/gap_vs_epoch.csv", epochs.str());

    if (!measured_) measured_ = measure(cfg_.adversary);
    Csv bvm({"bound", "value", "flags", "measured_gap", "measured_gap_stderr", "sup_stability"});
    for (const auto& b : measured_->bounds.values) {
      bvm.row({b.name, format_real(b.value), join_flags(b.flags),
               format_real(measured_->gap.mean), format_real(measured_->gap.std_err),
               sup_index_ ? format_real(*sup_index_) : ""});
    }
    write("plotdata/bound_vs_measured.csv", bvm.str());
  }

  void write_config() { write("config.txt", cfg_.canonical()); }

 private:
  const FinitePopulation& data() {
    if (!cfg_.poison) return clean_;
    ensure_poisoned();
    return poisoned_->population;
  }

  void ensure_poisoned() {
    if (poisoned_) return;
    std::vector<std::size_t> widths = {clean_.dim()};
    widths.insert(widths.end(), cfg_.craft_hidden.begin(), cfg_.craft_hidden.end());
    widths.push_back(clean_.num_classes());
    const Model craft = Model::mlp(widths, Activation::Softplus, LossKind::CrossEntropy);
    poisoned_ = poison(clean_, *cfg_.poison, craft);
    for (const auto& w : poisoned_->warnings) result_.warnings.push_back("poison: " + w);
  }

  // Constants, bounds and measured gap at one adversary budget. Gaps use the
  // same seed stream at every budget, so sweeps are seed-paired.
  Measured measure(const AdversaryConfig& adv) {
    const auto& pop = data();
    const TrainConfig train = cfg_.train_config(theta1_);
    std::vector<Vec> probes = {theta1_};
    double risk_sum = 0.0;
    double max_loss = 0.0;
    auto track_max = [&](const Vec& theta) {
      for (std::size_t i = 0; i < pop.size(); ++i) {
        max_loss = std::max(max_loss, adv_loss(model_, theta, pop.point(i), adv));
      }
    };
    track_max(theta1_);
    const std::size_t snaps = std::max<std::size_t>(1, cfg_.snapshots);
    for (std::size_t s = 0; s < snaps; ++s) {
      Rng rng(derive_seed(cfg_.stream("snapshots"), s));
      const auto sample = pop.sample(cfg_.n, rng);
      const auto order = permute(rng.next(), cfg_.n, cfg_.passes, cfg_.reshuffle);
      Vec out = sgd_adv_output(model_, sample, order, train, adv);
      risk_sum += empirical_risk(model_, out, sample, adv);
      track_max(out);
      if (s + 1 < cfg_.snapshots) probes.push_back(std::move(out));
    }

    ConstantsConfig cc;
    cc.lipschitz = cfg_.probes;
    cc.lipschitz.center.clear();
    cc.lipschitz.ball_radius = cfg_.ball_radius.value_or(norm2(theta1_) + 5.0);
    cc.lipschitz.seed = cfg_.stream("lipschitz");
    cc.opt.restarts = cfg_.opt_restarts;
    cc.opt.steps = cfg_.opt_steps;
    cc.opt.seed = cfg_.stream("opt");
    cc.power_iters = cfg_.power_iters;
    cc.c = step_size(cfg_.schedule, 1);
    cc.T = std::max<std::size_t>(1, cfg_.T);

    Measured m;
    if (cfg_.poison) {
      m.consts = poisoned_constants(model_, pop, theta1_, probes, adv, cc, *cfg_.poison);
    } else {
      m.consts = estimate_constants(model_, pop, theta1_, probes, adv, cc);
      m.consts.tag = "config:" + cfg_.hash_hex();
    }
    for (const auto& w : m.consts.warnings) result_.warnings.push_back("constants: " + w);

    BoundInputs in;
    in.consts = BoundConstants::from(m.consts);
    in.n = cfg_.n;
    in.T = cfg_.T;
    in.schedule = cfg_.schedule;
    in.risk_at_output = risk_sum / static_cast<double>(snaps);
    in.B = cfg_.B.value_or(max_loss);
    if (cfg_.B && *cfg_.B < max_loss) {
      result_.warnings.push_back("bounds.B=" + format_real(*cfg_.B) +
                                 " is below the largest observed loss " + format_real(max_loss));
    }
    m.bounds = evaluate_bounds(in);
    m.gap = gen_gap(model_, pop, cfg_.n, train, adv, cfg_.gap_trials, cfg_.stream("gap"),
                    cfg_.jobs);
    return m;
  }

  fs::path path(const std::string& rel) const { return cfg_.out / rel; }
  void added(const std::string& rel) { result_.artifacts.push_back(path(rel)); }
  void write(const std::string& rel, const std::string& content) {
    write_file_atomic(path(rel), content);
    added(rel);
  }
  void write_json(const std::string& rel, const nlohmann::json& j) { write(rel, j.dump(2) + "\n"); }

  const ExperimentConfig& cfg_;
  StageResult& result_;
  FinitePopulation clean_;
  Model model_;
  Vec theta1_;
  std::optional<PoisonResult> poisoned_;
  std::optional<Measured> measured_;
  std::optional<double> sup_index_;
};

std::string stage_name(Stage s) {
  switch (s) {
    case Stage::GenData: return "gen-data";
    case Stage::Train: return "train";
    case Stage::Stability: return "stability";
    case Stage::Bounds: return "bounds";
    case Stage::Poison: return "poison";
    case Stage::Run: return "run";
  }
  return "?";
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, sep)) out.push_back(cell);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t col(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    require(it != header.end(), ErrorKind::Schema, "missing column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  }
};

Table read_csv(const fs::path& file, const std::vector<std::string>& expected) {
  std::ifstream in(file);
  require(in.good(), ErrorKind::Io, "cannot read " + file.string());
  Table t;
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorKind::Schema,
          file.string() + " is empty");
  t.header = split(line, ',');
  require(t.header == expected, ErrorKind::Schema,
          file.string() + ": unexpected header '" + line + "'");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto cells = split(line, ',');
    require(cells.size() == t.header.size(), ErrorKind::Schema,
            file.string() + ": row width differs from header");
    require(cells[0] == std::to_string(kSchemaVersion), ErrorKind::Schema,
            file.string() + ": schema_version " + cells[0] + ", expected " +
                std::to_string(kSchemaVersion));
    t.rows.push_back(std::move(cells));
  }
  return t;
}

const std::vector<std::string>& bounds_header() {
  static const std::vector<std::string> h = {
      "schema_version", "config_hash", "eps",  "n",           "T",
      "schedule",       "bound",       "value", "flags", "measured_gap", "measured_gap_stderr"};
  return h;
}

}  // namespace

void write_file_atomic(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    require(out.good(), ErrorKind::Io, "cannot write " + tmp.string());
    out << content;
    require(out.good(), ErrorKind::Io, "write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

StageResult run_stage(const ExperimentConfig& cfg, Stage stage) {
  StageResult result;
  std::string step = stage_name(stage);
  try {
    Runner r(cfg, result);
    r.write_config();
    switch (stage) {
      case Stage::GenData: r.gen_data(); break;
      case Stage::Train: r.train_stage(); break;
      case Stage::Stability: r.stability_stage(); break;
      case Stage::Bounds: r.bounds_stage(); break;
      case Stage::Poison: r.poison_stage(); break;
      case Stage::Run:
        step = "gen-data";
        r.gen_data();
        if (cfg.poison) {
          step = "poison";
          r.poison_stage();
        }
        step = "stability";
        r.stability_stage();
        step = "bounds";
        r.bounds_stage();
        step = "sweep";
        r.sweep_stage();
        break;
    }
  } catch (const Error& e) {
    result.ok = false;
    result.error_kind = std::string(error_kind_name(e.kind()));
    result.error_message = e.what();
  } catch (const std::exception& e) {
    result.ok = false;
    result.error_kind = "Internal";
    result.error_message = e.what();
  }

  std::vector<std::string> files;
  for (const auto& p : result.artifacts) files.push_back(p.lexically_relative(cfg.out).string());
  nlohmann::json status = {{"status", result.ok ? "ok" : "error"},
                           {"stage", stage_name(stage)},
                           {"partial", !result.ok},
                           {"config_hash", cfg.hash_hex()},
                           {"artifacts", files},
                           {"warnings", result.warnings}};
  try {
    if (!result.ok) {
      write_file_atomic(cfg.out / "error.json",
                        nlohmann::json{{"kind", result.error_kind},
                                       {"message", result.error_message},
                                       {"stage", step},
                                       {"completed_artifacts", files}}
                                .dump(2) +
                            "\n");
    }
    write_file_atomic(cfg.out / "status.json", status.dump(2) + "\n");
  } catch (const std::exception& e) {
    result.ok = false;
    result.error_message += std::string(result.error_message.empty() ? "" : "; ") + e.what();
  }
  return result;
}

StageResult run_experiment(const fs::path& config_path) {
  return run_stage(load_config(config_path), Stage::Run);
}

void report(const std::vector<fs::path>& dirs, const fs::path& out) {
  require(!dirs.empty(), ErrorKind::Config, "report needs at least one artifact directory");
  std::vector<Table> tables;
  for (const auto& d : dirs) tables.push_back(read_csv(d / "bounds.csv", bounds_header()));

  std::ostringstream merged;
  merged << "schema_version,run,config_hash,bound,value,flags,measured_gap,measured_gap_stderr\n";
  std::ostringstream summary;
  for (std::size_t k = 0; k < tables.size(); ++k) {
    const Table& t = tables[k];
    const auto c_hash = t.col("config_hash"), c_bound = t.col("bound"), c_val = t.col("value"),
               c_flags = t.col("flags"), c_gap = t.col("measured_gap"),
               c_se = t.col("measured_gap_stderr");
    for (const auto& r : t.rows) {
      merged << kSchemaVersion << ',' << dirs[k].filename().string() << ',' << r[c_hash] << ','
             << r[c_bound] << ',' << r[c_val] << ',' << r[c_flags] << ',' << r[c_gap] << ','
             << r[c_se] << '\n';
    }
    summary << "run " << dirs[k].string();
    if (!t.rows.empty()) {
      summary << "  config " << t.rows[0][c_hash] << "  measured gap " << t.rows[0][c_gap]
              << " +- " << t.rows[0][c_se];
    }
    summary << "\n";
    auto rows = t.rows;
    std::stable_sort(rows.begin(), rows.end(), [&](const auto& a, const auto& b) {
      return std::stod(a[c_val]) < std::stod(b[c_val]);
    });
    for (const auto& r : rows) {
      const bool covers = std::stod(r[c_val]) >= std::stod(r[c_gap]);
      summary << "  " << r[c_bound] << " = " << r[c_val] << (covers ? "  >= gap" : "  < gap")
              << (r[c_flags].empty() ? "" : "  [" + r[c_flags] + "]") << "\n";
    }

    const fs::path sweep = dirs[k] / "gapsweep.csv";
    if (fs::exists(sweep)) {
      std::vector<std::string> h = {"schema_version", "config_hash", "eps", "gap_mean",
                                    "gap_stderr"};
      for (const auto& n : bound_names()) h.push_back(n);
      const Table s = read_csv(sweep, h);
      auto sorted = s.rows;
      const auto c_eps = s.col("eps");
      std::stable_sort(sorted.begin(), sorted.end(), [&](const auto& a, const auto& b) {
        return std::stod(a[c_eps]) < std::stod(b[c_eps]);
      });
      if (sorted.size() >= 2) {
        summary << "  eps sweep (" << sorted.size() << " points), bound monotone in eps:";
        for (const auto& n : bound_names()) {
          const auto c = s.col(n);
          bool mono = true;
          for (std::size_t i = 1; i < sorted.size(); ++i) {
            mono = mono && std::stod(sorted[i][c]) >= std::stod(sorted[i - 1][c]);
          }
          summary << " " << n << "=" << (mono ? "yes" : "no");
        }
        summary << "\n";
      }
    }
  }

  if (tables.size() >= 2) {
    const Table& base = tables[0];
    for (std::size_t k = 1; k < tables.size(); ++k) {
      summary << "paired: " << dirs[0].filename().string() << " vs "
              << dirs[k].filename().string() << "\n";
      for (const auto& r : base.rows) {
        const auto& name = r[base.col("bound")];
        const auto it = std::find_if(tables[k].rows.begin(), tables[k].rows.end(), [&](auto& x) {
          return x[tables[k].col("bound")] == name;
        });
        require(it != tables[k].rows.end(), ErrorKind::Schema,
                "bound '" + name + "' missing in " + dirs[k].string());
        const auto& a = r[base.col("value")];
        const auto& b = (*it)[tables[k].col("value")];
        summary << "  " << name << "  " << a << "  " << b << "  "
                << (a == b ? "identical" : "differs") << "\n";
      }
    }
  }

  write_file_atomic(out / "report.csv", merged.str());
  write_file_atomic(out / "summary.txt", summary.str());
}

}  // namespace stablab
