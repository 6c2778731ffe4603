#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "stablab/config.hpp"
#include "stablab/constants.hpp"
#include "stablab/datasets.hpp"
#include "stablab/error.hpp"
#include "stablab/experiment.hpp"

using namespace stablab;
namespace fs = std::filesystem;

namespace {

fs::path tmp_dir(const std::string& name) {
  const char* env = std::getenv("STABLAB_TEST_TMP");
  const fs::path p = fs::path(env ? env : "stablab_test_tmp") / "harness" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const char* kSmallRun = R"(seed = 7
dataset.name = gaussian-mixture
dataset.size = 12
dataset.separation = 0.4
model.kind = linear-softmax
adversary.eps = 0.05
train.n = 4
train.T = 4
train.alpha = 0.2
stability.trials = 20
stability.gap_trials = 20
constants.probes = 100
constants.opt_steps = 50
constants.restarts = 1
constants.snapshots = 3
sweep.eps = 0, 0.05
)";

}  // namespace

TEST_SUITE("harness") {
  TEST_CASE("datasets are deterministic, boxed and sized") {
    for (const std::string name : {"gaussian-mixture", "two-moons", "grid-digits"}) {
      CAPTURE(name);
      DatasetSpec spec;
      spec.name = name;
      spec.size = 57;
      spec.seed = 3;
      const auto a = make_dataset(spec), b = make_dataset(spec);
      REQUIRE(a.size() == 57);
      for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a.point(i) == b.point(i));
        for (double x : a.point(i).features) CHECK((x >= 0.0 && x <= 1.0));
      }
      spec.seed = 4;
      CHECK(!(make_dataset(spec).point(0) == a.point(0)));
    }
    DatasetSpec digits;
    digits.name = "grid-digits";
    CHECK(make_dataset(digits).dim() == 15);
    CHECK(make_dataset(digits).num_classes() == 10);
    DatasetSpec empty;
    empty.size = 0;
    try {
      make_dataset(empty);
      FAIL("size 0 accepted");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::EmptyDataset);
    }
    DatasetSpec unknown;
    unknown.name = "spirals";
    CHECK_THROWS_AS(make_dataset(unknown), Error);
  }

  TEST_CASE("zero separation makes the classes indistinguishable") {
    DatasetSpec spec;
    spec.d = 3;
    spec.m = 3;
    spec.separation = 0.0;
    spec.size = 90;
    spec.seed = 5;
    const auto pop = make_dataset(spec);
    const auto model = Model::linear_softmax(3, 3);
    OptBudget budget;
    budget.seed = 1;
    budget.steps = 300;
    const auto best = estimate_opt_risk(model, pop, AdversaryConfig::pgd(0.0), budget);
    CHECK(best.risk >= std::log(3.0) - 1e-6);
  }

  TEST_CASE("a small MLP fits two moons within 500 steps") {
    DatasetSpec spec;
    spec.name = "two-moons";
    spec.size = 200;
    spec.noise = 0.05;
    spec.seed = 6;
    const auto pop = make_dataset(spec);
    const auto model = Model::mlp({2, 16, 2}, Activation::Tanh);
    // Full-batch Adam on the library gradient; the squeeze onto the unit box
    // leaves plain gradient descent far from converged after 500 steps.
    const auto none = AdversaryConfig::pgd(0.0);
    Vec theta = model.init_params(1), m1(theta.size(), 0.0), m2(theta.size(), 0.0), g;
    for (int t = 1; t <= 500; ++t) {
      population_risk_grad(model, theta, pop, none, g);
      for (std::size_t j = 0; j < theta.size(); ++j) {
        m1[j] = 0.9 * m1[j] + 0.1 * g[j];
        m2[j] = 0.999 * m2[j] + 0.001 * g[j] * g[j];
        const double mh = m1[j] / (1 - std::pow(0.9, t)), vh = m2[j] / (1 - std::pow(0.999, t));
        theta[j] -= 0.03 * mh / (std::sqrt(vh) + 1e-8);
      }
    }
    const double risk = population_risk(model, theta, pop, none);
    CAPTURE(risk);
    CHECK(risk < 0.1);
  }

  TEST_CASE("config parsing") {
    const auto cfg = parse_config(kSmallRun);
    CHECK(cfg.seed == 7);
    CHECK(cfg.n == 4);
    CHECK(cfg.sweep_eps == std::vector<double>{0.0, 0.05});
    CHECK(parse_config(cfg.canonical()).hash() == cfg.hash());
    CHECK(parse_config(cfg.canonical()).canonical() == cfg.canonical());
    auto moved = parse_key_values(kSmallRun);
    moved["out"] = "elsewhere";
    moved["jobs"] = "3";
    CHECK(config_from_entries(moved).hash() == cfg.hash());
    moved["train.T"] = "3";
    CHECK(config_from_entries(moved).hash() != cfg.hash());
    CHECK(cfg.stream("gap") != cfg.stream("lipschitz"));
    for (const char* bad : {"train.nn = 3\n", "seed = 1\nseed = 2\n", "train.n = many\n",
                            "adversary.eps = -1\n", "model.kind = forest\n", "no equals sign\n"}) {
      CAPTURE(bad);
      try {
        parse_config(bad);
        FAIL("accepted");
      } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Config);
      }
    }
  }

  TEST_CASE("runs are reproducible byte for byte") {
    const auto dir = tmp_dir("repro");
    auto kv = parse_key_values(kSmallRun);
    kv["out"] = (dir / "a").string();
    const auto a = run_stage(config_from_entries(kv), Stage::Run);
    kv["out"] = (dir / "b").string();
    kv["jobs"] = "2";
    const auto b = run_stage(config_from_entries(kv), Stage::Run);
    REQUIRE(a.ok);
    REQUIRE(b.ok);
    for (const char* f : {"bounds.csv", "stability.csv", "gapsweep.csv", "constants.json",
                          "population.csv", "plotdata/gap_vs_eps.csv"}) {
      CAPTURE(f);
      CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));
      CHECK(!slurp(dir / "a" / f).empty());
    }
    CHECK(slurp(dir / "a" / "bounds.csv").rfind(
              "schema_version,config_hash,eps,n,T,schedule,bound,value,flags,measured_gap,"
              "measured_gap_stderr\n",
              0) == 0);
    const auto status = nlohmann::json::parse(slurp(dir / "a" / "status.json"));
    CHECK(status.at("status") == "ok");
  }

  TEST_CASE("failures leave error.json and a partial status") {
    const auto dir = tmp_dir("fail");
    auto kv = parse_key_values(kSmallRun);
    kv["out"] = dir.string();
    kv["stability.mode"] = "exact";
    kv["stability.cap"] = "10";
    const auto res = run_stage(config_from_entries(kv), Stage::Run);
    CHECK_FALSE(res.ok);
    CHECK(res.error_kind == "enumeration-cap");
    REQUIRE(fs::exists(dir / "error.json"));
    const auto err = nlohmann::json::parse(slurp(dir / "error.json"));
    CHECK(err.at("kind") == "enumeration-cap");
    const auto status = nlohmann::json::parse(slurp(dir / "status.json"));
    CHECK(status.at("partial") == true);
    CHECK(fs::exists(dir / "population.csv"));
  }

  TEST_CASE("report passes values through and pairs runs") {
    const auto dir = tmp_dir("report");
    auto kv = parse_key_values(kSmallRun);
    kv["out"] = (dir / "clean").string();
    REQUIRE(run_stage(config_from_entries(kv), Stage::Run).ok);
    kv["out"] = (dir / "other").string();
    kv["adversary.eps"] = "0.1";
    REQUIRE(run_stage(config_from_entries(kv), Stage::Run).ok);
    report({dir / "clean", dir / "other"}, dir / "rep");
    const auto rep = slurp(dir / "rep" / "report.csv");
    const auto bounds = slurp(dir / "clean" / "bounds.csv");
    // Each bounds row's bound,value,flags,gap,se tail appears verbatim in the report.
    std::istringstream rows(bounds);
    std::string line;
    std::getline(rows, line);
    int seen = 0;
    while (std::getline(rows, line)) {
      std::size_t pos = 0;
      for (int k = 0; k < 6; ++k) pos = line.find(',', pos) + 1;
      CHECK(rep.find("clean," + line.substr(line.find(',') + 1, 16) + "," + line.substr(pos)) !=
            std::string::npos);
      ++seen;
    }
    CHECK(seen == 7);
    const auto summary = slurp(dir / "rep" / "summary.txt");
    CHECK(summary.find("paired: clean vs other") != std::string::npos);
    CHECK(summary.find("differs") != std::string::npos);
    CHECK(summary.find("monotone") != std::string::npos);

    // A bounds.csv from another schema version is refused.
    fs::create_directories(dir / "bad");
    std::ofstream(dir / "bad" / "bounds.csv") << "schema_version,bound,value\n2,x,1\n";
    try {
      report({dir / "bad"}, dir / "rep2");
      FAIL("schema mismatch accepted");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::Schema);
    }
  }

  TEST_CASE("atomic writes replace whole files") {
    const auto dir = tmp_dir("atomic");
    write_file_atomic(dir / "f.txt", "first");
    write_file_atomic(dir / "f.txt", "second");
    CHECK(slurp(dir / "f.txt") == "second");
    std::size_t files = 0;
    for ([[maybe_unused]] const auto& e : fs::directory_iterator(dir)) ++files;
    CHECK(files == 1);
  }
}
