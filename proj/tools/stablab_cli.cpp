#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "stablab/config.hpp"
#include "stablab/error.hpp"
#include "stablab/experiment.hpp"
#include "stablab/simd/kernels.hpp"

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<std::size_t> jobs;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config, "experiment config (key = value lines)")
      ->required()
      ->check(CLI::ExistingFile);
  sub->add_option("--seed", c.seed, "override the master seed");
  sub->add_option("--out", c.out, "override the output directory");
  sub->add_option("--jobs", c.jobs, "worker threads (results do not depend on it)");
}

stablab::ExperimentConfig resolve(const Common& c) {
  std::ifstream in(c.config);
  std::stringstream ss;
  ss << in.rdbuf();
  auto kv = stablab::parse_key_values(ss.str());
  if (c.seed) {
    // Keys derived from the master seed must follow the override.
    kv["seed"] = std::to_string(*c.seed);
  }
  if (!c.out.empty()) kv["out"] = c.out;
  if (c.jobs) kv["jobs"] = std::to_string(*c.jobs);
  return stablab::config_from_entries(kv);
}

int finish(const stablab::StageResult& r, const std::filesystem::path& out) {
  for (const auto& w : r.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
  if (!r.ok) {
    std::fprintf(stderr, "error [%s]: %s (see %s)\n", r.error_kind.c_str(),
                 r.error_message.c_str(), (out / "error.json").c_str());
    return 2;
  }
  for (const auto& a : r.artifacts) std::printf("%s\n", a.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"stablab: adversarial-training stability laboratory"};
  app.require_subcommand(1);

  struct Cmd {
    const char* name;
    const char* help;
    stablab::Stage stage;
  };
  const std::vector<Cmd> cmds = {
      {"gen-data", "synthesize the population", stablab::Stage::GenData},
      {"train", "train once and write the trajectory", stablab::Stage::Train},
      {"stability", "on-average stability and generalization gap", stablab::Stage::Stability},
      {"bounds", "estimate constants and evaluate every bound", stablab::Stage::Bounds},
      {"poison", "craft the poisoned population", stablab::Stage::Poison},
      {"run", "full pipeline including sweeps and plot data", stablab::Stage::Run},
  };
  std::vector<Common> commons(cmds.size());
  std::vector<CLI::App*> subs;
  for (std::size_t i = 0; i < cmds.size(); ++i) {
    subs.push_back(app.add_subcommand(cmds[i].name, cmds[i].help));
    add_common(subs.back(), commons[i]);
  }

  std::vector<std::string> dirs;
  std::string report_out = ".";
  auto* rep = app.add_subcommand("report", "merge artifact directories into comparison tables");
  rep->add_option("dirs", dirs, "artifact directories")->required()->check(CLI::ExistingDirectory);
  rep->add_option("--out", report_out, "where report.csv and summary.txt go");

  std::string simd;
  app.add_option("--simd", simd, "kernel backend: auto, scalar or avx2")
      ->check(CLI::IsMember({"auto", "scalar", "avx2"}));

  CLI11_PARSE(app, argc, argv);

  if (simd == "scalar") stablab::simd::set_backend(stablab::simd::Backend::Scalar);
  if (simd == "avx2" && !stablab::simd::set_backend(stablab::simd::Backend::Avx2)) {
    std::fprintf(stderr, "error: AVX2 kernels are not available on this machine\n");
    return 2;
  }

  try {
    if (rep->parsed()) {
      std::vector<std::filesystem::path> paths(dirs.begin(), dirs.end());
      stablab::report(paths, report_out);
      std::printf("%s\n%s\n", (std::filesystem::path(report_out) / "report.csv").c_str(),
                  (std::filesystem::path(report_out) / "summary.txt").c_str());
      return 0;
    }
    for (std::size_t i = 0; i < cmds.size(); ++i) {
      if (!subs[i]->parsed()) continue;
      const auto cfg = resolve(commons[i]);
      return finish(stablab::run_stage(cfg, cmds[i].stage), cfg.out);
    }
  } catch (const stablab::Error& e) {
    std::fprintf(stderr, "error [%s]: %s\n", std::string(stablab::error_kind_name(e.kind())).c_str(),
                 e.what());
    return 2;
  }
  return 1;
}
