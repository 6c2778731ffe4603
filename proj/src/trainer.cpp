#include "stablab/trainer.hpp"

#include <cstring>
#include <fstream>
#include <utility>

#include "stablab/error.hpp"
#include "stablab/rng.hpp"

namespace stablab {

double step_size(const StepSchedule& schedule, std::size_t t) {
  if (const auto* c = std::get_if<ConstantStep>(&schedule)) return c->alpha;
  return std::get<InverseStep>(schedule).c / static_cast<double>(t);
}

std::vector<double> step_series(const StepSchedule& schedule, std::size_t steps) {
  std::vector<double> a(steps);
  for (std::size_t t = 1; t <= steps; ++t) a[t - 1] = step_size(schedule, t);
  return a;
}

std::string describe(const StepSchedule& schedule) {
  if (const auto* c = std::get_if<ConstantStep>(&schedule)) {
    return "constant(" + format_real(c->alpha) + ")";
  }
  return "inverse(" + format_real(std::get<InverseStep>(schedule).c) + ")";
}

void TrainConfig::validate(std::size_t n, std::size_t param_dim) const {
  require(n >= 1, ErrorKind::EmptyDataset, "training sample is empty");
  require(passes >= 1, ErrorKind::Config, "passes must be positive");
  require(steps <= n * passes, ErrorKind::Config,
          "step budget " + std::to_string(steps) + " exceeds n*passes = " +
              std::to_string(n * passes));
  require(init.size() == param_dim, ErrorKind::Config, "initial parameter has wrong length");
  if (const auto* c = std::get_if<ConstantStep>(&schedule)) {
    require(c->alpha > 0.0, ErrorKind::Config, "constant step size must be positive");
  } else {
    require(std::get<InverseStep>(schedule).c > 0.0, ErrorKind::Config,
            "inverse schedule constant must be positive");
  }
}

std::size_t Trajectory::first_visit(std::size_t i) const {
  for (std::size_t t = 0; t < steps.size(); ++t) {
    if (steps[t].index == i) return t + 1;
  }
  return steps.size() + 1;
}

std::vector<std::size_t> permute(std::uint64_t seed, std::size_t n, std::size_t passes,
                                 bool reshuffle) {
  require(n >= 1, ErrorKind::EmptyDataset, "cannot permute an empty dataset");
  Rng rng(derive_seed(seed, "permutation"));
  std::vector<std::size_t> perm(n);
  auto shuffle = [&] {
    for (std::size_t k = 0; k < n; ++k) perm[k] = k;
    for (std::size_t k = n - 1; k > 0; --k) std::swap(perm[k], perm[rng.below(k + 1)]);
  };
  shuffle();
  std::vector<std::size_t> order;
  order.reserve(n * passes);
  for (std::size_t p = 0; p < passes; ++p) {
    if (p > 0 && reshuffle) shuffle();
    order.insert(order.end(), perm.begin(), perm.end());
  }
  return order;
}

namespace {

// Written out rather than through the kernel table: the update is exactly
// theta - alpha * g with no fused multiply-add, on every backend.
void descend(Vec& theta, double alpha, const Vec& g) {
  for (std::size_t j = 0; j < theta.size(); ++j) theta[j] -= alpha * g[j];
}

}  // namespace

Vec sgd_step(const Model& model, std::span<const double> theta, const LabeledExample& z,
             double alpha, const AdversaryConfig& adv) {
  Vec g;
  adv_loss_and_grad(model, theta, z, adv, g);
  Vec next(theta.begin(), theta.end());
  descend(next, alpha, g);
  return next;
}

namespace {

template <class OnStep>
Vec run(const Model& model, std::span<const LabeledExample> sample,
        std::span<const std::size_t> order, const TrainConfig& cfg, const AdversaryConfig& adv,
        OnStep&& on_step) {
  cfg.validate(sample.size(), model.param_dim());
  adv.validate();
  require(order.size() >= cfg.steps, ErrorKind::Config, "visiting order shorter than T");
  Vec theta = cfg.init;
  Vec g;
  LabeledExample zadv;
  for (std::size_t t = 1; t <= cfg.steps; ++t) {
    const std::size_t idx = order[t - 1];
    require(idx < sample.size(), ErrorKind::Contract, "visiting order index out of range");
    const double alpha = step_size(cfg.schedule, t);
    adv_loss_and_grad(model, theta, sample[idx], adv, g, &zadv);
    on_step(idx, zadv, g, alpha);
    descend(theta, alpha, g);
    on_step.after(theta);
  }
  return theta;
}

struct NoRecord {
  void operator()(std::size_t, const LabeledExample&, const Vec&, double) const {}
  void after(const Vec&) const {}
};

struct Recorder {
  Trajectory* traj;
  void operator()(std::size_t idx, const LabeledExample& zadv, const Vec& g, double alpha) const {
    traj->steps.push_back({idx, zadv, norm2(g), alpha});
  }
  void after(const Vec& theta) const { traj->params.push_back(theta); }
};

}  // namespace

Trajectory sgd_adv_train_order(const Model& model, std::span<const LabeledExample> sample,
                               std::span<const std::size_t> order, const TrainConfig& cfg,
                               const AdversaryConfig& adv) {
  Trajectory traj;
  traj.order.assign(order.begin(), order.end());
  traj.params.reserve(cfg.steps + 1);
  traj.steps.reserve(cfg.steps);
  traj.params.push_back(cfg.init);
  run(model, sample, order, cfg, adv, Recorder{&traj});
  return traj;
}

Trajectory sgd_adv_train(const Model& model, std::span<const LabeledExample> sample,
                         const TrainConfig& cfg, const AdversaryConfig& adv) {
  require(!sample.empty(), ErrorKind::EmptyDataset, "training sample is empty");
  const auto order = permute(cfg.perm_seed, sample.size(), cfg.passes, cfg.reshuffle_each_pass);
  return sgd_adv_train_order(model, sample, order, cfg, adv);
}

Vec sgd_adv_output(const Model& model, std::span<const LabeledExample> sample,
                   std::span<const std::size_t> order, const TrainConfig& cfg,
                   const AdversaryConfig& adv) {
  return run(model, sample, order, cfg, adv, NoRecord{});
}

std::vector<Vec> replay(const Model& model, std::span<const LabeledExample> sample,
                        const Trajectory& traj, const AdversaryConfig& adv) {
  std::vector<Vec> params{traj.params.front()};
  for (const auto& rec : traj.steps) {
    params.push_back(sgd_step(model, params.back(), sample[rec.index], rec.alpha, adv));
  }
  return params;
}

PairedRun paired_trajectories(const Model& model, std::span<const LabeledExample> sample,
                              std::size_t i, const LabeledExample& replacement,
                              const TrainConfig& cfg, const AdversaryConfig& adv) {
  require(i < sample.size(), ErrorKind::Contract, "replacement index out of range");
  std::vector<LabeledExample> replaced(sample.begin(), sample.end());
  replaced[i] = replacement;
  const auto order = permute(cfg.perm_seed, sample.size(), cfg.passes, cfg.reshuffle_each_pass);
  PairedRun paired{sgd_adv_train_order(model, sample, order, cfg, adv),
                sgd_adv_train_order(model, replaced, order, cfg, adv),
                {}};
  paired.delta.reserve(paired.original.params.size());
  for (std::size_t t = 0; t < paired.original.params.size(); ++t) {
    paired.delta.push_back(dist2(paired.original.params[t], paired.replaced.params[t]));
  }
  return paired;
}

namespace {
constexpr char kParamMagic[8] = {'S', 'T', 'B', 'L', 'P', 'R', 'M', '1'};

template <class T>
void put(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}
template <class T>
T get(std::ifstream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  require(static_cast<bool>(in), ErrorKind::Schema, "truncated parameter snapshot file");
  return v;
}
}  // namespace

void write_trajectory(const Trajectory& traj, const std::filesystem::path& dir,
                      std::size_t stride) {
  require(stride >= 1, ErrorKind::Config, "snapshot stride must be positive");
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "steps.csv");
    require(static_cast<bool>(out), ErrorKind::Io, "cannot write steps.csv");
    out << "step,index,alpha,grad_norm\n";
    for (std::size_t t = 0; t < traj.steps.size(); ++t) {
      const auto& r = traj.steps[t];
      out << (t + 1) << "," << r.index << "," << format_real(r.alpha) << ","
          << format_real(r.grad_norm) << "\n";
    }
  }
  std::vector<std::size_t> picks;
  for (std::size_t t = 0; t < traj.params.size(); t += stride) picks.push_back(t);
  if (picks.back() != traj.params.size() - 1) picks.push_back(traj.params.size() - 1);
  std::ofstream out(dir / "params.bin", std::ios::binary);
  require(static_cast<bool>(out), ErrorKind::Io, "cannot write params.bin");
  out.write(kParamMagic, sizeof kParamMagic);
  put<std::uint64_t>(out, traj.params.front().size());
  put<std::uint64_t>(out, stride);
  put<std::uint64_t>(out, picks.size());
  for (std::size_t t : picks) {
    put<std::uint64_t>(out, t + 1);
    out.write(reinterpret_cast<const char*>(traj.params[t].data()),
              static_cast<std::streamsize>(traj.params[t].size() * sizeof(double)));
  }
}

std::vector<ParamSnapshot> read_param_snapshots(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::Io, "cannot read " + file.string());
  char magic[8];
  in.read(magic, sizeof magic);
  require(in && std::memcmp(magic, kParamMagic, sizeof magic) == 0, ErrorKind::Schema,
          "not a parameter snapshot file");
  const auto k = get<std::uint64_t>(in);
  get<std::uint64_t>(in);
  const auto count = get<std::uint64_t>(in);
  std::vector<ParamSnapshot> snaps(count);
  for (auto& s : snaps) {
    s.step = get<std::uint64_t>(in);
    s.theta.resize(k);
    in.read(reinterpret_cast<char*>(s.theta.data()), static_cast<std::streamsize>(k * sizeof(double)));
    require(static_cast<bool>(in), ErrorKind::Schema, "truncated parameter snapshot file");
  }
  return snaps;
}

}  // namespace stablab
