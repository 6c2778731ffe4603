#include "stablab/stability.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "stablab/constants.hpp"
#include "stablab/error.hpp"
#include "stablab/parallel.hpp"
#include "stablab/rng.hpp"

namespace stablab {
namespace {

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};

MeanSe mean_se(std::span<const double> xs) {
  MeanSe out;
  if (xs.empty()) return out;
  const double n = static_cast<double>(xs.size());
  out.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  if (xs.size() < 2) return out;
  double ss = 0.0;
  for (double x : xs) ss += (x - out.mean) * (x - out.mean);
  out.se = std::sqrt(ss / (n - 1.0) / n);
  return out;
}

std::vector<std::size_t> repeat_order(std::span<const std::size_t> perm, std::size_t passes) {
  std::vector<std::size_t> order;
  order.reserve(perm.size() * passes);
  for (std::size_t p = 0; p < passes; ++p) order.insert(order.end(), perm.begin(), perm.end());
  return order;
}


// Exact-mode state: every (S, pi) output over supp(D)^n x S_n.
struct Enumeration {
  std::size_t support = 0;
  std::size_t n = 0;
  std::size_t num_samples = 0;
  std::vector<std::vector<std::size_t>> perms;
  std::vector<double> sample_weight;
  std::vector<std::vector<Vec>> outputs;  // [sample][perm]

  std::vector<std::size_t> digits(std::size_t s) const {
    std::vector<std::size_t> d(n);
    for (std::size_t k = 0; k < n; ++k) {
      d[k] = s % support;
      s /= support;
    }
    return d;
  }
  std::size_t replace(std::size_t s, std::size_t i, std::size_t z) const {
    std::size_t place = 1;
    for (std::size_t k = 0; k < i; ++k) place *= support;
    const std::size_t old = (s / place) % support;
    return s - old * place + z * place;
  }
};

Enumeration enumerate(const Model& model, const FinitePopulation& pop, std::size_t n,
                      const TrainConfig& train, const AdversaryConfig& adv, double cap) {
  require(n >= 1, ErrorKind::Contract, "n must be positive");
  require(!train.reshuffle_each_pass, ErrorKind::Config,
          "exact enumeration supports the fixed-order multi-pass variant only");
  const double count = enumeration_count(pop.size(), n);
  require(count <= cap, ErrorKind::EnumerationCap,
          "exact enumeration needs " + format_real(count) + " evaluations, cap is " +
              format_real(cap));
  Enumeration e;
  e.support = pop.size();
  e.n = n;
  e.num_samples = 1;
  for (std::size_t k = 0; k < n; ++k) e.num_samples *= e.support;
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  do {
    e.perms.push_back(perm);
  } while (std::next_permutation(perm.begin(), perm.end()));

  e.sample_weight.resize(e.num_samples);
  e.outputs.resize(e.num_samples);
  std::vector<LabeledExample> sample(n);
  for (std::size_t s = 0; s < e.num_samples; ++s) {
    const auto d = e.digits(s);
    double w = 1.0;
    for (std::size_t k = 0; k < n; ++k) {
      w *= pop.weight(d[k]);
      sample[k] = pop.point(d[k]);
    }
    e.sample_weight[s] = w;
    e.outputs[s].reserve(e.perms.size());
    for (const auto& p : e.perms) {
      e.outputs[s].push_back(sgd_adv_output(model, sample, repeat_order(p, train.passes), train, adv));
    }
  }
  return e;
}

}  // namespace

double enumeration_count(std::size_t support, std::size_t n) {
  double c = static_cast<double>(support) * static_cast<double>(n);
  for (std::size_t k = 0; k < n; ++k) c *= static_cast<double>(support);
  for (std::size_t k = 2; k <= n; ++k) c *= static_cast<double>(k);
  return c;
}

double sample_gap(const Model& model, const FinitePopulation& pop,
                  std::span<const LabeledExample> sample, std::span<const std::size_t> order,
                  const TrainConfig& train, const AdversaryConfig& adv) {
  const Vec out = sgd_adv_output(model, sample, order, train, adv);
  return population_risk(model, out, pop, adv) - empirical_risk(model, out, sample, adv);
}

StabilityEstimate on_average_stability(const Model& model, const FinitePopulation& pop,
                                       std::size_t n, const TrainConfig& train,
                                       const AdversaryConfig& adv, const StabilityMode& mode) {
  require(n >= 1, ErrorKind::Contract, "n must be positive");
  StabilityEstimate est;
  est.mode = mode;
  est.per_index.assign(n, 0.0);
  est.std_err.assign(n, 0.0);

  if (mode.exact) {
    const Enumeration e = enumerate(model, pop, n, train, adv, mode.enumeration_cap);
    const double perm_w = 1.0 / static_cast<double>(e.perms.size());
    // h(A(S, pi), z) for every sample, permutation and test point.
    std::vector<std::vector<std::vector<double>>> h(e.num_samples);
    for (std::size_t s = 0; s < e.num_samples; ++s) {
      h[s].resize(e.perms.size());
      for (std::size_t p = 0; p < e.perms.size(); ++p) {
        h[s][p].resize(e.support);
        for (std::size_t z = 0; z < e.support; ++z) {
          h[s][p][z] = adv_loss(model, e.outputs[s][p], pop.point(z), adv);
        }
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      double acc = 0.0;
      for (std::size_t s = 0; s < e.num_samples; ++s) {
        for (std::size_t z = 0; z < e.support; ++z) {
          const std::size_t s2 = e.replace(s, i, z);
          const double w = e.sample_weight[s] * pop.weight(z) * perm_w;
          if (w == 0.0) continue;
          for (std::size_t p = 0; p < e.perms.size(); ++p) acc += w * (h[s][p][z] - h[s2][p][z]);
        }
      }
      est.per_index[i] = acc;
    }
  } else {
    require(mode.trials >= 1, ErrorKind::Config, "Monte Carlo mode needs at least one trial");
    std::vector<std::vector<double>> diffs(mode.trials, std::vector<double>(n));
    parallel_for(mode.trials, mode.jobs, [&](std::size_t t) {
      Rng rng(derive_seed(mode.seed, t));
      auto sample = pop.sample(n, rng);
      const LabeledExample& z = pop.point(pop.sample_index(rng));
      const auto order = permute(rng.next(), n, train.passes, train.reshuffle_each_pass);
      const Vec out = sgd_adv_output(model, sample, order, train, adv);
      const double h_out = adv_loss(model, out, z, adv);
      for (std::size_t i = 0; i < n; ++i) {
        LabeledExample saved = sample[i];
        sample[i] = z;
        const Vec out_i = sgd_adv_output(model, sample, order, train, adv);
        sample[i] = std::move(saved);
        diffs[t][i] = h_out - adv_loss(model, out_i, z, adv);
      }
    });
    std::vector<double> col(mode.trials);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t t = 0; t < mode.trials; ++t) col[t] = diffs[t][i];
      const auto ms = mean_se(col);
      est.per_index[i] = ms.mean;
      est.std_err[i] = ms.se;
    }
  }
  const auto it = std::max_element(est.per_index.begin(), est.per_index.end());
  est.argmax = static_cast<std::size_t>(it - est.per_index.begin());
  est.sup_index = *it;
  return est;
}

StabilityEstimate on_average_stability_unpaired(const Model& model, const FinitePopulation& pop,
                                                std::size_t n, const TrainConfig& train,
                                                const AdversaryConfig& adv, std::size_t trials,
                                                std::uint64_t seed) {
  require(trials >= 1 && n >= 1, ErrorKind::Config, "invalid unpaired estimator arguments");
  StabilityEstimate est;
  est.mode = StabilityMode::monte_carlo(trials, seed);
  est.per_index.assign(n, 0.0);
  est.std_err.assign(n, 0.0);
  std::vector<double> col(trials);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t t = 0; t < trials; ++t) {
      Rng rng(derive_seed(derive_seed(seed, i), t));
      const auto s1 = pop.sample(n, rng);
      const LabeledExample& z1 = pop.point(pop.sample_index(rng));
      const auto o1 = permute(rng.next(), n, train.passes, train.reshuffle_each_pass);
      auto s2 = pop.sample(n, rng);
      const LabeledExample& z2 = pop.point(pop.sample_index(rng));
      const auto o2 = permute(rng.next(), n, train.passes, train.reshuffle_each_pass);
      s2[i] = z2;
      col[t] = adv_loss(model, sgd_adv_output(model, s1, o1, train, adv), z1, adv) -
               adv_loss(model, sgd_adv_output(model, s2, o2, train, adv), z2, adv);
    }
    const auto ms = mean_se(col);
    est.per_index[i] = ms.mean;
    est.std_err[i] = ms.se;
  }
  const auto it = std::max_element(est.per_index.begin(), est.per_index.end());
  est.argmax = static_cast<std::size_t>(it - est.per_index.begin());
  est.sup_index = *it;
  return est;
}

GapEstimate gen_gap(const Model& model, const FinitePopulation& pop, std::size_t n,
                    const TrainConfig& train, const AdversaryConfig& adv, std::size_t trials,
                    std::uint64_t seed, std::size_t jobs) {
  require(trials >= 1, ErrorKind::Config, "gen_gap needs at least one trial");
  require(n >= 1, ErrorKind::Contract, "n must be positive");
  GapEstimate est;
  est.per_trial.assign(trials, 0.0);
  parallel_for(trials, jobs, [&](std::size_t t) {
    Rng rng(derive_seed(seed, t));
    const auto sample = pop.sample(n, rng);
    const auto order = permute(rng.next(), n, train.passes, train.reshuffle_each_pass);
    est.per_trial[t] = sample_gap(model, pop, sample, order, train, adv);
  });
  const auto ms = mean_se(est.per_trial);
  est.mean = ms.mean;
  est.std_err = ms.se;
  return est;
}

GapEstimate gen_gap_exact(const Model& model, const FinitePopulation& pop, std::size_t n,
                          const TrainConfig& train, const AdversaryConfig& adv,
                          double enumeration_cap) {
  const Enumeration e = enumerate(model, pop, n, train, adv, enumeration_cap);
  const double perm_w = 1.0 / static_cast<double>(e.perms.size());
  GapEstimate est;
  std::vector<LabeledExample> sample(n);
  for (std::size_t s = 0; s < e.num_samples; ++s) {
    if (e.sample_weight[s] == 0.0) continue;
    const auto d = e.digits(s);
    for (std::size_t k = 0; k < n; ++k) sample[k] = pop.point(d[k]);
    for (std::size_t p = 0; p < e.perms.size(); ++p) {
      const Vec& out = e.outputs[s][p];
      est.mean += e.sample_weight[s] * perm_w *
                  (population_risk(model, out, pop, adv) - empirical_risk(model, out, sample, adv));
    }
  }
  return est;
}

GapStabilityReport gap_stability_check(const Model& model, const FinitePopulation& pop, std::size_t n,
                      const TrainConfig& train, const AdversaryConfig& adv,
                      const StabilityMode& mode) {
  GapStabilityReport rep;
  rep.stability = on_average_stability(model, pop, n, train, adv, mode);
  rep.sup_index = rep.stability.sup_index;
  if (mode.exact) {
    rep.gap = gen_gap_exact(model, pop, n, train, adv, mode.enumeration_cap).mean;
    rep.tolerance = 1e-10;
  } else {
    const auto g = gen_gap(model, pop, n, train, adv, mode.trials, derive_seed(mode.seed, "gap"),
                           mode.jobs);
    rep.gap = g.mean;
    rep.gap_std_err = g.std_err;
    rep.sup_std_err = rep.stability.std_err[rep.stability.argmax];
    rep.tolerance = 3.0 * std::hypot(rep.gap_std_err, rep.sup_std_err);
  }
  rep.pass = rep.gap <= rep.sup_index + rep.tolerance;
  return rep;
}

}  // namespace stablab
