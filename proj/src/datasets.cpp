#include "stablab/datasets.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "stablab/error.hpp"
#include "stablab/rng.hpp"

namespace stablab {
namespace {

double clip01(double x) { return std::clamp(x, 0.0, 1.0); }

// Class means sit on the sphere of radius separation/2 around the box center.
// Point i has label i % m and uses the noise draw of i / m, so all classes
// share the same noise sample and separation 0 makes them indistinguishable.
FinitePopulation gaussian_mixture(const DatasetSpec& s) {
  require(s.d >= 1 && s.m >= 2, ErrorKind::Config, "gaussian-mixture needs d >= 1 and m >= 2");
  Rng dir_rng(derive_seed(s.seed, "directions"));
  std::vector<Vec> dirs(s.m);
  for (std::size_t c = 0; c < s.m; ++c) {
    if (s.m == 2 && c == 1) {
      dirs[1] = dirs[0];
      for (auto& x : dirs[1]) x = -x;
      continue;
    }
    Vec v = dir_rng.normal_vector(s.d);
    const double n = norm2(v);
    for (auto& x : v) x /= n;
    dirs[c] = std::move(v);
  }
  Rng noise_rng(derive_seed(s.seed, "noise"));
  const std::size_t groups = (s.size + s.m - 1) / s.m;
  std::vector<Vec> noise(groups);
  for (auto& v : noise) v = noise_rng.normal_vector(s.d, s.spread);

  std::vector<LabeledExample> pts(s.size);
  for (std::size_t i = 0; i < s.size; ++i) {
    const std::size_t c = i % s.m;
    Vec x(s.d);
    for (std::size_t j = 0; j < s.d; ++j) {
      x[j] = clip01(0.5 + 0.5 * s.separation * dirs[c][j] + noise[i / s.m][j]);
    }
    pts[i] = {std::move(x), c};
  }
  return FinitePopulation::uniform(std::move(pts), s.m);
}

FinitePopulation two_moons(const DatasetSpec& s) {
  Rng rng(derive_seed(s.seed, "moons"));
  std::vector<LabeledExample> pts(s.size);
  for (std::size_t i = 0; i < s.size; ++i) {
    const std::size_t c = i % 2;
    const double t = std::numbers::pi * rng.uniform();
    double x = c == 0 ? std::cos(t) : 1.0 - std::cos(t);
    double y = c == 0 ? std::sin(t) : 0.5 - std::sin(t);
    x += s.noise * rng.normal();
    y += s.noise * rng.normal();
    // [-1, 2] x [-0.5, 1] plus a margin for the noise, mapped onto the box.
    pts[i] = {{clip01((x + 1.25) / 3.5), clip01((y + 0.75) / 2.0)}, c};
  }
  return FinitePopulation::uniform(std::move(pts), 2);
}

constexpr std::array<const char*, 10> kGlyphs = {
    "111101101101111", "010110010010111", "111001111100111", "111001111001111",
    "101101111001001", "111100111001111", "111100111101111", "111001001001001",
    "111101111101111", "111101111001111",
};

FinitePopulation grid_digits(const DatasetSpec& s) {
  Rng rng(derive_seed(s.seed, "digits"));
  std::vector<LabeledExample> pts(s.size);
  for (std::size_t i = 0; i < s.size; ++i) {
    const std::size_t c = i % 10;
    Vec x(15);
    for (std::size_t j = 0; j < 15; ++j) {
      x[j] = clip01((kGlyphs[c][j] == '1' ? 0.9 : 0.1) + s.noise * rng.normal());
    }
    pts[i] = {std::move(x), c};
  }
  return FinitePopulation::uniform(std::move(pts), 10);
}

}  // namespace

FinitePopulation make_dataset(const DatasetSpec& spec) {
  require(spec.size > 0, ErrorKind::EmptyDataset, "dataset size must be positive");
  FinitePopulation pop = [&] {
    if (spec.name == "gaussian-mixture") return gaussian_mixture(spec);
    if (spec.name == "two-moons") return two_moons(spec);
    if (spec.name == "grid-digits") return grid_digits(spec);
    throw Error(ErrorKind::Config, "unknown dataset '" + spec.name + "'");
  }();
  pop.meta["dataset"] = spec.name;
  pop.meta["dataset.seed"] = std::to_string(spec.seed);
  return pop;
}

}  // namespace stablab
