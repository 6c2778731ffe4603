#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "stablab/rng.hpp"
#include "stablab/vec.hpp"

namespace stablab {

// z = (x, y): features in [0,1]^d and a class index.
struct LabeledExample {
  Vec features;
  std::size_t label = 0;

  friend bool operator==(const LabeledExample&, const LabeledExample&) = default;
};

// Checks the box and label invariants; throws Error(Contract) otherwise.
void validate_example(const LabeledExample& z, std::size_t dim, std::size_t num_classes);

// A finite ground-truth distribution: population expectations are exact
// weighted sums over `points`.
class FinitePopulation {
 public:
  FinitePopulation(std::vector<LabeledExample> points, std::vector<double> weights,
                   std::size_t num_classes);
  static FinitePopulation uniform(std::vector<LabeledExample> points, std::size_t num_classes);

  std::size_t size() const { return points_.size(); }
  std::size_t dim() const { return points_.front().features.size(); }
  std::size_t num_classes() const { return num_classes_; }
  const LabeledExample& point(std::size_t i) const { return points_[i]; }
  double weight(std::size_t i) const { return weights_[i]; }
  std::span<const LabeledExample> points() const { return points_; }
  std::span<const double> weights() const { return weights_; }

  // Index drawn with probability proportional to its weight.
  std::size_t sample_index(Rng& rng) const;
  std::vector<LabeledExample> sample(std::size_t n, Rng& rng) const;

  // Same points and weights with different features (labels untouched).
  FinitePopulation with_features(std::vector<Vec> features) const;

  // Free-form provenance, written as header lines by save_population.
  std::map<std::string, std::string> meta;

 private:
  std::vector<LabeledExample> points_;
  std::vector<double> weights_;
  std::vector<double> cdf_;
  std::size_t num_classes_;
};

// Text format: '#' header lines (format tag, dim, classes, meta key/values),
// a column header row, then one "weight,label,x0,...,x{d-1}" row per point.
// Reals are written with 17 significant digits so a load reproduces the
// population bit-exactly.
void save_population(const FinitePopulation& pop, const std::filesystem::path& path);
FinitePopulation load_population(const std::filesystem::path& path);

std::string format_real(double v);

}  // namespace stablab
