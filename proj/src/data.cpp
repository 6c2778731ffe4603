#include "stablab/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "stablab/error.hpp"

namespace stablab {

void validate_example(const LabeledExample& z, std::size_t dim, std::size_t num_classes) {
  require(z.features.size() == dim, ErrorKind::Contract,
          "example has " + std::to_string(z.features.size()) + " features, expected " +
              std::to_string(dim));
  require(z.label < num_classes, ErrorKind::Contract,
          "label " + std::to_string(z.label) + " out of range");
  for (double x : z.features) {
    require(x >= 0.0 && x <= 1.0, ErrorKind::Contract, "feature outside [0,1]");
  }
}

FinitePopulation::FinitePopulation(std::vector<LabeledExample> points, std::vector<double> weights,
                                   std::size_t num_classes)
    : points_(std::move(points)), weights_(std::move(weights)), num_classes_(num_classes) {
  require(!points_.empty(), ErrorKind::EmptyDataset, "population has no points");
  require(points_.size() == weights_.size(), ErrorKind::Contract,
          "population weights/points length mismatch");
  const std::size_t d = points_.front().features.size();
  for (const auto& z : points_) validate_example(z, d, num_classes_);
  double total = 0.0;
  cdf_.reserve(weights_.size());
  for (double w : weights_) {
    require(w >= 0.0 && std::isfinite(w), ErrorKind::Contract, "negative population weight");
    total += w;
    cdf_.push_back(total);
  }
  require(std::abs(total - 1.0) <= 1e-12, ErrorKind::Contract, "population weights must sum to 1");
}

FinitePopulation FinitePopulation::uniform(std::vector<LabeledExample> points,
                                           std::size_t num_classes) {
  require(!points.empty(), ErrorKind::EmptyDataset, "population has no points");
  std::vector<double> w(points.size(), 1.0 / static_cast<double>(points.size()));
  return FinitePopulation(std::move(points), std::move(w), num_classes);
}

std::size_t FinitePopulation::sample_index(Rng& rng) const {
  const double u = rng.uniform() * cdf_.back();
  auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
  std::size_t i = static_cast<std::size_t>(it - cdf_.begin());
  if (i >= cdf_.size()) i = cdf_.size() - 1;
  // Skip zero-weight points that share a cdf value with their successor.
  while (weights_[i] == 0.0 && i + 1 < cdf_.size()) ++i;
  return i;
}

std::vector<LabeledExample> FinitePopulation::sample(std::size_t n, Rng& rng) const {
  std::vector<LabeledExample> s;
  s.reserve(n);
  for (std::size_t k = 0; k < n; ++k) s.push_back(points_[sample_index(rng)]);
  return s;
}

FinitePopulation FinitePopulation::with_features(std::vector<Vec> features) const {
  require(features.size() == points_.size(), ErrorKind::Contract, "feature list length mismatch");
  std::vector<LabeledExample> pts;
  pts.reserve(points_.size());
  for (std::size_t i = 0; i < points_.size(); ++i) {
    pts.push_back({std::move(features[i]), points_[i].label});
  }
  FinitePopulation out(std::move(pts), weights_, num_classes_);
  out.meta = meta;
  return out;
}

std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void save_population(const FinitePopulation& pop, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorKind::Io, "cannot write " + path.string());
  out << "#stablab-population 1\n";
  out << "#dim " << pop.dim() << "\n";
  out << "#classes " << pop.num_classes() << "\n";
  for (const auto& [k, v] : pop.meta) out << "#meta " << k << " " << v << "\n";
  out << "weight,label";
  for (std::size_t j = 0; j < pop.dim(); ++j) out << ",x" << j;
  out << "\n";
  for (std::size_t i = 0; i < pop.size(); ++i) {
    out << format_real(pop.weight(i)) << "," << pop.point(i).label;
    for (double x : pop.point(i).features) out << "," << format_real(x);
    out << "\n";
  }
}

FinitePopulation load_population(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::Io, "cannot read " + path.string());
  std::string line;
  std::size_t dim = 0, classes = 0;
  bool tagged = false, header_seen = false;
  std::map<std::string, std::string> meta;
  std::vector<LabeledExample> pts;
  std::vector<double> weights;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream ls(line.substr(1));
      std::string key;
      ls >> key;
      if (key == "stablab-population") {
        tagged = true;
      } else if (key == "dim") {
        ls >> dim;
      } else if (key == "classes") {
        ls >> classes;
      } else if (key == "meta") {
        std::string k, v;
        ls >> k;
        std::getline(ls >> std::ws, v);
        meta[k] = v;
      }
      continue;
    }
    if (!header_seen) {
      header_seen = true;
      continue;
    }
    std::vector<double> cols;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cols.push_back(std::stod(cell));
    require(cols.size() == dim + 2, ErrorKind::Schema, "row width mismatch in " + path.string());
    weights.push_back(cols[0]);
    pts.push_back({Vec(cols.begin() + 2, cols.end()), static_cast<std::size_t>(cols[1])});
  }
  require(tagged, ErrorKind::Schema, path.string() + " is not a population file");
  FinitePopulation pop(std::move(pts), std::move(weights), classes);
  pop.meta = std::move(meta);
  return pop;
}

}  // namespace stablab
