#pragma once

#include <cmath>
#include <vector>

#include "stablab/data.hpp"
#include "stablab/model.hpp"
#include "stablab/rng.hpp"

namespace oracle {

using stablab::LabeledExample;
using stablab::Model;
using stablab::Rng;
using stablab::Vec;

inline Vec random_vec(Rng& rng, std::size_t n, double scale = 1.0) {
  return rng.normal_vector(n, scale);
}

inline LabeledExample random_example(Rng& rng, std::size_t d, std::size_t m) {
  LabeledExample z;
  z.features.resize(d);
  for (auto& x : z.features) x = rng.uniform();
  z.label = m > 1 ? rng.below(m) : 0;
  return z;
}

// One representative per (kind, activation, loss) combination.
inline std::vector<Model> model_zoo() {
  using stablab::Activation;
  using stablab::LossKind;
  return {
      Model::linear_softmax(3, 2),
      Model::linear_softmax(4, 3, LossKind::MeanSquaredError),
      Model::mlp({2, 3, 2}, Activation::Sigmoid),
      Model::mlp({3, 4, 3}, Activation::Softplus, LossKind::MeanSquaredError),
      Model::mlp({2, 5, 4, 2}, Activation::Tanh),
      Model::mlp({2, 4, 2}, Activation::Softplus),
      Model::quadratic(4),
  };
}

inline std::string label(const Model& m) {
  std::string s = stablab::to_string(m.kind());
  for (auto w : m.spec().widths) s += "-" + std::to_string(w);
  if (m.kind() == stablab::ModelKind::Mlp) s += "/" + stablab::to_string(m.spec().activation);
  if (m.kind() != stablab::ModelKind::Quadratic) s += "/" + stablab::to_string(m.spec().loss);
  return s;
}

inline double l2(const Vec& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

inline double rel_err(const Vec& a, const Vec& b, double floor = 1e-3) {
  double num = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) num += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(num) / std::max(l2(b), floor);
}

}  // namespace oracle
