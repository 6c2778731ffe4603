#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "stablab/data.hpp"
#include "stablab/vec.hpp"

namespace stablab {

enum class ModelKind { LinearSoftmax, Mlp, Quadratic };
enum class Activation { Sigmoid, Softplus, Tanh };
enum class LossKind { CrossEntropy, MeanSquaredError };

// Serializable description: {kind, widths, activation, loss, seed}.
// widths = [d, hidden..., m] for networks, [d] for the quadratic test model.
struct ModelSpec {
  ModelKind kind = ModelKind::LinearSoftmax;
  std::vector<std::size_t> widths;
  Activation activation = Activation::Sigmoid;
  LossKind loss = LossKind::CrossEntropy;
  std::uint64_t seed = 0;

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

nlohmann::json to_json(const ModelSpec& spec);
ModelSpec model_spec_from_json(const nlohmann::json& j);
std::string to_string(ModelKind k);
std::string to_string(Activation a);
std::string to_string(LossKind l);

// Differentiable nonnegative loss l(theta, z).
//
// Networks are fully connected: hidden layers use a smooth activation, the
// output layer is affine (logits). Parameters are packed layer by layer as
// [W_0 (row-major, out x in), b_0, W_1, b_1, ...].
//   cross-entropy:      l = logsumexp(o) - o_y
//   mean-squared-error: l = (1/m) * ||o - onehot(y)||^2
// The quadratic test model is l(theta, z) = 0.5 * ||theta - x||^2 (k = d).
//
// All methods are const and allocation-local, so a Model may be shared freely
// across threads.
class Model {
 public:
  explicit Model(ModelSpec spec);

  static Model linear_softmax(std::size_t d, std::size_t m,
                              LossKind loss = LossKind::CrossEntropy);
  static Model mlp(std::vector<std::size_t> widths, Activation act,
                   LossKind loss = LossKind::CrossEntropy, std::uint64_t seed = 0);
  static Model quadratic(std::size_t d);

  const ModelSpec& spec() const { return spec_; }
  ModelKind kind() const { return spec_.kind; }
  std::size_t param_dim() const { return param_dim_; }
  std::size_t input_dim() const { return spec_.widths.front(); }
  // Quadratic test model accepts any label; reported as 1.
  std::size_t num_classes() const;
  bool is_linear_binary_ce() const;

  double loss(std::span<const double> theta, const LabeledExample& z) const;
  Vec grad_theta(std::span<const double> theta, const LabeledExample& z) const;
  Vec grad_input(std::span<const double> theta, const LabeledExample& z) const;
  // Hessian (in theta) - vector product.
  Vec hvp_theta(std::span<const double> theta, const LabeledExample& z,
                std::span<const double> v) const;
  // One forward/backward pass; either gradient pointer may be null.
  double loss_and_grads(std::span<const double> theta, const LabeledExample& z, Vec* g_theta,
                        Vec* g_input) const;

  // Gaussian init with std 1/sqrt(fan_in) for weights and zero biases.
  Vec init_params(std::uint64_t seed) const;
  Vec init_params() const { return init_params(spec_.seed); }

  // Logits (network kinds only).
  Vec forward(std::span<const double> theta, std::span<const double> x) const;

  std::size_t weight_offset(std::size_t layer) const { return w_off_[layer]; }
  std::size_t bias_offset(std::size_t layer) const { return b_off_[layer]; }
  std::size_t num_layers() const { return w_off_.size(); }

 private:
  void check(std::span<const double> theta, const LabeledExample& z) const;

  ModelSpec spec_;
  std::size_t param_dim_ = 0;
  std::vector<std::size_t> w_off_;
  std::vector<std::size_t> b_off_;
};

}  // namespace stablab
