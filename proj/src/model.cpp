#include "stablab/model.hpp"

#include <algorithm>
#include <cmath>

#include "stablab/error.hpp"
#include "stablab/rng.hpp"
#include "stablab/simd/kernels.hpp"

namespace stablab {
namespace {

struct ActivationFns {
  double value;
  double d1;
  double d2;
};

ActivationFns activate(Activation a, double x) {
  switch (a) {
    case Activation::Sigmoid: {
      const double s = x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
      const double d1 = s * (1.0 - s);
      return {s, d1, d1 * (1.0 - 2.0 * s)};
    }
    case Activation::Softplus: {
      const double v = x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
      const double s = x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
      return {v, s, s * (1.0 - s)};
    }
    case Activation::Tanh: {
      const double t = std::tanh(x);
      const double d1 = 1.0 - t * t;
      return {t, d1, -2.0 * t * d1};
    }
  }
  return {0, 0, 0};
}

// Per-call forward state of the network.
struct Forward {
  std::vector<Vec> pre;   // z_l = W_l a_l + b_l
  std::vector<Vec> post;  // a_0 = x, a_{l+1} = act(z_l) for hidden layers
  Vec d1;                 // scratch
};

}  // namespace

std::string to_string(ModelKind k) {
  switch (k) {
    case ModelKind::LinearSoftmax: return "linear-softmax";
    case ModelKind::Mlp: return "mlp";
    case ModelKind::Quadratic: return "quadratic";
  }
  return "?";
}

std::string to_string(Activation a) {
  switch (a) {
    case Activation::Sigmoid: return "sigmoid";
    case Activation::Softplus: return "softplus";
    case Activation::Tanh: return "tanh";
  }
  return "?";
}

std::string to_string(LossKind l) {
  return l == LossKind::CrossEntropy ? "cross-entropy" : "mean-squared-error";
}

nlohmann::json to_json(const ModelSpec& spec) {
  return {{"kind", to_string(spec.kind)},
          {"widths", spec.widths},
          {"activation", to_string(spec.activation)},
          {"loss", to_string(spec.loss)},
          {"seed", spec.seed}};
}

ModelSpec model_spec_from_json(const nlohmann::json& j) {
  ModelSpec s;
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "linear-softmax") s.kind = ModelKind::LinearSoftmax;
  else if (kind == "mlp") s.kind = ModelKind::Mlp;
  else if (kind == "quadratic") s.kind = ModelKind::Quadratic;
  else throw Error(ErrorKind::Config, "unknown model kind: " + kind);
  s.widths = j.at("widths").get<std::vector<std::size_t>>();
  const std::string act = j.value("activation", std::string("sigmoid"));
  if (act == "sigmoid") s.activation = Activation::Sigmoid;
  else if (act == "softplus") s.activation = Activation::Softplus;
  else if (act == "tanh") s.activation = Activation::Tanh;
  else throw Error(ErrorKind::Config, "unsupported activation: " + act);
  const std::string loss = j.value("loss", std::string("cross-entropy"));
  if (loss == "cross-entropy" || loss == "ce") s.loss = LossKind::CrossEntropy;
  else if (loss == "mean-squared-error" || loss == "mse") s.loss = LossKind::MeanSquaredError;
  else throw Error(ErrorKind::Config, "unknown loss: " + loss);
  s.seed = j.value("seed", std::uint64_t{0});
  return s;
}

Model::Model(ModelSpec spec) : spec_(std::move(spec)) {
  require(!spec_.widths.empty() && spec_.widths.front() > 0, ErrorKind::Config,
          "model needs a positive input width");
  if (spec_.kind == ModelKind::Quadratic) {
    require(spec_.widths.size() == 1, ErrorKind::Config, "quadratic model takes widths [d]");
    param_dim_ = spec_.widths.front();
    return;
  }
  if (spec_.kind == ModelKind::LinearSoftmax) {
    require(spec_.widths.size() == 2, ErrorKind::Config, "linear-softmax takes widths [d, m]");
  } else {
    require(spec_.widths.size() >= 3, ErrorKind::Config, "mlp needs at least one hidden layer");
  }
  for (std::size_t w : spec_.widths) require(w > 0, ErrorKind::Config, "zero layer width");
  require(spec_.widths.back() >= 2, ErrorKind::Config, "at least two classes required");
  std::size_t off = 0;
  for (std::size_t l = 0; l + 1 < spec_.widths.size(); ++l) {
    w_off_.push_back(off);
    off += spec_.widths[l] * spec_.widths[l + 1];
    b_off_.push_back(off);
    off += spec_.widths[l + 1];
  }
  param_dim_ = off;
}

Model Model::linear_softmax(std::size_t d, std::size_t m, LossKind loss) {
  return Model(ModelSpec{ModelKind::LinearSoftmax, {d, m}, Activation::Sigmoid, loss, 0});
}

Model Model::mlp(std::vector<std::size_t> widths, Activation act, LossKind loss,
                 std::uint64_t seed) {
  return Model(ModelSpec{ModelKind::Mlp, std::move(widths), act, loss, seed});
}

Model Model::quadratic(std::size_t d) {
  return Model(ModelSpec{ModelKind::Quadratic, {d}, Activation::Sigmoid,
                         LossKind::MeanSquaredError, 0});
}

std::size_t Model::num_classes() const {
  return spec_.kind == ModelKind::Quadratic ? 1 : spec_.widths.back();
}

bool Model::is_linear_binary_ce() const {
  return spec_.kind == ModelKind::LinearSoftmax && spec_.widths.back() == 2 &&
         spec_.loss == LossKind::CrossEntropy;
}

void Model::check(std::span<const double> theta, const LabeledExample& z) const {
  require(theta.size() == param_dim_, ErrorKind::Contract,
          "theta has length " + std::to_string(theta.size()) + ", model expects " +
              std::to_string(param_dim_));
  require(z.features.size() == input_dim(), ErrorKind::Contract,
          "example has " + std::to_string(z.features.size()) + " features, model expects " +
              std::to_string(input_dim()));
  if (spec_.kind != ModelKind::Quadratic) {
    require(z.label < num_classes(), ErrorKind::Contract, "label out of range for model");
  }
}

Vec Model::init_params(std::uint64_t seed) const {
  Vec theta(param_dim_, 0.0);
  if (spec_.kind == ModelKind::Quadratic) return theta;
  Rng rng(derive_seed(seed, "model-init"));
  for (std::size_t l = 0; l < w_off_.size(); ++l) {
    const std::size_t in = spec_.widths[l], out = spec_.widths[l + 1];
    const double scale = 1.0 / std::sqrt(static_cast<double>(in));
    for (std::size_t i = 0; i < in * out; ++i) theta[w_off_[l] + i] = scale * rng.normal();
  }
  return theta;
}

namespace {

void run_forward(const Model& m, std::span<const double> theta, std::span<const double> x,
                 Forward& f) {
  const auto& w = m.spec().widths;
  const std::size_t layers = w.size() - 1;
  const auto& k = simd::active();
  f.pre.resize(layers);
  f.post.resize(layers + 1);
  f.post[0].assign(x.begin(), x.end());
  for (std::size_t l = 0; l < layers; ++l) {
    const std::size_t in = w[l], out = w[l + 1];
    Vec& z = f.pre[l];
    z.assign(theta.begin() + m.bias_offset(l), theta.begin() + m.bias_offset(l) + out);
    k.gemv(theta.data() + m.weight_offset(l), out, in, f.post[l].data(), z.data());
    if (l + 1 < layers) {
      Vec& a = f.post[l + 1];
      a.resize(out);
      for (std::size_t j = 0; j < out; ++j) a[j] = activate(m.spec().activation, z[j]).value;
    } else {
      f.post[l + 1] = z;
    }
  }
}

// Returns the loss and writes dl/do into g.
double output_loss(LossKind loss, const Vec& o, std::size_t y, Vec& g, Vec* probs) {
  const std::size_t m = o.size();
  g.resize(m);
  if (loss == LossKind::CrossEntropy) {
    const double mx = *std::max_element(o.begin(), o.end());
    double sum = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      g[j] = std::exp(o[j] - mx);
      sum += g[j];
    }
    for (auto& p : g) p /= sum;
    if (probs) *probs = g;
    const double value = (mx + std::log(sum)) - o[y];
    g[y] -= 1.0;
    return value;
  }
  double value = 0.0;
  const double inv_m = 1.0 / static_cast<double>(m);
  for (std::size_t j = 0; j < m; ++j) {
    const double r = o[j] - (j == y ? 1.0 : 0.0);
    value += r * r;
    g[j] = 2.0 * inv_m * r;
  }
  return value * inv_m;
}

}  // namespace

Vec Model::forward(std::span<const double> theta, std::span<const double> x) const {
  require(spec_.kind != ModelKind::Quadratic, ErrorKind::UnsupportedMethod,
          "quadratic test model has no logits");
  Forward f;
  run_forward(*this, theta, x, f);
  return f.post.back();
}

double Model::loss_and_grads(std::span<const double> theta, const LabeledExample& z, Vec* g_theta,
                             Vec* g_input) const {
  check(theta, z);
  if (spec_.kind == ModelKind::Quadratic) {
    Vec r = sub(theta, z.features);
    const double value = 0.5 * simd::dot(r, r);
    if (g_input) {
      *g_input = r;
      for (auto& v : *g_input) v = -v;
    }
    if (g_theta) *g_theta = std::move(r);
    return value;
  }
  Forward f;
  run_forward(*this, theta, z.features, f);
  Vec g;
  const double value = output_loss(spec_.loss, f.post.back(), z.label, g, nullptr);
  if (!g_theta && !g_input) return value;

  const auto& k = simd::active();
  const auto& w = spec_.widths;
  if (g_theta) g_theta->assign(param_dim_, 0.0);
  for (std::size_t l = w.size() - 1; l-- > 0;) {
    const std::size_t in = w[l], out = w[l + 1];
    if (g_theta) {
      k.ger(1.0, g.data(), out, f.post[l].data(), in, g_theta->data() + w_off_[l]);
      std::copy(g.begin(), g.end(), g_theta->begin() + b_off_[l]);
    }
    if (l == 0 && !g_input) break;
    Vec u(in, 0.0);
    k.gemv_t(theta.data() + w_off_[l], out, in, g.data(), u.data());
    if (l == 0) {
      *g_input = std::move(u);
      break;
    }
    for (std::size_t j = 0; j < in; ++j) u[j] *= activate(spec_.activation, f.pre[l - 1][j]).d1;
    g = std::move(u);
  }
  return value;
}

double Model::loss(std::span<const double> theta, const LabeledExample& z) const {
  return loss_and_grads(theta, z, nullptr, nullptr);
}

Vec Model::grad_theta(std::span<const double> theta, const LabeledExample& z) const {
  Vec g;
  loss_and_grads(theta, z, &g, nullptr);
  return g;
}

Vec Model::grad_input(std::span<const double> theta, const LabeledExample& z) const {
  Vec g;
  loss_and_grads(theta, z, nullptr, &g);
  return g;
}

Vec Model::hvp_theta(std::span<const double> theta, const LabeledExample& z,
                     std::span<const double> v) const {
  check(theta, z);
  require(v.size() == param_dim_, ErrorKind::Contract, "hvp direction has wrong length");
  for (double x : v) require(std::isfinite(x), ErrorKind::Contract, "hvp direction not finite");
  if (spec_.kind == ModelKind::Quadratic) return Vec(v.begin(), v.end());

  // Forward-over-reverse (R-operator) pass.
  const auto& k = simd::active();
  const auto& w = spec_.widths;
  const std::size_t layers = w.size() - 1;
  Forward f;
  run_forward(*this, theta, z.features, f);

  std::vector<Vec> r_pre(layers), r_post(layers + 1);
  r_post[0].assign(w[0], 0.0);
  for (std::size_t l = 0; l < layers; ++l) {
    const std::size_t in = w[l], out = w[l + 1];
    Vec& rz = r_pre[l];
    rz.assign(v.begin() + b_off_[l], v.begin() + b_off_[l] + out);
    k.gemv(v.data() + w_off_[l], out, in, f.post[l].data(), rz.data());
    k.gemv(theta.data() + w_off_[l], out, in, r_post[l].data(), rz.data());
    if (l + 1 < layers) {
      r_post[l + 1].resize(out);
      for (std::size_t j = 0; j < out; ++j) {
        r_post[l + 1][j] = activate(spec_.activation, f.pre[l][j]).d1 * rz[j];
      }
    } else {
      r_post[l + 1] = rz;
    }
  }

  Vec g, probs;
  output_loss(spec_.loss, f.post.back(), z.label, g, &probs);
  const Vec& ro = r_post.back();
  Vec rg(ro.size());
  if (spec_.loss == LossKind::CrossEntropy) {
    const double pr = simd::dot(probs, ro);
    for (std::size_t j = 0; j < ro.size(); ++j) rg[j] = probs[j] * (ro[j] - pr);
  } else {
    const double s = 2.0 / static_cast<double>(ro.size());
    for (std::size_t j = 0; j < ro.size(); ++j) rg[j] = s * ro[j];
  }

  Vec hv(param_dim_, 0.0);
  for (std::size_t l = layers; l-- > 0;) {
    const std::size_t in = w[l], out = w[l + 1];
    k.ger(1.0, rg.data(), out, f.post[l].data(), in, hv.data() + w_off_[l]);
    k.ger(1.0, g.data(), out, r_post[l].data(), in, hv.data() + w_off_[l]);
    std::copy(rg.begin(), rg.end(), hv.begin() + b_off_[l]);
    if (l == 0) break;
    Vec u(in, 0.0), ru(in, 0.0);
    k.gemv_t(theta.data() + w_off_[l], out, in, g.data(), u.data());
    k.gemv_t(v.data() + w_off_[l], out, in, g.data(), ru.data());
    k.gemv_t(theta.data() + w_off_[l], out, in, rg.data(), ru.data());
    Vec g_next(in), rg_next(in);
    for (std::size_t j = 0; j < in; ++j) {
      const auto a = activate(spec_.activation, f.pre[l - 1][j]);
      g_next[j] = u[j] * a.d1;
      rg_next[j] = ru[j] * a.d1 + u[j] * a.d2 * r_pre[l - 1][j];
    }
    g = std::move(g_next);
    rg = std::move(rg_next);
  }
  return hv;
}

}  // namespace stablab
