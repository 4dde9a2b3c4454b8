#ifndef CEN_MODEL_HPP
#define CEN_MODEL_HPP

// Two-headed MLP: a ReLU trunk producing features f, a k-way distribution head
// z = W_ldl f + b_ldl and a scalar regression head s = W_reg f + b_reg.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "cen/error.hpp"
#include "cen/numerics.hpp"

namespace cen {

struct DenseLayer {
  Matrix weights; // (outputs x inputs)
  Vector biases;

  std::size_t inputs() const noexcept { return weights.cols(); }
  std::size_t outputs() const noexcept { return weights.rows(); }
  std::size_t parameter_count() const noexcept { return weights.size() + biases.size(); }

  bool operator==(const DenseLayer &) const = default;
};

/// Layer widths: input_dim -> hidden[0] -> ... -> hidden.back() -> {k, 1}.
struct ModelShape {
  std::size_t input_dim = 0;
  std::vector<std::size_t> hidden;
  std::size_t num_classes = 0;

  bool operator==(const ModelShape &) const = default;
};

struct ModelParams {
  std::vector<DenseLayer> trunk;
  DenseLayer head_ldl;
  DenseLayer head_reg;

  std::size_t input_dim() const {
    return trunk.empty() ? head_ldl.inputs() : trunk.front().inputs();
  }
  std::size_t feature_dim() const {
    return trunk.empty() ? head_ldl.inputs() : trunk.back().outputs();
  }
  std::size_t num_classes() const { return head_ldl.outputs(); }

  ModelShape shape() const {
    ModelShape s{input_dim(), {}, num_classes()};
    for (const auto &l : trunk)
      s.hidden.push_back(l.outputs());
    return s;
  }

  std::size_t parameter_count() const {
    std::size_t n = head_ldl.parameter_count() + head_reg.parameter_count();
    for (const auto &l : trunk)
      n += l.parameter_count();
    return n;
  }

  /// Calls fn(span) on every parameter block in a fixed order: each trunk
  /// layer's weights then biases, then head_ldl, then head_reg.
  template <typename Fn> void for_each_block(Fn &&fn) {
    for (auto &l : trunk) {
      fn(std::span<double>(l.weights.data()), true);
      fn(std::span<double>(l.biases), false);
    }
    fn(std::span<double>(head_ldl.weights.data()), true);
    fn(std::span<double>(head_ldl.biases), false);
    fn(std::span<double>(head_reg.weights.data()), true);
    fn(std::span<double>(head_reg.biases), false);
  }
  template <typename Fn> void for_each_block(Fn &&fn) const {
    for (const auto &l : trunk) {
      fn(std::span<const double>(l.weights.data()), true);
      fn(std::span<const double>(l.biases), false);
    }
    fn(std::span<const double>(head_ldl.weights.data()), true);
    fn(std::span<const double>(head_ldl.biases), false);
    fn(std::span<const double>(head_reg.weights.data()), true);
    fn(std::span<const double>(head_reg.biases), false);
  }

  void validate() const {
    auto check_layer = [](const DenseLayer &l, const std::string &name) {
      if (l.biases.size() != l.weights.rows())
        throw ShapeError(name + ": weights " + l.weights.shape() + " with " +
                         std::to_string(l.biases.size()) + " biases");
    };
    std::size_t width = input_dim();
    for (std::size_t i = 0; i < trunk.size(); ++i) {
      const auto name = "trunk layer " + std::to_string(i);
      check_layer(trunk[i], name);
      if (trunk[i].inputs() != width)
        throw ShapeError(name + " expects " + std::to_string(trunk[i].inputs()) +
                         " inputs, previous layer produces " + std::to_string(width));
      width = trunk[i].outputs();
    }
    check_layer(head_ldl, "head_ldl");
    check_layer(head_reg, "head_reg");
    if (head_ldl.inputs() != width || head_reg.inputs() != width)
      throw ShapeError("heads expect " + std::to_string(head_ldl.inputs()) + "/" +
                       std::to_string(head_reg.inputs()) + " features, trunk produces " +
                       std::to_string(width));
    if (head_reg.outputs() != 1)
      throw ShapeError("regression head must have one output, has " +
                       std::to_string(head_reg.outputs()));
    bool finite = true;
    for_each_block([&](std::span<const double> b, bool) { finite = finite && all_finite(b); });
    if (!finite)
      throw DomainError("model parameters contain non-finite values");
  }

  bool operator==(const ModelParams &) const = default;
};

inline DenseLayer zero_layer(std::size_t inputs, std::size_t outputs) {
  return DenseLayer{Matrix(outputs, inputs), Vector(outputs, 0.0)};
}

inline ModelParams zero_model(const ModelShape &shape) {
  if (shape.input_dim == 0 || shape.num_classes == 0)
    throw ShapeError("model input dim and class count must be positive");
  ModelParams m;
  std::size_t width = shape.input_dim;
  for (std::size_t h : shape.hidden) {
    if (h == 0)
      throw ShapeError("hidden layer width must be positive");
    m.trunk.push_back(zero_layer(width, h));
    width = h;
  }
  m.head_ldl = zero_layer(width, shape.num_classes);
  m.head_reg = zero_layer(width, 1);
  return m;
}

inline ModelParams zeros_like(const ModelParams &p) {
  ModelParams z = p;
  z.for_each_block([](std::span<double> b, bool) { std::fill(b.begin(), b.end(), 0.0); });
  return z;
}

/// Uniform fan-in initialization: weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)),
/// biases zero.
inline ModelParams init_model(const ModelShape &shape, std::uint64_t seed) {
  ModelParams m = zero_model(shape);
  std::mt19937_64 rng(seed);
  auto fill = [&rng](DenseLayer &l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(l.inputs()));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (double &w : l.weights.data())
      w = dist(rng);
  };
  for (auto &l : m.trunk)
    fill(l);
  fill(m.head_ldl);
  fill(m.head_reg);
  return m;
}

inline Vector flatten(const ModelParams &p) {
  Vector flat;
  flat.reserve(p.parameter_count());
  p.for_each_block([&](std::span<const double> b, bool) { flat.insert(flat.end(), b.begin(), b.end()); });
  return flat;
}

inline void unflatten(std::span<const double> flat, ModelParams &p) {
  if (flat.size() != p.parameter_count())
    throw ShapeError("unflatten: " + std::to_string(flat.size()) + " values for a model with " +
                     std::to_string(p.parameter_count()) + " parameters");
  std::size_t off = 0;
  p.for_each_block([&](std::span<double> b, bool) {
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(off), b.size(), b.begin());
    off += b.size();
  });
}

/// Activations retained for a single backward call.
struct ForwardTrace {
  std::vector<Vector> pre;  // per trunk layer, before ReLU
  std::vector<Vector> act;  // act[0] = x, act[i+1] = relu(pre[i]); act.back() = f
  Vector logits;            // z, length k
  double regression = 0.0;  // s
  ModelShape shape;
  bool consumed = false;

  std::span<const double> features() const { return act.back(); }
};

inline ForwardTrace forward(const ModelParams &params, std::span<const double> x) {
  if (x.size() != params.input_dim())
    throw ShapeError("forward: input of length " + std::to_string(x.size()) +
                     " for a model expecting " + std::to_string(params.input_dim()));
  ForwardTrace t;
  t.shape = params.shape();
  t.act.reserve(params.trunk.size() + 1);
  t.pre.reserve(params.trunk.size());
  t.act.emplace_back(x.begin(), x.end());
  for (const auto &layer : params.trunk) {
    Vector a = affine(layer.weights, t.act.back(), layer.biases);
    Vector h(a.size());
    for (std::size_t i = 0; i < a.size(); ++i)
      h[i] = relu(a[i]);
    t.pre.push_back(std::move(a));
    t.act.push_back(std::move(h));
  }
  t.logits = affine(params.head_ldl.weights, t.act.back(), params.head_ldl.biases);
  t.regression = affine(params.head_reg.weights, t.act.back(), params.head_reg.biases)[0];
  return t;
}

namespace detail {

// grad.W += outer(delta, input); grad.b += delta
inline void accumulate_layer(DenseLayer &grad, std::span<const double> delta,
                             std::span<const double> input) {
  for (std::size_t r = 0; r < delta.size(); ++r) {
    const double d = delta[r];
    grad.biases[r] += d;
    if (d == 0.0)
      continue;
    auto gr = grad.weights.row(r);
    for (std::size_t c = 0; c < input.size(); ++c)
      gr[c] += d * input[c];
  }
}

// W^T delta
inline void transpose_apply(const Matrix &w, std::span<const double> delta, Vector &out) {
  out.assign(w.cols(), 0.0);
  for (std::size_t r = 0; r < w.rows(); ++r) {
    const double d = delta[r];
    if (d == 0.0)
      continue;
    const auto wr = w.row(r);
    for (std::size_t c = 0; c < wr.size(); ++c)
      out[c] += d * wr[c];
  }
}

} // namespace detail

/// Adds the gradient of (d_z . z + d_s * s) with respect to every parameter
/// into `grads`. Marks the trace consumed.
inline void accumulate_backward(const ModelParams &params, ForwardTrace &trace,
                                std::span<const double> d_z, double d_s, ModelParams &grads) {
  if (trace.consumed)
    throw Error("backward: trace already consumed by a previous backward call");
  if (trace.shape != params.shape() || grads.shape() != params.shape())
    throw ShapeError("backward: trace/gradient shape does not match the model");
  if (d_z.size() != params.num_classes())
    throw ShapeError("backward: d_z has length " + std::to_string(d_z.size()) +
                     ", model has " + std::to_string(params.num_classes()) + " classes");
  trace.consumed = true;

  const auto f = trace.features();
  detail::accumulate_layer(grads.head_ldl, d_z, f);
  const double ds[1] = {d_s};
  detail::accumulate_layer(grads.head_reg, ds, f);

  if (params.trunk.empty())
    return;

  // d features = W_ldl^T d_z + W_reg^T d_s
  Vector delta;
  detail::transpose_apply(params.head_ldl.weights, d_z, delta);
  const auto wreg = params.head_reg.weights.row(0);
  for (std::size_t c = 0; c < delta.size(); ++c)
    delta[c] += d_s * wreg[c];

  Vector next;
  for (std::size_t li = params.trunk.size(); li-- > 0;) {
    const auto &pre = trace.pre[li];
    for (std::size_t i = 0; i < delta.size(); ++i)
      delta[i] *= relu_grad(pre[i]);
    detail::accumulate_layer(grads.trunk[li], delta, trace.act[li]);
    if (li == 0)
      break;
    detail::transpose_apply(params.trunk[li].weights, delta, next);
    std::swap(delta, next);
  }
}

inline ModelParams backward(const ModelParams &params, ForwardTrace &trace,
                            std::span<const double> d_z, double d_s) {
  ModelParams grads = zeros_like(params);
  accumulate_backward(params, trace, d_z, d_s, grads);
  return grads;
}

struct OptimizerState {
  ModelParams velocity;
  double learning_rate = 0.01;
  double momentum = 0.9;
  double weight_decay = 1e-4;

  static OptimizerState for_model(const ModelParams &params, double lr, double momentum,
                                  double weight_decay) {
    if (!(lr >= 0.0) || !(momentum >= 0.0 && momentum < 1.0) || !(weight_decay >= 0.0))
      throw DomainError("optimizer requires lr >= 0, momentum in [0,1), weight decay >= 0");
    return OptimizerState{zeros_like(params), lr, momentum, weight_decay};
  }
};

/// v <- mu v + g + wd theta (weights only); theta <- theta - lr v.
inline void sgd_step(ModelParams &params, const ModelParams &grads, OptimizerState &opt) {
  if (grads.shape() != params.shape() || opt.velocity.shape() != params.shape())
    throw ShapeError("sgd_step: gradient or momentum buffers do not match the model");
  bool finite = true;
  grads.for_each_block([&](std::span<const double> b, bool) { finite = finite && all_finite(b); });
  if (!finite)
    throw DivergenceError("sgd_step: non-finite gradient");

  std::vector<std::span<const double>> g;
  grads.for_each_block([&](std::span<const double> b, bool) { g.push_back(b); });
  std::vector<std::span<double>> v;
  opt.velocity.for_each_block([&](std::span<double> b, bool) { v.push_back(b); });

  std::size_t block = 0;
  params.for_each_block([&](std::span<double> theta, bool is_weight) {
    const double wd = is_weight ? opt.weight_decay : 0.0;
    auto gb = g[block];
    auto vb = v[block];
    for (std::size_t i = 0; i < theta.size(); ++i) {
      vb[i] = opt.momentum * vb[i] + gb[i] + wd * theta[i];
      theta[i] -= opt.learning_rate * vb[i];
    }
    ++block;
  });
}

} // namespace cen

#endif
