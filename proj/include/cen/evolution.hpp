#ifndef CEN_EVOLUTION_HPP
#define CEN_EVOLUTION_HPP

// The generation chain. Generation 1 (the ancestor) is trained on cross
// entropy plus L1 regression. Every later generation inherits the previous
// generation's knowledge cache (its tempered distribution and absolute
// regression error per training sample) and trains on the blended KL/CE loss
// plus the slack hinge.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "cen/data.hpp"
#include "cen/error.hpp"
#include "cen/inference.hpp"
#include "cen/label_distribution.hpp"
#include "cen/losses.hpp"
#include "cen/metrics.hpp"
#include "cen/model.hpp"

namespace cen {

struct TrainConfig {
  std::size_t epochs = 160;
  std::size_t batch_size = 128;
  double learning_rate = 0.0025;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  double lr_decay_factor = 0.1;      // multiplier applied every interval
  std::size_t lr_decay_interval = 40; // epochs; 0 disables decay
  std::uint64_t shuffle_seed = 0;

  /// Step schedule: lr * factor^(epoch / interval).
  double learning_rate_at(std::size_t epoch) const {
    if (lr_decay_interval == 0)
      return learning_rate;
    return learning_rate *
           std::pow(lr_decay_factor, static_cast<double>(epoch / lr_decay_interval));
  }
};

struct RunConfig {
  LossConfig loss;
  Heads heads = Heads::coupled;
  double infer_tau = 1.0;
  std::vector<std::size_t> hidden{64, 64};
  std::uint64_t init_seed = 0;
  TrainConfig train;
  std::size_t generations = 4;
  bool warm_start = true;

  void validate() const {
    auto fail = [](const std::string &m) { throw ConfigError(m); };
    if (!(loss.tau > 0.0))
      fail("loss.tau must be positive");
    if (!(loss.ce_tau > 0.0))
      fail("loss.ce_tau must be positive");
    if (!(infer_tau > 0.0))
      fail("loss.infer_tau must be positive");
    if (!(loss.alpha >= 0.0 && loss.alpha <= 1.0))
      fail("loss.alpha must lie in [0, 1]");
    if (!(loss.lambda1 > 0.0) || !(loss.lambdat > 0.0))
      fail("loss.lambda1 and loss.lambdat must be positive");
    if (generations < 1)
      fail("evolution.generations must be at least 1");
    if (train.batch_size == 0)
      fail("train.batch_size must be positive");
    if (!(train.learning_rate >= 0.0))
      fail("train.lr must be non-negative");
    if (!(train.momentum >= 0.0 && train.momentum < 1.0))
      fail("train.momentum must lie in [0, 1)");
    if (!(train.weight_decay >= 0.0))
      fail("train.weight_decay must be non-negative");
    if (!(train.lr_decay_factor > 0.0))
      fail("train.lr_decay_factor must be positive");
    for (std::size_t h : hidden)
      if (h == 0)
        fail("model.hidden widths must be positive");
  }

  LossConfig loss_config() const {
    LossConfig c = loss;
    c.use_ldl = heads != Heads::reg;
    c.use_reg = heads != Heads::ldl;
    return c;
  }

  ModelShape model_shape(std::size_t input_dim, std::size_t k) const {
    return ModelShape{input_dim, hidden, k};
  }
};

/// Frozen per-sample ancestor outputs, aligned with the training set.
struct KnowledgeCache {
  std::size_t generation = 0;
  std::vector<LabelDistribution> distributions; // at the transfer temperature
  Vector deltas;                                // |s - y|

  std::size_t size() const noexcept { return deltas.size(); }
  std::size_t num_classes() const noexcept {
    return distributions.empty() ? 0 : distributions.front().size();
  }
  double mean_delta() const {
    if (deltas.empty())
      return 0.0;
    return std::accumulate(deltas.begin(), deltas.end(), 0.0) / static_cast<double>(deltas.size());
  }

  bool operator==(const KnowledgeCache &) const = default;
};

struct GenerationState {
  std::size_t t = 1;
  ModelParams model;
  KnowledgeCache cache;
  EvalReport eval;
  double train_loss = 0.0;
  double mean_slack = 0.0; // mean of cache.deltas
};

/// Pure inference over the training set: p = softmax(z / tau), delta = |s - y|.
inline KnowledgeCache cache_knowledge(const ModelParams &model, const Dataset &data, double tau,
                                      std::size_t generation = 0) {
  KnowledgeCache c;
  c.generation = generation;
  c.distributions.reserve(data.size());
  c.deltas.reserve(data.size());
  for (const auto &s : data.samples()) {
    const ForwardTrace t = forward(model, s.features);
    c.distributions.push_back(softmax_tempered(t.logits, tau));
    c.deltas.push_back(slack_term(t.regression, s.y));
  }
  return c;
}

namespace detail {

using SampleLossFn =
    std::function<LossBundle(std::size_t index, std::span<const double> z, double s)>;

inline LossBundle checked_sample_loss(const SampleLossFn &fn, std::size_t index,
                                      const ForwardTrace &trace) {
  if (!all_finite(trace.logits) || !std::isfinite(trace.regression))
    throw DivergenceError("non-finite network output for sample " + std::to_string(index));
  return fn(index, trace.logits, trace.regression);
}

/// Mean of the per-sample objective over the whole dataset.
inline double dataset_objective(const ModelParams &params, const Dataset &data,
                                const SampleLossFn &fn) {
  double sum = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i)
    sum += checked_sample_loss(fn, i, forward(params, data[i].features)).total;
  return sum / static_cast<double>(data.size());
}

/// Minibatch SGD with momentum over `cfg.epochs`; batch gradient is the mean
/// of per-sample gradients, accumulated in sample order.
inline ModelParams run_sgd(ModelParams params, const Dataset &data, const TrainConfig &cfg,
                           std::size_t generation, const SampleLossFn &fn) {
  OptimizerState opt =
      OptimizerState::for_model(params, cfg.learning_rate, cfg.momentum, cfg.weight_decay);
  std::seed_seq seq{static_cast<std::uint64_t>(cfg.shuffle_seed),
                    static_cast<std::uint64_t>(generation)};
  std::mt19937_64 rng(seq);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  ModelParams grads = zeros_like(params);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    opt.learning_rate = cfg.learning_rate_at(epoch);
    std::shuffle(order.begin(), order.end(), rng);
    std::size_t batch = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size, ++batch) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      const double inv = 1.0 / static_cast<double>(end - start);
      grads.for_each_block([](std::span<double> b, bool) { std::fill(b.begin(), b.end(), 0.0); });
      double batch_loss = 0.0;
      try {
        for (std::size_t j = start; j < end; ++j) {
          const std::size_t idx = order[j];
          ForwardTrace trace = forward(params, data[idx].features);
          LossBundle b = checked_sample_loss(fn, idx, trace);
          batch_loss += b.total;
          for (double &g : b.d_z)
            g *= inv;
          accumulate_backward(params, trace, b.d_z, b.d_s * inv, grads);
        }
        if (!std::isfinite(batch_loss))
          throw DivergenceError("non-finite batch loss");
        sgd_step(params, grads, opt);
      } catch (const DivergenceError &e) {
        throw DivergenceError(std::string(e.what()) + " (generation " +
                              std::to_string(generation) + ", epoch " + std::to_string(epoch) +
                              ", batch " + std::to_string(batch) + ")");
      }
    }
  }
  return params;
}

inline void require_model_fits(const ModelParams &model, const Dataset &data) {
  if (model.input_dim() != data.feature_dim() || model.num_classes() != data.range().k())
    throw ShapeError("model shape does not match dataset (features " +
                     std::to_string(data.feature_dim()) + ", ages " +
                     std::to_string(data.range().k()) + ")");
}

} // namespace detail

/// Ancestor objective over one sample.
inline detail::SampleLossFn ancestor_objective(const Dataset &train, const RunConfig &cfg) {
  const LossConfig lc = cfg.loss_config();
  return [&train, lc](std::size_t i, std::span<const double> z, double s) {
    const Sample &x = train[i];
    return ancestor_sample_loss(z, s, x.label, x.y, lc);
  };
}

/// Offspring objective over one sample, reading the ancestor cache.
inline detail::SampleLossFn offspring_objective(const Dataset &train, const RunConfig &cfg,
                                                const KnowledgeCache &cache) {
  const LossConfig lc = cfg.loss_config();
  return [&train, &cache, lc](std::size_t i, std::span<const double> z, double s) {
    const Sample &x = train[i];
    return offspring_sample_loss(z, s, x.label, x.y, cache.distributions[i], cache.deltas[i], lc);
  };
}

inline GenerationState finish_generation(std::size_t t, ModelParams model, const Dataset &train,
                                         const Dataset &test, const RunConfig &cfg,
                                         const detail::SampleLossFn &objective) {
  GenerationState g;
  g.t = t;
  g.train_loss = detail::dataset_objective(model, train, objective);
  g.cache = cache_knowledge(model, train, cfg.loss.tau, t);
  g.mean_slack = g.cache.mean_delta();
  g.eval = evaluate(model, test, cfg.infer_tau, cfg.heads);
  g.model = std::move(model);
  return g;
}

/// Initial weights of generation t when not inheriting the ancestor's.
inline ModelParams initial_model(const RunConfig &cfg, const Dataset &train, std::size_t t) {
  return init_model(cfg.model_shape(train.feature_dim(), train.range().k()),
                    cfg.init_seed + (t - 1));
}

inline GenerationState train_ancestor(const Dataset &train, const Dataset &test,
                                      const RunConfig &cfg) {
  cfg.validate();
  ModelParams model = initial_model(cfg, train, 1);
  const auto objective = ancestor_objective(train, cfg);
  model = detail::run_sgd(std::move(model), train, cfg.train, 1, objective);
  return finish_generation(1, std::move(model), train, test, cfg, objective);
}

inline GenerationState train_offspring(const Dataset &train, const Dataset &test,
                                       const RunConfig &cfg, const GenerationState &ancestor) {
  cfg.validate();
  if (ancestor.cache.size() != train.size() || ancestor.cache.num_classes() != train.range().k())
    throw ShapeError("knowledge cache (" + std::to_string(ancestor.cache.size()) + " x " +
                     std::to_string(ancestor.cache.num_classes()) +
                     ") is not aligned with the training set (" + std::to_string(train.size()) +
                     " x " + std::to_string(train.range().k()) + ")");
  const std::size_t t = ancestor.t + 1;
  ModelParams model = cfg.warm_start ? ancestor.model : initial_model(cfg, train, t);
  detail::require_model_fits(model, train);
  const auto objective = offspring_objective(train, cfg, ancestor.cache);
  model = detail::run_sgd(std::move(model), train, cfg.train, t, objective);
  return finish_generation(t, std::move(model), train, test, cfg, objective);
}

using GenerationObserver = std::function<void(const GenerationState &)>;

/// Runs generations up to cfg.generations. When `resume_from` is given the
/// chain continues after it (and the returned chain starts with it);
/// otherwise it starts with the ancestor.
inline std::vector<GenerationState> evolve(const Dataset &train, const Dataset &test,
                                           const RunConfig &cfg,
                                           const GenerationObserver &observer = {},
                                           std::optional<GenerationState> resume_from = {}) {
  cfg.validate();
  std::vector<GenerationState> chain;
  if (resume_from) {
    chain.push_back(std::move(*resume_from));
  } else {
    chain.push_back(train_ancestor(train, test, cfg));
    if (observer)
      observer(chain.back());
  }
  while (chain.back().t < cfg.generations) {
    chain.push_back(train_offspring(train, test, cfg, chain.back()));
    if (observer)
      observer(chain.back());
  }
  return chain;
}

} // namespace cen

#endif
