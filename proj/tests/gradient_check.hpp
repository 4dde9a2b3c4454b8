#ifndef CEN_TESTS_GRADIENT_CHECK_HPP
#define CEN_TESTS_GRADIENT_CHECK_HPP

// Compares the library's analytic batch gradient (forward, per-sample loss
// bundle, backward) with central differences of the oracle loss on a small
// random model. Samples are redrawn until every ReLU pre-activation, every
// |s - y| and every hinge margin |s - y| - delta is at least kKinkMargin away
// from zero.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "cen/label_distribution.hpp"
#include "cen/losses.hpp"
#include "cen/model.hpp"
#include "cen/numerics.hpp"
#include "oracles.hpp"

namespace cen::testing {

inline constexpr double kKinkMargin = 1e-3;

enum class Objective { ancestor, offspring };

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t checked = 0; // coordinates with |g| > 1e-6
  std::size_t params = 0;
};

struct GradCheckSample {
  Vector x;
  std::size_t hot = 0;
  double y = 0.0;
  Vector p_prev;
  double delta = 0.0;
};

inline GradCheckResult gradient_check(std::uint64_t seed, Objective objective,
                                      std::size_t batch = 4) {
  const ModelShape shape{3, {4}, 4};
  const oracle::Net net{3, {4}, 4};
  ModelParams model = init_model(shape, seed);
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> cls(0, shape.num_classes - 1);
  // Larger regression weights keep |s - y| well away from zero.
  for (double &w : model.head_reg.weights.data())
    w *= 3.0;

  const double tau = 2.0, alpha = 0.5, lambda = 4.0;
  const Vector theta = flatten(model);

  std::vector<GradCheckSample> samples;
  while (samples.size() < batch) {
    GradCheckSample s;
    s.x = {normal(rng), normal(rng), normal(rng)};
    s.hot = cls(rng);
    s.y = unit(rng);
    Vector logits(shape.num_classes);
    for (double &v : logits)
      v = normal(rng);
    s.p_prev = oracle::softmax(logits, tau);
    const auto out = oracle::forward(net, theta, s.x);
    const double err = std::abs(out.s - s.y);
    s.delta = std::max(0.0, err + 0.2 * (unit(rng) - 0.5));
    const bool near_relu = std::any_of(out.preacts.begin(), out.preacts.end(),
                                       [](double a) { return std::abs(a) < kKinkMargin; });
    if (near_relu || err < kKinkMargin || std::abs(err - s.delta) < kKinkMargin)
      continue;
    samples.push_back(std::move(s));
  }

  LossConfig cfg;
  cfg.tau = tau;
  cfg.alpha = alpha;
  cfg.lambda1 = lambda;
  cfg.lambdat = lambda;

  // Analytic side: library forward + loss bundle + backward, batch mean.
  ModelParams grads = zeros_like(model);
  const double inv = 1.0 / static_cast<double>(samples.size());
  for (const auto &s : samples) {
    ForwardTrace t = forward(model, s.x);
    LossBundle b = objective == Objective::ancestor
                       ? ancestor_sample_loss(t.logits, t.regression, s.hot, s.y, cfg)
                       : offspring_sample_loss(t.logits, t.regression, s.hot, s.y,
                                               LabelDistribution(s.p_prev), s.delta, cfg);
    for (double &g : b.d_z)
      g *= inv;
    accumulate_backward(model, t, b.d_z, b.d_s * inv, grads);
  }
  const Vector analytic = flatten(grads);

  // Numeric side: oracle forward + oracle loss.
  auto loss = [&](std::span<const double> th) {
    double sum = 0.0;
    for (const auto &s : samples) {
      const auto out = oracle::forward(net, th, s.x);
      sum += objective == Objective::ancestor
                 ? oracle::ancestor_loss(out.z, out.s, s.hot, s.y, lambda)
                 : oracle::offspring_loss(out.z, out.s, s.hot, s.y, s.p_prev, s.delta, tau,
                                          alpha, lambda);
    }
    return sum / static_cast<double>(samples.size());
  };
  const Vector numeric = finite_diff_grad(loss, theta, 1e-5);

  GradCheckResult r;
  r.params = theta.size();
  for (std::size_t i = 0; i < theta.size(); ++i) {
    if (std::max(std::abs(analytic[i]), std::abs(numeric[i])) <= 1e-6)
      continue;
    ++r.checked;
    r.max_rel_error = std::max(r.max_rel_error, oracle::relative_error(analytic[i], numeric[i]));
  }
  return r;
}

} // namespace cen::testing

#endif
