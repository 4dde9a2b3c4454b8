#ifndef CEN_LOSSES_HPP
#define CEN_LOSSES_HPP

// Per-sample losses with analytic gradients w.r.t. the logits z and the
// regression output s. Batch reduction (arithmetic mean) happens in the
// caller; see mean_bundle().

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>

#include "cen/error.hpp"
#include "cen/label_distribution.hpp"
#include "cen/numerics.hpp"

namespace cen {

/// Value of one loss term plus its gradient with respect to z and s.
/// d_z is empty for terms that do not touch the logits.
struct LossTerm {
  double value = 0.0;
  Vector d_z;
  double d_s = 0.0;
  bool collapsed = false; // cross entropy hit p = 0 at the true class
};

struct LossParts {
  double ce = 0.0;
  double kl = 0.0;
  double ldl = 0.0;
  double l1 = 0.0;
  double slack_l1 = 0.0;
};

struct LossBundle {
  double total = 0.0;
  LossParts parts;
  Vector d_z;
  double d_s = 0.0;
};

inline constexpr double kLogFloor = 1e-300;

/// -ln p[hot]; gradient w.r.t. logits at temperature tau is (p - o) / tau.
/// `p` must be softmax(z / tau).
inline LossTerm cross_entropy(const LabelDistribution &p, std::size_t hot, double tau) {
  if (hot >= p.size())
    throw DomainError("cross_entropy: true class " + std::to_string(hot) + " outside k = " +
                      std::to_string(p.size()));
  if (!(tau > 0.0))
    throw DomainError("cross_entropy: temperature must be positive");
  LossTerm t;
  const double ph = p[hot];
  t.collapsed = !(ph >= kLogFloor);
  t.value = -std::log(t.collapsed ? kLogFloor : ph);
  t.d_z.assign(p.probs().begin(), p.probs().end());
  t.d_z[hot] -= 1.0;
  for (double &g : t.d_z)
    g /= tau;
  return t;
}

/// -sum_i p_prev[i] ln p_cur[i]; the ancestor entropy is dropped, so the value
/// is KL(p_prev || p_cur) + H(p_prev). p_prev is a constant. Gradient w.r.t.
/// the current logits at temperature tau is (p_cur - p_prev) / tau.
inline LossTerm kl_transfer(const LabelDistribution &p_prev, const LabelDistribution &p_cur,
                            double tau) {
  if (p_prev.size() != p_cur.size())
    throw ShapeError("kl_transfer: ancestor distribution has " + std::to_string(p_prev.size()) +
                     " entries, current has " + std::to_string(p_cur.size()));
  if (!(tau > 0.0))
    throw DomainError("kl_transfer: temperature must be positive");
  LossTerm t;
  t.d_z.resize(p_cur.size());
  for (std::size_t i = 0; i < p_cur.size(); ++i) {
    if (p_prev[i] > 0.0)
      t.value -= p_prev[i] * std::log(std::max(p_cur[i], kLogFloor));
    t.d_z[i] = (p_cur[i] - p_prev[i]) / tau;
  }
  return t;
}

/// alpha * kl + (1 - alpha) * ce
inline double ldl_loss(double alpha, double kl, double ce) {
  if (!(alpha >= 0.0 && alpha <= 1.0))
    throw DomainError("ldl_loss: alpha must lie in [0, 1], got " + std::to_string(alpha));
  return alpha * kl + (1.0 - alpha) * ce;
}

namespace detail {
inline double sign(double v) noexcept { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }
} // namespace detail

/// |s - y|, subgradient sign(s - y) with sign(0) = 0.
inline LossTerm l1_loss(double s, double y) {
  if (!std::isfinite(s) || !std::isfinite(y))
    throw DomainError("l1_loss: non-finite input");
  LossTerm t;
  t.value = std::abs(s - y);
  t.d_s = detail::sign(s - y);
  return t;
}

/// Ancestor's absolute regression error, frozen for the next generation.
inline double slack_term(double s_prev, double y) { return std::abs(s_prev - y); }

/// max(0, |s - y| - delta): zero on [y - delta, y + delta].
inline LossTerm slack_l1(double s, double y, double delta) {
  if (!(delta >= 0.0))
    throw DomainError("slack_l1: slack must be non-negative, got " + std::to_string(delta));
  if (!std::isfinite(s) || !std::isfinite(y))
    throw DomainError("slack_l1: non-finite input");
  LossTerm t;
  // Interval test on the rounded bounds, so both endpoints give exactly 0.
  if (s >= y - delta && s <= y + delta)
    return t;
  const double excess = std::abs(s - y) - delta;
  if (excess > 0.0) {
    t.value = excess;
    t.d_s = detail::sign(s - y);
  }
  return t;
}

/// ce + lambda1 * l1.
inline LossBundle total_ancestor(const LossTerm &ce, const LossTerm &l1, double lambda1) {
  if (!(lambda1 >= 0.0))
    throw DomainError("total_ancestor: lambda1 must be non-negative");
  LossBundle b;
  b.parts.ce = ce.value;
  b.parts.ldl = ce.value;
  b.parts.l1 = l1.value;
  b.total = ce.value + lambda1 * l1.value;
  b.d_z = ce.d_z;
  b.d_s = lambda1 * l1.d_s;
  if (!std::isfinite(b.total))
    throw DivergenceError("total_ancestor: non-finite loss");
  return b;
}

/// ldl + lambdat * slack_l1, where ldl = alpha * kl + (1 - alpha) * ce.
/// When `kl_scale` != 1 only the KL gradient is rescaled (tau^2 ablation).
inline LossBundle total_evolution(const LossTerm &kl, const LossTerm &ce, const LossTerm &slack,
                                  double alpha, double lambdat, double kl_scale = 1.0) {
  if (!(lambdat >= 0.0))
    throw DomainError("total_evolution: lambdat must be non-negative");
  if (kl.d_z.size() != ce.d_z.size())
    throw ShapeError("total_evolution: KL and CE gradients differ in length");
  LossBundle b;
  b.parts.kl = kl.value;
  b.parts.ce = ce.value;
  b.parts.ldl = ldl_loss(alpha, kl.value, ce.value);
  b.parts.slack_l1 = slack.value;
  b.total = b.parts.ldl + lambdat * slack.value;
  b.d_z.resize(ce.d_z.size());
  for (std::size_t i = 0; i < b.d_z.size(); ++i)
    b.d_z[i] = alpha * kl_scale * kl.d_z[i] + (1.0 - alpha) * ce.d_z[i];
  b.d_s = lambdat * slack.d_s;
  if (!std::isfinite(b.total))
    throw DivergenceError("total_evolution: non-finite loss");
  return b;
}

/// Knobs shared by the per-sample objectives.
struct LossConfig {
  double tau = 2.0;     // transfer temperature for the KL term
  double alpha = 0.5;   // KL vs CE blend
  double lambda1 = 4.0; // ancestor regression weight
  double lambdat = 4.0; // offspring slack weight
  double ce_tau = 1.0;  // temperature of the CE term
  bool kl_tau_square_rescale = false;
  bool use_ldl = true;  // distribution head trained
  bool use_reg = true;  // regression head trained
};

/// Ancestor objective for one sample from its logits and regression output.
inline LossBundle ancestor_sample_loss(std::span<const double> z, double s, std::size_t hot,
                                       double y, const LossConfig &cfg) {
  LossTerm ce;
  if (cfg.use_ldl) {
    ce = cross_entropy(softmax_tempered(z, cfg.ce_tau), hot, cfg.ce_tau);
  } else {
    ce.d_z.assign(z.size(), 0.0);
  }
  const LossTerm l1 = cfg.use_reg ? l1_loss(s, y) : LossTerm{};
  return total_ancestor(ce, l1, cfg.lambda1);
}

/// Offspring objective for one sample given the frozen ancestor knowledge.
inline LossBundle offspring_sample_loss(std::span<const double> z, double s, std::size_t hot,
                                        double y, const LabelDistribution &p_prev,
                                        double delta_prev, const LossConfig &cfg) {
  LossTerm kl, ce;
  if (cfg.use_ldl) {
    kl = kl_transfer(p_prev, softmax_tempered(z, cfg.tau), cfg.tau);
    ce = cross_entropy(softmax_tempered(z, cfg.ce_tau), hot, cfg.ce_tau);
  } else {
    kl.d_z.assign(z.size(), 0.0);
    ce.d_z.assign(z.size(), 0.0);
  }
  LossTerm slack;
  double l1_value = 0.0;
  if (cfg.use_reg) {
    slack = slack_l1(s, y, delta_prev);
    l1_value = std::abs(s - y);
  }
  const double kl_scale = cfg.kl_tau_square_rescale ? cfg.tau * cfg.tau : 1.0;
  LossBundle b = total_evolution(kl, ce, slack, cfg.alpha, cfg.lambdat, kl_scale);
  b.parts.l1 = l1_value;
  return b;
}

/// Arithmetic mean of per-sample bundles (gradients included).
inline LossBundle mean_bundle(std::span<const LossBundle> samples) {
  if (samples.empty())
    throw DomainError("mean_bundle: empty batch");
  LossBundle m;
  m.d_z.assign(samples.front().d_z.size(), 0.0);
  for (const auto &b : samples) {
    m.total += b.total;
    m.parts.ce += b.parts.ce;
    m.parts.kl += b.parts.kl;
    m.parts.ldl += b.parts.ldl;
    m.parts.l1 += b.parts.l1;
    m.parts.slack_l1 += b.parts.slack_l1;
    m.d_s += b.d_s;
    for (std::size_t i = 0; i < m.d_z.size(); ++i)
      m.d_z[i] += b.d_z[i];
  }
  const double n = static_cast<double>(samples.size());
  m.total /= n;
  m.parts.ce /= n;
  m.parts.kl /= n;
  m.parts.ldl /= n;
  m.parts.l1 /= n;
  m.parts.slack_l1 /= n;
  m.d_s /= n;
  for (double &g : m.d_z)
    g /= n;
  return m;
}

} // namespace cen

#endif
