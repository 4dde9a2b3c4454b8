#ifndef CEN_INFERENCE_HPP
#define CEN_INFERENCE_HPP

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "cen/data.hpp"
#include "cen/error.hpp"
#include "cen/label_distribution.hpp"
#include "cen/metrics.hpp"
#include "cen/model.hpp"

namespace cen {

/// Which heads are trained and which estimate is reported.
enum class Heads { coupled, ldl, reg };

inline std::string to_string(Heads h) {
  switch (h) {
  case Heads::coupled:
    return "coupled";
  case Heads::ldl:
    return "ldl";
  case Heads::reg:
    return "reg";
  }
  return "coupled";
}

inline Heads heads_from_string(const std::string &s) {
  if (s == "coupled")
    return Heads::coupled;
  if (s == "ldl")
    return Heads::ldl;
  if (s == "reg")
    return Heads::reg;
  throw ConfigError("unknown heads mode '" + s + "' (expected coupled, ldl or reg)");
}

struct Prediction {
  double y_ldl = 0.0;
  double y_reg = 0.0;
  double y_fused = 0.0;
  LabelDistribution distribution;

  double headline(Heads h) const {
    switch (h) {
    case Heads::ldl:
      return y_ldl;
    case Heads::reg:
      return y_reg;
    case Heads::coupled:
      break;
    }
    return y_fused;
  }
};

/// Expected age sum_i p_i (l1 + i).
inline double predict_ldl(const LabelDistribution &p, const AgeRange &range) {
  if (p.size() != range.k())
    throw ShapeError("predict_ldl: distribution has " + std::to_string(p.size()) +
                     " entries, age range has " + std::to_string(range.k()));
  double sum = 0.0, mass = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    sum += p[i] * static_cast<double>(range.age_at(i));
    mass += p[i];
  }
  if (std::abs(mass - 1.0) > 1e-6)
    throw DomainError("predict_ldl: distribution is not normalized");
  return sum;
}

/// (lk - l1) s + l1, deliberately not clamped.
inline double predict_reg(double s, const AgeRange &range) {
  return static_cast<double>(range.lk() - range.l1()) * s + static_cast<double>(range.l1());
}

inline Prediction fuse(LabelDistribution p, double s, const AgeRange &range) {
  Prediction out;
  out.y_ldl = predict_ldl(p, range);
  out.y_reg = predict_reg(s, range);
  out.y_fused = (out.y_ldl + out.y_reg) / 2.0;
  out.distribution = std::move(p);
  return out;
}

inline Prediction predict(const ModelParams &model, std::span<const double> x,
                          const AgeRange &range, double tau = 1.0) {
  const ForwardTrace t = forward(model, x);
  return fuse(softmax_tempered(t.logits, tau), t.regression, range);
}

inline std::vector<Prediction> predict_all(const ModelParams &model, const Dataset &data,
                                           double tau = 1.0) {
  std::vector<Prediction> out;
  out.reserve(data.size());
  for (const auto &s : data.samples())
    out.push_back(predict(model, s.features, data.range(), tau));
  return out;
}

/// Metrics over a prediction set. CA is computed at n = 3, 5, 7 years.
inline EvalReport evaluate_predictions(const std::vector<Prediction> &preds, const Dataset &data,
                                       Heads heads) {
  if (preds.size() != data.size())
    throw ShapeError("evaluate: prediction count does not match dataset size");
  std::vector<double> truth, ldl, reg, fused, headline;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    truth.push_back(data[i].age);
    ldl.push_back(preds[i].y_ldl);
    reg.push_back(preds[i].y_reg);
    fused.push_back(preds[i].y_fused);
    headline.push_back(preds[i].headline(heads));
  }
  EvalReport r;
  r.n_samples = preds.size();
  r.mae_ldl = mae(ldl, truth);
  r.mae_reg = mae(reg, truth);
  r.mae_fused = mae(fused, truth);
  r.mae = mae(headline, truth);
  for (int n : {3, 5, 7})
    r.ca[n] = ca(headline, truth, n);
  if (data.has_apparent_age()) {
    std::vector<double> mu, sigma;
    for (const auto &s : data.samples()) {
      mu.push_back(s.apparent_mu);
      sigma.push_back(s.apparent_sigma);
    }
    r.epsilon_error = epsilon_error(headline, mu, sigma);
  }
  for (double v : reg)
    if (v < data.range().l1() || v > data.range().lk())
      ++r.out_of_range_count;
  return r;
}

inline EvalReport evaluate(const ModelParams &model, const Dataset &data, double tau,
                           Heads heads) {
  return evaluate_predictions(predict_all(model, data, tau), data, heads);
}

} // namespace cen

#endif
