#ifndef CEN_METRICS_HPP
#define CEN_METRICS_HPP

#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>

#include "cen/error.hpp"

namespace cen {

namespace detail {
inline void check_lengths(std::size_t a, std::size_t b, const char *what) {
  if (a != b || a == 0)
    throw ShapeError(std::string(what) + ": need equal non-zero lengths, got " +
                     std::to_string(a) + " and " + std::to_string(b));
}
} // namespace detail

/// Mean absolute error in years.
inline double mae(std::span<const double> pred, std::span<const double> truth) {
  detail::check_lengths(pred.size(), truth.size(), "mae");
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i)
    sum += std::abs(pred[i] - truth[i]);
  return sum / static_cast<double>(pred.size());
}

/// Apparent-age error: mean of 1 - exp(-(x - mu)^2 / (2 sigma^2)).
inline double epsilon_error(std::span<const double> pred, std::span<const double> mu,
                            std::span<const double> sigma) {
  detail::check_lengths(pred.size(), mu.size(), "epsilon_error");
  detail::check_lengths(pred.size(), sigma.size(), "epsilon_error");
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (!(sigma[i] > 0.0))
      throw DomainError("epsilon_error: sigma must be positive (sample " + std::to_string(i) + ")");
    const double diff = pred[i] - mu[i];
    sum += 1.0 - std::exp(-(diff * diff) / (2.0 * sigma[i] * sigma[i]));
  }
  return sum / static_cast<double>(pred.size());
}

/// Cumulative accuracy: percentage of samples with |error| strictly below n.
inline double ca(std::span<const double> pred, std::span<const double> truth, double n) {
  detail::check_lengths(pred.size(), truth.size(), "ca");
  if (!(n > 0.0))
    throw DomainError("ca: n must be positive");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i)
    if (std::abs(pred[i] - truth[i]) < n)
      ++hits;
  return 100.0 * static_cast<double>(hits) / static_cast<double>(pred.size());
}

struct EvalReport {
  double mae = 0.0;       // of the headline prediction (fused unless single-head)
  double mae_ldl = 0.0;
  double mae_reg = 0.0;
  double mae_fused = 0.0;
  std::optional<double> epsilon_error;
  std::map<int, double> ca; // n -> percentage, n in {3, 5, 7}
  std::size_t n_samples = 0;
  std::size_t out_of_range_count = 0; // regression predictions outside [l1, lk]
};

} // namespace cen

#endif
