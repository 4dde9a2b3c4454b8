#ifndef CEN_LABEL_DISTRIBUTION_HPP
#define CEN_LABEL_DISTRIBUTION_HPP

#include <cmath>
#include <cstddef>
#include <span>
#include <string>

#include "cen/error.hpp"
#include "cen/numerics.hpp"

namespace cen {

/// A probability vector over the k discrete ages of an AgeRange.
class LabelDistribution {
public:
  static constexpr double kSumTolerance = 1e-9;

  LabelDistribution() = default;

  explicit LabelDistribution(Vector probs) : probs_(std::move(probs)) {
    if (probs_.empty())
      throw ShapeError("label distribution must have at least one entry");
    double sum = 0.0;
    for (double p : probs_) {
      if (!(p >= 0.0) || !std::isfinite(p))
        throw DomainError("label distribution entries must be finite and non-negative");
      sum += p;
    }
    if (std::abs(sum - 1.0) > kSumTolerance)
      throw DomainError("label distribution sums to " + std::to_string(sum));
  }

  static LabelDistribution uniform(std::size_t k) {
    return LabelDistribution(Vector(k, 1.0 / static_cast<double>(k)));
  }

  static LabelDistribution one_hot(std::size_t k, std::size_t index) {
    if (index >= k)
      throw DomainError("one-hot index " + std::to_string(index) + " outside k = " +
                        std::to_string(k));
    Vector v(k, 0.0);
    v[index] = 1.0;
    return LabelDistribution(std::move(v));
  }

  std::size_t size() const noexcept { return probs_.size(); }
  double operator[](std::size_t i) const { return probs_[i]; }
  std::span<const double> probs() const noexcept { return probs_; }

  bool operator==(const LabelDistribution &) const = default;

private:
  Vector probs_;
};

/// Softmax of z / tau.
inline LabelDistribution softmax_tempered(std::span<const double> z, double tau) {
  return LabelDistribution(softmax_probs(z, tau));
}

} // namespace cen

#endif
