#ifndef CEN_NUMERICS_HPP
#define CEN_NUMERICS_HPP

// Dense vector/matrix primitives used by the two-headed network.
//
// Everything is double precision and row-major. Matrices carry their shape
// explicitly; all shape mismatches raise cen::ShapeError naming both shapes.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "cen/error.hpp"

namespace cen {

using Vector = std::vector<double>;

class Matrix {
public:
  Matrix() = default;

  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {
    if (rows == 0 || cols == 0)
      throw ShapeError("matrix dimensions must be positive, got " +
                       shape_string(rows, cols));
  }

  Matrix(std::size_t rows, std::size_t cols, Vector data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (rows == 0 || cols == 0)
      throw ShapeError("matrix dimensions must be positive, got " +
                       shape_string(rows, cols));
    if (data_.size() != rows * cols)
      throw ShapeError("matrix " + shape_string(rows, cols) + " given " +
                       std::to_string(data_.size()) + " values");
  }

  Matrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ ? rows.begin()->size() : 0;
    if (rows_ == 0 || cols_ == 0)
      throw ShapeError("matrix literal must be non-empty");
    data_.reserve(rows_ * cols_);
    for (const auto &r : rows) {
      if (r.size() != cols_)
        throw ShapeError("ragged matrix literal");
      data_.insert(data_.end(), r.begin(), r.end());
    }
  }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i)
      m(i, i) = 1.0;
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }

  double &operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  Vector &data() noexcept { return data_; }
  const Vector &data() const noexcept { return data_; }

  std::string shape() const { return shape_string(rows_, cols_); }

  bool operator==(const Matrix &) const = default;

  static std::string shape_string(std::size_t r, std::size_t c) {
    return "(" + std::to_string(r) + "x" + std::to_string(c) + ")";
  }

private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  Vector data_;
};

inline bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

/// W x + b, with W stored as (outputs x inputs).
inline Vector affine(const Matrix &w, std::span<const double> x,
                     std::span<const double> b) {
  if (w.cols() != x.size() || w.rows() != b.size())
    throw ShapeError("affine: W " + w.shape() + " cannot map x of length " +
                     std::to_string(x.size()) + " onto b of length " +
                     std::to_string(b.size()));
  Vector out(b.begin(), b.end());
  for (std::size_t r = 0; r < w.rows(); ++r) {
    const auto wr = w.row(r);
    double acc = 0.0;
    for (std::size_t c = 0; c < wr.size(); ++c)
      acc += wr[c] * x[c];
    out[r] += acc;
  }
  return out;
}

inline double relu(double x) noexcept { return x > 0.0 ? x : 0.0; }
inline double relu_grad(double x) noexcept { return x > 0.0 ? 1.0 : 0.0; }

/// exp(z_i / tau) / sum_j exp(z_j / tau), shifted by max(z) for overflow safety.
inline Vector softmax_probs(std::span<const double> z, double tau) {
  if (!(tau > 0.0) || !std::isfinite(tau))
    throw DomainError("softmax temperature must be positive, got " + std::to_string(tau));
  if (z.empty())
    throw ShapeError("softmax of an empty vector");
  if (!all_finite(z))
    throw DomainError("softmax input contains non-finite logits");
  const double zmax = *std::max_element(z.begin(), z.end());
  Vector p(z.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    p[i] = std::exp((z[i] - zmax) / tau);
    sum += p[i];
  }
  for (double &v : p)
    v /= sum;
  return p;
}

/// Central-difference gradient of a scalar function. Test oracle only.
inline Vector finite_diff_grad(const std::function<double(std::span<const double>)> &loss,
                               std::span<const double> params, double eps) {
  if (!(eps >= 1e-7 && eps <= 1e-3))
    throw DomainError("finite difference step must lie in [1e-7, 1e-3], got " +
                      std::to_string(eps));
  Vector theta(params.begin(), params.end());
  Vector grad(theta.size());
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double saved = theta[i];
    theta[i] = saved + eps;
    const double up = loss(theta);
    theta[i] = saved - eps;
    const double down = loss(theta);
    theta[i] = saved;
    if (!std::isfinite(up) || !std::isfinite(down))
      throw DomainError("non-finite loss while perturbing coordinate " + std::to_string(i));
    grad[i] = (up - down) / (2.0 * eps);
  }
  return grad;
}

} // namespace cen

#endif
