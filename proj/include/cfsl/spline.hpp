#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <vector>

#include "cfsl/errors.hpp"

namespace cfsl {

/// Interpolating cubic spline on strictly increasing, possibly non-uniform knots.
/// Uses not-a-knot end conditions (fourth-order accurate up to the boundary);
/// falls back to natural ends below four knots.
class CubicSpline {
 public:
  CubicSpline() = default;

  CubicSpline(std::vector<double> knots, std::vector<double> values)
      : x_(std::move(knots)), y_(std::move(values)) {
    const std::size_t n = x_.size();
    if (n < 2 || y_.size() != n) throw usage_error("spline needs at least two knots and matching values");
    for (std::size_t i = 1; i < n; ++i)
      if (!(x_[i] > x_[i - 1])) throw usage_error("spline knots must be strictly increasing");
    m_.assign(n, 0.0);
    if (n == 2) return;

    std::vector<double> h(n - 1), d(n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i) {
      h[i] = x_[i + 1] - x_[i];
      d[i] = (y_[i + 1] - y_[i]) / h[i];
    }

    // Tridiagonal system for the interior second derivatives m_1 .. m_{n-2}.
    const std::size_t k = n - 2;
    std::vector<double> sub(k, 0.0), diag(k, 0.0), sup(k, 0.0), rhs(k, 0.0);
    for (std::size_t j = 0; j < k; ++j) {
      const std::size_t i = j + 1;
      sub[j] = h[i - 1];
      diag[j] = 2.0 * (h[i - 1] + h[i]);
      sup[j] = h[i];
      rhs[j] = 6.0 * (d[i] - d[i - 1]);
    }
    const bool not_a_knot = n >= 4;
    if (not_a_knot) {
      // m_0 = ((h0+h1) m_1 - h0 m_2) / h1, eliminated into the first row.
      diag[0] += h[0] * (h[0] + h[1]) / h[1];
      sup[0] -= h[0] * h[0] / h[1];
      const std::size_t a = n - 3, b = n - 2;  // last two intervals: h[a], h[b]
      diag[k - 1] += h[b] * (h[a] + h[b]) / h[a];
      sub[k - 1] -= h[b] * h[b] / h[a];
    }
    // Thomas algorithm.
    for (std::size_t j = 1; j < k; ++j) {
      const double w = sub[j] / diag[j - 1];
      diag[j] -= w * sup[j - 1];
      rhs[j] -= w * rhs[j - 1];
    }
    std::vector<double> sol(k);
    sol[k - 1] = rhs[k - 1] / diag[k - 1];
    for (std::size_t j = k - 1; j-- > 0;) sol[j] = (rhs[j] - sup[j] * sol[j + 1]) / diag[j];
    std::copy(sol.begin(), sol.end(), m_.begin() + 1);
    if (not_a_knot) {
      m_[0] = ((h[0] + h[1]) * m_[1] - h[0] * m_[2]) / h[1];
      const std::size_t a = n - 3, b = n - 2;
      m_[n - 1] = ((h[a] + h[b]) * m_[n - 2] - h[b] * m_[n - 3]) / h[a];
    }
  }

  double operator()(double x) const {
    const std::size_t i = segment(x);
    const double h = x_[i + 1] - x_[i];
    const double a = (x_[i + 1] - x) / h;
    const double b = (x - x_[i]) / h;
    return a * y_[i] + b * y_[i + 1] +
           ((a * a * a - a) * m_[i] + (b * b * b - b) * m_[i + 1]) * h * h / 6.0;
  }

  double derivative(double x) const {
    const std::size_t i = segment(x);
    const double h = x_[i + 1] - x_[i];
    const double a = (x_[i + 1] - x) / h;
    const double b = (x - x_[i]) / h;
    return (y_[i + 1] - y_[i]) / h + ((1.0 - 3.0 * a * a) * m_[i] + (3.0 * b * b - 1.0) * m_[i + 1]) * h / 6.0;
  }

  std::span<const double> knots() const noexcept { return x_; }
  std::span<const double> values() const noexcept { return y_; }

 private:
  std::size_t segment(double x) const {
    auto it = std::upper_bound(x_.begin(), x_.end(), x);
    std::size_t i = it == x_.begin() ? 0 : static_cast<std::size_t>(it - x_.begin()) - 1;
    return std::min(i, x_.size() - 2);
  }

  std::vector<double> x_, y_, m_;
};

}  // namespace cfsl
