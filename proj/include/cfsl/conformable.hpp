#pragma once

// Conformable fractional calculus primitives.
//
// The conformable derivative of a differentiable f is D^a f(x) = x^(1-a) f'(x),
// and the conformable integral is I_a f(x) = int_0^x t^(a-1) f(t) dt. Under the
// change of variable t = x^a / a the derivative D^a becomes d/dt and the
// integral becomes a plain integral in t; everything downstream works in t.

#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <limits>
#include <memory>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>

#include "cfsl/errors.hpp"
#include "cfsl/spline.hpp"

namespace cfsl {

inline constexpr double pi = std::numbers::pi;

/// Order of the conformable derivative, 0 < alpha <= 1.
class Order {
 public:
  explicit Order(double alpha) : alpha_(alpha) {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw domain_error("alpha out of (0,1]");
  }

  double value() const noexcept { return alpha_; }

  /// Length of [0, pi] in t-coordinates: pi^alpha / alpha.
  double t_end() const noexcept { return std::pow(pi, alpha_) / alpha_; }

  friend bool operator==(Order, Order) = default;

 private:
  double alpha_;
};

/// t = x^alpha / alpha.
inline double to_t(double x, Order order) {
  if (!(x >= 0.0)) throw domain_error("to_t: negative x");
  const double a = order.value();
  return a == 1.0 ? x : std::pow(x, a) / a;
}

/// x = (alpha t)^(1/alpha).
inline double to_x(double t, Order order) {
  if (!(t >= 0.0)) throw domain_error("to_x: negative t");
  const double a = order.value();
  return a == 1.0 ? t : std::pow(a * t, 1.0 / a);
}

enum class Coordinate { x, t };

/// A real function on [a, b], either a callable or uniform-grid samples
/// (interpolated by a cubic spline).
class SampledFunction {
 public:
  static SampledFunction from_callable(std::function<double(double)> f, double a, double b,
                                       Coordinate c = Coordinate::x) {
    check_domain(a, b);
    SampledFunction s(a, b, c);
    s.f_ = std::move(f);
    return s;
  }

  static SampledFunction from_samples(std::vector<double> values, double a, double b,
                                      Coordinate c = Coordinate::x) {
    check_domain(a, b);
    if (values.size() < 2) throw usage_error("sampled function needs at least two samples");
    SampledFunction s(a, b, c);
    const std::size_t n = values.size();
    std::vector<double> knots(n);
    for (std::size_t i = 0; i < n; ++i) knots[i] = a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1);
    knots.back() = b;
    auto spline = std::make_shared<const CubicSpline>(std::move(knots), std::move(values));
    s.step_ = (b - a) / static_cast<double>(n - 1);
    s.spline_ = spline;
    s.f_ = [spline](double x) { return (*spline)(x); };
    return s;
  }

  double operator()(double s) const { return f_(s); }

  double lower() const noexcept { return a_; }
  double upper() const noexcept { return b_; }
  Coordinate coordinate() const noexcept { return coord_; }
  bool sampled() const noexcept { return spline_ != nullptr; }
  /// Grid step for sampled functions, 0 for callables.
  double step() const noexcept { return step_; }
  std::span<const double> samples() const {
    return spline_ ? spline_->values() : std::span<const double>{};
  }

 private:
  SampledFunction(double a, double b, Coordinate c) : a_(a), b_(b), coord_(c) {}

  static void check_domain(double a, double b) {
    if (!(a >= 0.0 && b > a)) throw domain_error("sampled function domain must satisfy 0 <= a < b");
  }

  double a_ = 0.0, b_ = 0.0;
  Coordinate coord_ = Coordinate::x;
  double step_ = 0.0;
  std::shared_ptr<const CubicSpline> spline_;
  std::function<double(double)> f_;
};

namespace detail {

/// Fourth-order finite-difference derivative on [lo, hi]; one-sided near the ends.
template <typename F>
double fd_derivative(const F& f, double x, double h, double lo, double hi) {
  if (x - 2.0 * h >= lo && x + 2.0 * h <= hi)
    return (8.0 * (f(x + h) - f(x - h)) - (f(x + 2 * h) - f(x - 2 * h))) / (12.0 * h);
  if (x + 4.0 * h <= hi)
    return (-25.0 * f(x) + 48.0 * f(x + h) - 36.0 * f(x + 2 * h) + 16.0 * f(x + 3 * h) - 3.0 * f(x + 4 * h)) /
           (12.0 * h);
  if (x - 4.0 * h >= lo)
    return (25.0 * f(x) - 48.0 * f(x - h) + 36.0 * f(x - 2 * h) - 16.0 * f(x - 3 * h) + 3.0 * f(x - 4 * h)) /
           (12.0 * h);
  throw domain_error("finite-difference stencil does not fit inside the domain");
}

inline constexpr double fd_step = 1e-3;
inline constexpr double zero_offset = 1e-8;

}  // namespace detail

/// D^alpha f(x) = x^(1-alpha) f'(x), evaluated at the offset 1e-8 when x = 0.
inline double conformable_derivative(const SampledFunction& f, double x, Order order) {
  if (x < f.lower() || x > f.upper()) throw domain_error("conformable_derivative: x outside domain");
  const double xe = x == 0.0 ? detail::zero_offset : x;
  const double h = f.sampled() ? f.step() : detail::fd_step * std::max(1.0, std::abs(xe));
  const double fp = detail::fd_derivative(f, xe, h, f.lower(), f.upper());
  const double r = order.value() == 1.0 ? fp : std::pow(xe, 1.0 - order.value()) * fp;
  if (!std::isfinite(r)) throw numeric_error("conformable_derivative: non-finite result");
  return r;
}

/// Conformable derivative of an unrestricted callable on (0, inf).
template <typename F>
  requires std::invocable<const F&, double>
double conformable_derivative(const F& f, double x, Order order) {
  if (x < 0.0) throw domain_error("conformable_derivative: x < 0");
  const double xe = x == 0.0 ? detail::zero_offset : x;
  // Near 0 the step shrinks with x so the central stencil stays inside (0, inf).
  const double h = std::min(detail::fd_step * std::max(1.0, xe), xe / 32.0);
  const double fp = detail::fd_derivative(f, xe, h, 0.0, std::numeric_limits<double>::infinity());
  const double r = order.value() == 1.0 ? fp : std::pow(xe, 1.0 - order.value()) * fp;
  if (!std::isfinite(r)) throw numeric_error("conformable_derivative: non-finite result");
  return r;
}

/// Composite 32-point Gauss-Legendre rule for int_a^b g(s) ds on `panels` equal panels.
template <typename G>
double integrate_panels(const G& g, double a, double b, std::size_t panels) {
  using rule = boost::math::quadrature::gauss<double, 32>;
  if (panels == 0) panels = 1;
  const double w = (b - a) / static_cast<double>(panels);
  double sum = 0.0;
  for (std::size_t i = 0; i < panels; ++i) {
    const double lo = a + w * static_cast<double>(i);
    const double hi = i + 1 == panels ? b : lo + w;
    sum += rule::integrate(g, lo, hi);
  }
  return sum;
}

/// Nodes and weights of the composite 32-point Gauss-Legendre rule on [a, b].
struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;

  template <typename G>
  double operator()(const G& g) const {
    double s = 0.0;
    for (std::size_t i = 0; i < nodes.size(); ++i) s += weights[i] * g(nodes[i]);
    return s;
  }
};

inline QuadratureRule gauss_rule(double a, double b, std::size_t panels) {
  using rule = boost::math::quadrature::gauss<double, 32>;
  if (panels == 0) panels = 1;
  QuadratureRule q;
  const double w = (b - a) / static_cast<double>(panels);
  const auto& xs = rule::abscissa();
  const auto& ws = rule::weights();
  for (std::size_t i = 0; i < panels; ++i) {
    const double lo = a + w * static_cast<double>(i);
    const double hi = i + 1 == panels ? b : lo + w;
    const double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
    for (std::size_t j = 0; j < xs.size(); ++j) {
      if (xs[j] == 0.0) {
        q.nodes.push_back(mid);
        q.weights.push_back(half * ws[j]);
        continue;
      }
      for (double sgn : {-1.0, 1.0}) {
        q.nodes.push_back(mid + sgn * half * xs[j]);
        q.weights.push_back(half * ws[j]);
      }
    }
  }
  return q;
}

/// Joins two rules (e.g. over adjacent intervals).
inline QuadratureRule operator+(QuadratureRule a, const QuadratureRule& b) {
  a.nodes.insert(a.nodes.end(), b.nodes.begin(), b.nodes.end());
  a.weights.insert(a.weights.end(), b.weights.begin(), b.weights.end());
  return a;
}

/// I_alpha f(b) = int_0^b t^(alpha-1) f(t) dt, computed as int_0^{b^a/a} f(x(s)) ds.
template <typename F>
  requires std::invocable<const F&, double>
double conformable_integral(const F& f, double b, Order order, std::size_t panels = 16) {
  if (b < 0.0) throw domain_error("conformable_integral: b < 0");
  if (b == 0.0) return 0.0;
  auto g = [&](double s) { return f(to_x(s, order)); };
  const double S = to_t(b, order);
  double r = 0.0;
  if (order.value() == 1.0) {
    r = integrate_panels(g, 0.0, S, panels);
  } else {
    // x(s) ~ s^(1/alpha) is not smooth at 0: uniform panels on [S/16, S], halving panels below.
    double lo = S / 16.0;
    r = integrate_panels(g, lo, S, panels);
    for (int j = 0; j < 48; ++j, lo *= 0.5) r += integrate_panels(g, 0.5 * lo, lo, 1);
    r += integrate_panels(g, 0.0, lo, 1);
  }
  if (!std::isfinite(r)) throw numeric_error("conformable_integral: non-finite result");
  return r;
}

inline double conformable_integral(const SampledFunction& f, double b, Order order, std::size_t panels = 16) {
  if (b > f.upper()) throw domain_error("conformable_integral: b beyond domain");
  if (f.lower() > 0.0) throw domain_error("conformable_integral: domain must start at 0");
  return conformable_integral([&](double x) { return f(x); }, b, order, panels);
}

/// |D(f o g)(x) - (Df)(g(x)) (Dg)(x) g(x)^(alpha-1)|, all derivatives conformable.
template <typename F, typename G>
double chain_rule_residual(const F& f, const G& g, double x, Order order) {
  if (!(x > 0.0)) throw domain_error("chain_rule_residual: x must be positive");
  const double gx = g(x);
  if (gx == 0.0) throw domain_error("chain_rule_residual: g(x) = 0");
  if (gx < 0.0) throw domain_error("chain_rule_residual: g(x) must be positive");
  auto composite = [&](double s) { return f(g(s)); };
  const double lhs = conformable_derivative(composite, x, order);
  const double h = detail::fd_step * std::max(1.0, std::abs(gx));
  const double fp = detail::fd_derivative(f, gx, h, -std::numeric_limits<double>::infinity(),
                                          std::numeric_limits<double>::infinity());
  const double a = order.value();
  const double dfg = std::pow(gx, 1.0 - a) * fp;
  const double dg = conformable_derivative(g, x, order);
  return std::abs(lhs - dfg * dg * std::pow(gx, a - 1.0));
}

}  // namespace cfsl
