#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cfsl/conformable.hpp"
#include "cfsl/errors.hpp"
#include "cfsl/spline.hpp"

namespace cfsl {

/// Real continuous potential q on [0, pi], bound to the order it is used with.
///
/// Evaluation in t-coordinates (Q(t) = q(x(t))) is what the solver calls; the
/// representation decides which coordinate is native.
class Potential {
 public:
  enum class Kind { cosine, grid, callable };

  /// q constant; stored as a one-term cosine series.
  static Potential constant(Order order, double c) { return cosine(order, {c}); }

  /// Q(t) = sum_k c_k cos(k pi t / T), T = pi^alpha / alpha.
  static Potential cosine(Order order, std::vector<double> coeffs) {
    if (coeffs.empty()) throw usage_error("cosine potential needs at least one coefficient");
    for (double c : coeffs)
      if (!std::isfinite(c)) throw domain_error("potential coefficient is not finite");
    Potential p(order, Kind::cosine);
    const double w = pi / order.t_end();
    auto c = std::make_shared<const std::vector<double>>(std::move(coeffs));
    p.data_ = c;
    p.qt_ = [c, w](double t) {
      double s = (*c)[0];
      for (std::size_t k = 1; k < c->size(); ++k) s += (*c)[k] * std::cos(static_cast<double>(k) * w * t);
      return s;
    };
    return p;
  }

  /// Samples on the uniform x-grid over [0, pi]; interpolated by a cubic spline in t.
  static Potential grid(Order order, std::vector<double> values) {
    const std::size_t n = values.size();
    if (n < 2) throw usage_error("grid potential needs at least two nodes");
    for (double v : values)
      if (!std::isfinite(v)) throw domain_error("potential sample is not finite");
    std::vector<double> knots(n);
    for (std::size_t i = 0; i < n; ++i) knots[i] = to_t(pi * static_cast<double>(i) / static_cast<double>(n - 1), order);
    knots.back() = order.t_end();
    Potential p(order, Kind::grid);
    p.data_ = std::make_shared<const std::vector<double>>(values);
    auto spline = std::make_shared<const CubicSpline>(std::move(knots), std::move(values));
    p.qt_ = [spline](double t) { return (*spline)(t); };
    return p;
  }

  /// Arbitrary q(x); `label` is informational.
  static Potential callable(Order order, std::function<double(double)> q_of_x, std::string label = "callable") {
    Potential p(order, Kind::callable);
    p.label_ = std::move(label);
    if (order.value() == 1.0) {
      p.qt_ = q_of_x;
    } else {
      p.qt_ = [q_of_x, order](double t) { return q_of_x(to_x(t, order)); };
    }
    p.qx_ = std::move(q_of_x);
    return p;
  }

  /// Arbitrary Q(t) given directly in t-coordinates.
  static Potential from_t(Order order, std::function<double(double)> q_of_t, std::string label = "callable") {
    Potential p(order, Kind::callable);
    p.label_ = std::move(label);
    p.qt_ = std::move(q_of_t);
    return p;
  }

  double at_t(double t) const { return qt_(t); }
  double at_x(double x) const { return qx_ ? qx_(x) : qt_(to_t(x, order_)); }
  double operator()(double x) const { return at_x(x); }

  Order order() const noexcept { return order_; }
  Kind kind() const noexcept { return kind_; }
  const std::string& label() const noexcept { return label_; }

  /// Cosine coefficients or grid samples, empty for callables.
  std::span<const double> data() const { return data_ ? std::span<const double>(*data_) : std::span<const double>{}; }

  /// Samples on a uniform x-grid over [0, pi].
  std::vector<double> sample(std::size_t nodes) const {
    std::vector<double> v(nodes);
    for (std::size_t i = 0; i < nodes; ++i)
      v[i] = at_x(pi * static_cast<double>(i) / static_cast<double>(nodes - 1));
    return v;
  }

  /// Returns q + c.
  Potential shifted(double c) const {
    if (kind_ == Kind::cosine) {
      std::vector<double> coeffs(data_->begin(), data_->end());
      coeffs[0] += c;
      return cosine(order_, std::move(coeffs));
    }
    auto base = *this;
    Potential p(order_, Kind::callable);
    p.label_ = label_ + "+shift";
    p.qt_ = [base, c](double t) { return base.at_t(t) + c; };
    return p;
  }

 private:
  Potential(Order order, Kind kind) : order_(order), kind_(kind) {}

  Order order_;
  Kind kind_;
  std::string label_;
  std::shared_ptr<const std::vector<double>> data_;
  std::function<double(double)> qt_;
  std::function<double(double)> qx_;
};

/// L_alpha(q, h, H): -D^a D^a y + q y = lambda y on (0, pi),
/// D^a y(0) - h y(0) = 0, D^a y(pi) + H y(pi) = 0.
struct Problem {
  Problem(Order order_, Potential q_, double h_, double H_)
      : order(order_), q(std::move(q_)), h(h_), H(H_) {
    if (!(q.order() == order)) throw usage_error("potential was built for a different order");
    if (!std::isfinite(h) || !std::isfinite(H)) throw domain_error("boundary coefficients must be finite");
  }

  Order order;
  Potential q;
  double h;
  double H;

  double t_end() const noexcept { return order.t_end(); }

  /// omega = h + H + 1/2 int_0^pi q d_alpha t.
  double omega() const {
    return h + H + 0.5 * integrate_panels([&](double t) { return q.at_t(t); }, 0.0, t_end(), 32);
  }
};

}  // namespace cfsl
