#pragma once

// Adaptive Dormand-Prince 5(4) integrator with Hairer's continuous extension.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <initializer_list>
#include <string>
#include <utility>

#include "cfsl/errors.hpp"

namespace cfsl {

struct IntegratorOptions {
  double rtol = 1e-10;
  double atol = 1e-12;
  /// Initial step; 0 selects one automatically.
  double initial_step = 0.0;
  std::size_t max_steps = 2'000'000;
};

template <typename Scalar, std::size_t N>
using State = std::array<Scalar, N>;

/// One accepted step together with its dense-output polynomial.
template <typename Scalar, std::size_t N>
struct DenseSegment {
  double t0 = 0.0;
  double t1 = 0.0;
  std::array<State<Scalar, N>, 5> r{};

  const State<Scalar, N>& start() const noexcept { return r[0]; }

  State<Scalar, N> end() const {
    State<Scalar, N> y;
    for (std::size_t i = 0; i < N; ++i) y[i] = r[0][i] + r[1][i];
    return y;
  }

  State<Scalar, N> eval(double t) const {
    const double s = (t - t0) / (t1 - t0);
    const double s1 = 1.0 - s;
    State<Scalar, N> y;
    for (std::size_t i = 0; i < N; ++i)
      y[i] = r[0][i] + s * (r[1][i] + s1 * (r[2][i] + s * (r[3][i] + s1 * r[4][i])));
    return y;
  }
};

namespace detail::dopri {

inline constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
inline constexpr double a21 = 1.0 / 5;
inline constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
inline constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
inline constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
inline constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                        a65 = -5103.0 / 18656;
inline constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784,
                        a76 = 11.0 / 84;
inline constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                        e6 = 22.0 / 525, e7 = -1.0 / 40;
inline constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                        d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                        d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;

}  // namespace detail::dopri

/// Integrates y' = rhs(t, y) from t0 to t1 (either direction). `observer` receives
/// every accepted DenseSegment in integration order. Returns y(t1).
template <typename Scalar, std::size_t N, typename Rhs, typename Observer>
State<Scalar, N> integrate(const Rhs& rhs, double t0, double t1, State<Scalar, N> y,
                           const IntegratorOptions& opt, Observer&& observer) {
  using namespace detail::dopri;
  using S = State<Scalar, N>;
  const double span = t1 - t0;
  if (span == 0.0) return y;
  const double dir = span > 0 ? 1.0 : -1.0;

  auto axpy = [](const S& base, double h, std::initializer_list<std::pair<double, const S*>> terms) {
    S out = base;
    for (auto [c, k] : terms)
      for (std::size_t i = 0; i < N; ++i) out[i] += (h * c) * (*k)[i];
    return out;
  };

  S k1, k2, k3, k4, k5, k6, k7;
  k1 = rhs(t0, y);

  double h = opt.initial_step;
  if (h <= 0.0) {
    // Hairer's starting-step heuristic, first estimate only.
    double d0 = 0.0, d1n = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
      const double sc = opt.atol + opt.rtol * std::abs(y[i]);
      d0 = std::max(d0, std::abs(y[i]) / sc);
      d1n = std::max(d1n, std::abs(k1[i]) / sc);
    }
    h = (d0 < 1e-5 || d1n < 1e-5) ? 1e-6 : 0.01 * d0 / d1n;
    h = std::min(h, std::abs(span) * 0.01);
  }
  h = std::min(std::abs(h), std::abs(span)) * dir;

  double t = t0;
  bool last_rejected = false;
  for (std::size_t steps = 0;; ++steps) {
    if (steps >= opt.max_steps) throw numeric_error("integrator exceeded the maximum number of steps");
    const double remaining = t1 - t;
    bool final_step = false;
    if (std::abs(h) >= std::abs(remaining) * (1.0 - 1e-12)) {
      h = remaining;
      final_step = true;
    }
    if (std::abs(h) < 1e-14 * std::max(1.0, std::abs(t)))
      throw numeric_error("integrator step size underflow at t=" + std::to_string(t));

    k2 = rhs(t + c2 * h, axpy(y, h, {{a21, &k1}}));
    k3 = rhs(t + c3 * h, axpy(y, h, {{a31, &k1}, {a32, &k2}}));
    k4 = rhs(t + c4 * h, axpy(y, h, {{a41, &k1}, {a42, &k2}, {a43, &k3}}));
    k5 = rhs(t + c5 * h, axpy(y, h, {{a51, &k1}, {a52, &k2}, {a53, &k3}, {a54, &k4}}));
    k6 = rhs(t + h, axpy(y, h, {{a61, &k1}, {a62, &k2}, {a63, &k3}, {a64, &k4}, {a65, &k5}}));
    const S ynew = axpy(y, h, {{a71, &k1}, {a73, &k3}, {a74, &k4}, {a75, &k5}, {a76, &k6}});
    const double tnew = final_step ? t1 : t + h;
    k7 = rhs(tnew, ynew);

    double err = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
      const Scalar e = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
      const double sc = opt.atol + opt.rtol * std::max(std::abs(y[i]), std::abs(ynew[i]));
      err = std::max(err, std::abs(e) / sc);
    }
    if (!std::isfinite(err)) throw numeric_error("integrator produced a non-finite state");

    if (err <= 1.0) {
      DenseSegment<Scalar, N> seg;
      seg.t0 = t;
      seg.t1 = tnew;
      for (std::size_t i = 0; i < N; ++i) {
        seg.r[0][i] = y[i];
        seg.r[1][i] = ynew[i] - y[i];
        seg.r[2][i] = h * k1[i] - seg.r[1][i];
        seg.r[3][i] = seg.r[1][i] - h * k7[i] - seg.r[2][i];
        seg.r[4][i] = h * (d1 * k1[i] + d3 * k3[i] + d4 * k4[i] + d5 * k5[i] + d6 * k6[i] + d7 * k7[i]);
      }
      observer(std::as_const(seg));
      y = ynew;
      t = tnew;
      k1 = k7;
      if (final_step) return y;
      double fac = err == 0.0 ? 5.0 : 0.9 * std::pow(err, -0.2);
      fac = std::clamp(fac, 0.2, last_rejected ? 1.0 : 5.0);
      h *= fac;
      last_rejected = false;
    } else {
      h *= std::max(0.2, 0.9 * std::pow(err, -0.2));
      last_rejected = true;
    }
  }
}

template <typename Scalar, std::size_t N, typename Rhs>
State<Scalar, N> integrate(const Rhs& rhs, double t0, double t1, State<Scalar, N> y, const IntegratorOptions& opt) {
  return integrate<Scalar, N>(rhs, t0, t1, y, opt, [](const DenseSegment<Scalar, N>&) {});
}

}  // namespace cfsl
