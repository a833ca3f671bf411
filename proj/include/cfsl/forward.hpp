#pragma once

// Forward solver for L_alpha(q, h, H).
//
// All integration happens in t = x^alpha / alpha, where D^alpha becomes d/dt and
// the equation is the classical -u'' + Q(t) u = lambda u on [0, T], T = pi^alpha/alpha.
// A trajectory's `du` is therefore D^alpha of the solution at the matching x.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <optional>
#include <span>
#include <type_traits>
#include <vector>

#include "cfsl/conformable.hpp"
#include "cfsl/errors.hpp"
#include "cfsl/integrator.hpp"
#include "cfsl/problem.hpp"

namespace cfsl {

template <typename Scalar>
concept SpectralScalar = std::is_same_v<Scalar, double> || std::is_same_v<Scalar, std::complex<double>>;

/// A solution of the equation at fixed lambda, with dense output over [0, T].
template <SpectralScalar Scalar>
class Trajectory {
 public:
  using Segment = DenseSegment<Scalar, 2>;

  Trajectory(Scalar lambda, Order order, std::vector<Segment> segments)
      : lambda_(lambda), order_(order), segments_(std::move(segments)) {
    if (segments_.empty()) throw usage_error("empty trajectory");
    std::sort(segments_.begin(), segments_.end(), [](const Segment& a, const Segment& b) { return lo(a) < lo(b); });
    starts_.reserve(segments_.size());
    for (const auto& s : segments_) starts_.push_back(lo(s));
  }

  Scalar lambda() const noexcept { return lambda_; }
  Order order() const noexcept { return order_; }
  double t_end() const noexcept { return order_.t_end(); }

  /// Accepted step boundaries in increasing t, including both ends.
  std::vector<double> nodes() const {
    std::vector<double> t(starts_);
    t.push_back(hi(segments_.back()));
    return t;
  }

  State<Scalar, 2> at(double t) const { return find(t).eval(t); }
  Scalar u(double t) const { return at(t)[0]; }
  Scalar du(double t) const { return at(t)[1]; }

  Scalar u_x(double x) const { return u(to_t(x, order_)); }
  Scalar du_x(double x) const { return du(to_t(x, order_)); }

  std::size_t steps() const noexcept { return segments_.size(); }

 private:
  static double lo(const Segment& s) { return std::min(s.t0, s.t1); }
  static double hi(const Segment& s) { return std::max(s.t0, s.t1); }

  const Segment& find(double t) const {
    auto it = std::upper_bound(starts_.begin(), starts_.end(), t);
    std::size_t i = it == starts_.begin() ? 0 : static_cast<std::size_t>(it - starts_.begin()) - 1;
    return segments_[std::min(i, segments_.size() - 1)];
  }

  Scalar lambda_;
  Order order_;
  std::vector<Segment> segments_;
  std::vector<double> starts_;
};

namespace detail {

inline double real_part(double v) { return v; }
inline double real_part(std::complex<double> v) { return v.real(); }

template <SpectralScalar Scalar>
auto sl_rhs(const Problem& p, Scalar lambda) {
  return [&p, lambda](double t, const State<Scalar, 2>& y) {
    return State<Scalar, 2>{y[1], (p.q.at_t(t) - lambda) * y[0]};
  };
}

/// (u, du, du/dlambda, d(du)/dlambda) for real lambda.
inline auto variational_rhs(const Problem& p, double lambda) {
  return [&p, lambda](double t, const State<double, 4>& y) {
    const double c = p.q.at_t(t) - lambda;
    return State<double, 4>{y[1], c * y[0], y[3], c * y[2] - y[0]};
  };
}

template <SpectralScalar Scalar, typename F>
decltype(auto) with_lambda(Scalar lambda, F&& f) {
  try {
    return f();
  } catch (const numeric_error& e) {
    if (e.lambda()) throw;
    throw numeric_error(e.what(), real_part(lambda));
  }
}

template <SpectralScalar Scalar>
Trajectory<Scalar> solve(const Problem& p, Scalar lambda, double t0, double t1, State<Scalar, 2> y0,
                         const IntegratorOptions& opt) {
  std::vector<DenseSegment<Scalar, 2>> segs;
  with_lambda(lambda, [&] {
    return integrate<Scalar, 2>(sl_rhs(p, lambda), t0, t1, y0, opt,
                                [&](const DenseSegment<Scalar, 2>& s) { segs.push_back(s); });
  });
  return Trajectory<Scalar>(lambda, p.order, std::move(segs));
}

/// Initial data at t = 0 for a forward shot.
struct Start {
  double u0;
  double du0;
};

inline Start robin_start(const Problem& p) { return {1.0, p.h}; }
inline constexpr Start dirichlet_start{0.0, 1.0};

/// End state of a forward shot, the Pruefer angle and (optionally) lambda-derivatives.
struct Shot {
  double u = 0, du = 0;
  double u_l = 0, du_l = 0;
  int zeros = 0;

  double theta() const {
    double frac = std::atan2(u, du);
    if (frac < 0) frac += pi;
    if (frac >= pi) frac -= pi;
    return zeros * pi + frac;
  }
  double theta_lambda() const { return (du * u_l - u * du_l) / (u * u + du * du); }
  /// du(T) + H u(T) and its lambda derivative.
  double boundary(double H) const { return du + H * u; }
  double boundary_lambda(double H) const { return du_l + H * u_l; }
};

inline Shot shoot(const Problem& p, double lambda, Start start, bool variational, const IntegratorOptions& opt) {
  Shot shot;
  int sign = start.u0 != 0.0 ? (start.u0 > 0 ? 1 : -1) : (start.du0 > 0 ? 1 : -1);
  auto track = [&](double u) {
    const int s = u > 0 ? 1 : (u < 0 ? -1 : 0);
    if (s != 0 && s != sign) {
      ++shot.zeros;
      sign = s;
    }
  };
  const double T = p.t_end();
  with_lambda(lambda, [&] {
    if (variational) {
      auto y = integrate<double, 4>(variational_rhs(p, lambda), 0.0, T, State<double, 4>{start.u0, start.du0, 0, 0},
                                    opt, [&](const DenseSegment<double, 4>& s) { track(s.end()[0]); });
      shot.u = y[0], shot.du = y[1], shot.u_l = y[2], shot.du_l = y[3];
    } else {
      auto y = integrate<double, 2>(sl_rhs(p, lambda), 0.0, T, State<double, 2>{start.u0, start.du0}, opt,
                                    [&](const DenseSegment<double, 2>& s) { track(s.end()[0]); });
      shot.u = y[0], shot.du = y[1];
    }
    return 0;
  });
  return shot;
}

inline std::size_t panels_for(double lambda, double T) {
  return 8 + static_cast<std::size_t>(std::ceil(2.0 * std::sqrt(std::abs(lambda)) * T / pi));
}

/// Locates the index-n eigenvalue of the problem started with `start` at t = 0 and
/// closed by du + H u = 0 at T. The Pruefer angle theta(T, lambda) is strictly
/// increasing and hits atan2(1, -H) + n pi exactly at the n-th eigenvalue, so the
/// search is a safeguarded Newton iteration on a monotone function; bracket ends
/// are collected as the iterates fall on either side of the root.
inline double locate_eigenvalue(const Problem& p, Start start, std::size_t n, double seed,
                                std::optional<double> lower, const IntegratorOptions& opt) {
  const double target = std::atan2(1.0, -p.H) + static_cast<double>(n) * pi;
  const double w = pi / p.t_end();
  auto gap = [&](double lam) { return std::max(w * w, 2.0 * w * std::sqrt(std::max(lam, 0.0))); };

  std::optional<double> a = lower, b;
  double x = seed;
  if (a && x <= *a) x = *a + 0.5 * gap(*a);
  Shot last;
  bool done = false;
  for (int it = 0; it < 200 && !done; ++it) {
    last = shoot(p, x, start, true, opt);
    const double f = last.theta() - target;
    if (f == 0.0) break;
    (f < 0 ? a : b) = x;
    const double df = last.theta_lambda();
    const double limit = 2.0 * gap(x);
    double next = x - f / df;
    if (!(df > 0) || !std::isfinite(next)) next = f < 0 ? x + limit : x - limit;
    if (a && b) {
      if (!(next > *a && next < *b)) next = 0.5 * (*a + *b);
    } else {
      next = std::clamp(next, x - limit, x + limit);
    }
    const double dx = next - x;
    x = next;
    const double scale = std::max(1.0, std::abs(x));
    done = std::abs(dx) <= 1e-14 * scale || (a && b && *b - *a <= 4e-16 * scale);
    if (it == 199) throw search_error("eigenvalue iteration did not converge", n);
  }
  // Simple roots alternate the sign of the characteristic derivative: sign = -(-1)^n.
  const double dchar = last.boundary_lambda(p.H);
  const double expected = n % 2 == 0 ? -1.0 : 1.0;
  if (dchar * expected < 0)
    throw numeric_error("sign pattern violation at index " + std::to_string(n) + ": suspected double root", x);
  return x;
}

inline std::vector<double> spectrum(const Problem& p, Start start, double omega, double shift, std::size_t count,
                                    std::span<const double> hint, const IntegratorOptions& opt) {
  if (count == 0) throw usage_error("eigenvalue count must be at least 1");
  const double T = p.t_end();
  const double w = pi / T;
  std::vector<double> out;
  out.reserve(count);
  for (std::size_t n = 0; n < count; ++n) {
    const double k = static_cast<double>(n) + shift;
    double seed = (k * w) * (k * w) + 2.0 * omega / T;
    if (n < hint.size())
      seed = hint[n];
    else if (n >= 2)
      seed = 2.0 * out[n - 1] - out[n - 2] + 2.0 * w * w;
    std::optional<double> lower;
    if (n > 0) {
      lower = out.back();
      if (seed <= *lower) seed = *lower + 0.5 * std::max(w * w, 2.0 * w * std::sqrt(std::max(*lower, 0.0)));
    }
    const double lam = locate_eigenvalue(p, start, n, seed, lower, opt);
    if (n > 0 && !(lam - out.back() > 1e-6))
      throw numeric_error("eigenvalues " + std::to_string(n - 1) + " and " + std::to_string(n) + " are not separated",
                          lam);
    out.push_back(lam);
  }
  return out;
}

}  // namespace detail

/// phi: phi(0) = 1, D^a phi(0) = h.
template <SpectralScalar Scalar>
Trajectory<Scalar> solve_phi(const Problem& p, Scalar lambda, const IntegratorOptions& opt = {}) {
  return detail::solve<Scalar>(p, lambda, 0.0, p.t_end(), {Scalar(1.0), Scalar(p.h)}, opt);
}

/// psi: psi(pi) = 1, D^a psi(pi) = -H; integrated backward from T.
template <SpectralScalar Scalar>
Trajectory<Scalar> solve_psi(const Problem& p, Scalar lambda, const IntegratorOptions& opt = {}) {
  return detail::solve<Scalar>(p, lambda, p.t_end(), 0.0, {Scalar(1.0), Scalar(-p.H)}, opt);
}

/// S: S(0) = 0, D^a S(0) = -1, so that W[S, phi] = 1 and psi/Delta = S - M phi
/// with M = -psi(0)/Delta.
template <SpectralScalar Scalar>
Trajectory<Scalar> solve_S(const Problem& p, Scalar lambda, const IntegratorOptions& opt = {}) {
  return detail::solve<Scalar>(p, lambda, 0.0, p.t_end(), {Scalar(0.0), Scalar(-1.0)}, opt);
}

/// W[a, b](t) = a D^a b - b D^a a.
template <SpectralScalar Scalar>
Scalar wronskian(const Trajectory<Scalar>& a, const Trajectory<Scalar>& b, double t) {
  if (a.lambda() != b.lambda() || !(a.order() == b.order()))
    throw usage_error("wronskian: trajectories computed at different lambda or order");
  if (t < 0.0 || t > a.t_end()) throw domain_error("wronskian: t outside [0, T]");
  const auto ya = a.at(t);
  const auto yb = b.at(t);
  return ya[0] * yb[1] - yb[0] * ya[1];
}

/// Delta(lambda) = V(phi) = D^a phi(pi) + H phi(pi).
template <SpectralScalar Scalar>
Scalar char_delta(const Problem& p, Scalar lambda, const IntegratorOptions& opt = {}) {
  const auto y = detail::with_lambda(lambda, [&] {
    return integrate<Scalar, 2>(detail::sl_rhs(p, lambda), 0.0, p.t_end(), {Scalar(1.0), Scalar(p.h)}, opt);
  });
  return y[1] + p.H * y[0];
}

/// Delta(lambda) = -U(psi) = h psi(0) - D^a psi(0).
template <SpectralScalar Scalar>
Scalar delta_from_psi(const Problem& p, Scalar lambda, const IntegratorOptions& opt = {}) {
  const auto y = detail::with_lambda(lambda, [&] {
    return integrate<Scalar, 2>(detail::sl_rhs(p, lambda), p.t_end(), 0.0, {Scalar(1.0), Scalar(-p.H)}, opt);
  });
  return p.h * y[0] - y[1];
}

/// Delta_1(xi) = psi(0, xi); zeros are the spectrum with y(0) = 0 in place of U.
template <SpectralScalar Scalar>
Scalar char_delta1(const Problem& p, Scalar xi, const IntegratorOptions& opt = {}) {
  const auto y = detail::with_lambda(xi, [&] {
    return integrate<Scalar, 2>(detail::sl_rhs(p, xi), p.t_end(), 0.0, {Scalar(1.0), Scalar(-p.H)}, opt);
  });
  return y[0];
}

/// dDelta/dlambda from the variational system.
inline double delta_prime(const Problem& p, double lambda, const IntegratorOptions& opt = {}) {
  return detail::shoot(p, lambda, detail::robin_start(p), true, opt).boundary_lambda(p.H);
}

/// First `count` eigenvalues of L_alpha(q, h, H), ascending. `hint` optionally
/// supplies starting guesses (e.g. a nearby problem's spectrum).
inline std::vector<double> eigenvalues(const Problem& p, std::size_t count, const IntegratorOptions& opt = {},
                                       std::span<const double> hint = {}) {
  return detail::spectrum(p, detail::robin_start(p), p.omega(), 0.0, count, hint, opt);
}

/// First `count` zeros of Delta_1, ascending.
inline std::vector<double> second_spectrum(const Problem& p, std::size_t count, const IntegratorOptions& opt = {},
                                           std::span<const double> hint = {}) {
  return detail::spectrum(p, detail::dirichlet_start, p.omega() - p.h, 0.5, count, hint, opt);
}

struct EigenRecord {
  std::size_t n = 0;
  double lambda = 0;
  /// Norming constant int_0^pi phi^2 d_alpha x.
  double alpha = 0;
  /// psi(0, lambda_n) = 1 / phi(pi, lambda_n); phi_n = psi_n / beta.
  double beta = 0;
  double delta_prime = 0;
  /// phi(pi, lambda_n), kept for the boundary sensitivity d lambda_n / dH = phi(pi)^2 / alpha.
  double phi_end = 0;

  /// |beta alpha + Delta'| / |Delta'|; zero in exact arithmetic.
  double lemma_residual() const { return std::abs(beta * alpha + delta_prime) / std::abs(delta_prime); }
};

/// Integral of g(t) * phi(t)^2 over [0, T] for a real trajectory.
template <typename G>
double weighted_square_integral(const Trajectory<double>& tr, const G& g) {
  const double T = tr.t_end();
  return integrate_panels(
      [&](double t) {
        const double u = tr.u(t);
        return g(t) * u * u;
      },
      0.0, T, detail::panels_for(tr.lambda(), T));
}

inline std::vector<EigenRecord> norming_constants(const Problem& p, std::span<const double> eigs,
                                                  const IntegratorOptions& opt = {}) {
  std::vector<EigenRecord> out;
  out.reserve(eigs.size());
  for (std::size_t n = 0; n < eigs.size(); ++n) {
    const double lam = eigs[n];
    const auto phi = solve_phi(p, lam, opt);
    const double T = p.t_end();
    EigenRecord r;
    r.n = n;
    r.lambda = lam;
    r.alpha = weighted_square_integral(phi, [](double) { return 1.0; });
    const double psi0 = char_delta1(p, lam, opt);
    if (std::abs(psi0) < 1e-12) throw numeric_error("degenerate norming record: psi(0) vanishes", lam);
    r.beta = psi0;
    r.phi_end = phi.u(T);
    r.delta_prime = delta_prime(p, lam, opt);
    out.push_back(r);
  }
  return out;
}

/// M(lambda) = -psi(0, lambda) / Delta(lambda). Throws pole_error when lambda is
/// numerically an eigenvalue.
template <SpectralScalar Scalar>
Scalar weyl_function(const Problem& p, Scalar lambda, const IntegratorOptions& opt = {}) {
  const auto y = detail::with_lambda(lambda, [&] {
    return integrate<Scalar, 2>(detail::sl_rhs(p, lambda), p.t_end(), 0.0, {Scalar(1.0), Scalar(-p.H)}, opt);
  });
  const Scalar delta = p.h * y[0] - y[1];
  const double scale = std::abs(p.h * y[0]) + std::abs(y[1]) + std::abs(y[0]) * std::sqrt(std::max(1.0, std::abs(lambda)));
  // Numerically zero (integrator noise) or within 1e-10 relative distance of a root.
  bool pole = std::abs(delta) <= 10.0 * opt.rtol * scale;
  if constexpr (std::is_same_v<Scalar, double>) {
    if (!pole && std::abs(delta) < 1e-3 * scale) {
      const double dp = delta_prime(p, lambda, opt);
      pole = std::abs(delta) <= 1e-10 * std::max(1.0, std::abs(lambda)) * std::abs(dp);
    }
  }
  if (pole) throw pole_error("lambda=" + std::to_string(detail::real_part(lambda)) + " is a pole of the Weyl function");
  return -y[0] / delta;
}

/// max over a uniform t-grid of |psi/Delta - (S - M phi)|.
inline double weyl_identity_residual(const Problem& p, double lambda, std::size_t points = 201,
                                     const IntegratorOptions& opt = {}) {
  const auto phi = solve_phi(p, lambda, opt);
  const auto psi = solve_psi(p, lambda, opt);
  const auto S = solve_S(p, lambda, opt);
  const double delta = char_delta(p, lambda, opt);
  const double M = weyl_function(p, lambda, opt);
  double worst = 0.0;
  for (std::size_t i = 0; i < points; ++i) {
    const double t = p.t_end() * static_cast<double>(i) / static_cast<double>(points - 1);
    worst = std::max(worst, std::abs(psi.u(t) / delta - (S.u(t) - M * phi.u(t))));
  }
  return worst;
}

/// Values of W[psi, phi] on a uniform t-grid with `points` nodes.
inline std::vector<double> wronskian_profile(const Problem& p, double lambda, std::size_t points = 201,
                                             const IntegratorOptions& opt = {}) {
  const auto phi = solve_phi(p, lambda, opt);
  const auto psi = solve_psi(p, lambda, opt);
  std::vector<double> w(points);
  for (std::size_t i = 0; i < points; ++i)
    w[i] = wronskian(psi, phi, p.t_end() * static_cast<double>(i) / static_cast<double>(points - 1));
  return w;
}

/// Truncated ((l0 - lambda)/(l0 - mu)) prod_{n>=1} (l_n - lambda)/(l_n - mu), which
/// tends to Delta(lambda)/Delta(mu) as more eigenvalues are supplied.
inline double delta_product_ratio(std::span<const double> eigs, double lambda, double mu) {
  if (eigs.empty()) throw usage_error("delta_product_ratio needs at least one eigenvalue");
  if (lambda == mu) return 1.0;
  double r = 1.0;
  for (double l : eigs) {
    if (std::abs(l - mu) <= 1e-10 * std::max(1.0, std::abs(l))) throw pole_error("mu coincides with an eigenvalue");
    r *= (l - lambda) / (l - mu);
  }
  return r;
}

/// Both sides of the Lagrange identity for two problems of the same order:
/// [phi~ D phi - phi D phi~]_0^pi and int_0^pi (q - q~) phi phi~ d_alpha x.
struct LagrangeSides {
  double bracket = 0;
  double integral = 0;
};

inline LagrangeSides lagrange_identity(const Problem& p, const Problem& pt, double lambda,
                                       const IntegratorOptions& opt = {}) {
  if (!(p.order == pt.order)) throw usage_error("lagrange_identity: problems differ in order");
  const auto a = solve_phi(p, lambda, opt);
  const auto b = solve_phi(pt, lambda, opt);
  const double T = p.t_end();
  auto bracket_at = [&](double t) {
    const auto ya = a.at(t);
    const auto yb = b.at(t);
    return yb[0] * ya[1] - ya[0] * yb[1];
  };
  LagrangeSides s;
  s.bracket = bracket_at(T) - bracket_at(0.0);
  s.integral = integrate_panels([&](double t) { return (p.q.at_t(t) - pt.q.at_t(t)) * a.u(t) * b.u(t); }, 0.0, T,
                                detail::panels_for(lambda, T) + 16);
  return s;
}

}  // namespace cfsl
