#pragma once

// Reconstruction of (q, h, H) from spectral data by Levenberg-Marquardt on a
// finite cosine parameterization of Q(t) = q(x(t)).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cfsl/conformable.hpp"
#include "cfsl/errors.hpp"
#include "cfsl/forward.hpp"
#include "cfsl/io.hpp"
#include "cfsl/problem.hpp"
#include "cfsl/spectral_data.hpp"
#include "cfsl/spline.hpp"

namespace cfsl {

/// q known on [pi/2, pi]: samples on a uniform x-grid, interpolated by a cubic
/// spline in t. Evaluation at a sample node returns the sample bit for bit.
class FrozenTail {
 public:
  FrozenTail(Order order, std::vector<double> samples) : order_(order), samples_(std::move(samples)) {
    const std::size_t n = samples_.size();
    if (n < 4) throw usage_error("frozen tail needs at least four samples");
    std::vector<double> knots(n);
    for (std::size_t i = 0; i < n; ++i)
      knots[i] = to_t(0.5 * pi + 0.5 * pi * static_cast<double>(i) / static_cast<double>(n - 1), order);
    knots.back() = order.t_end();
    split_ = knots.front();
    spline_ = std::make_shared<const CubicSpline>(std::move(knots), samples_);
    slope_ = spline_->derivative(split_);
  }

  double at_t(double t) const { return (*spline_)(t); }
  /// t-coordinate of x = pi/2.
  double split() const noexcept { return split_; }
  /// dQ/dt at the split, taken from the tail side.
  double slope() const noexcept { return slope_; }
  const std::vector<double>& samples() const noexcept { return samples_; }
  Order order() const noexcept { return order_; }

 private:
  Order order_;
  std::vector<double> samples_;
  std::shared_ptr<const CubicSpline> spline_;
  double split_ = 0.0;
  double slope_ = 0.0;
};

/// Unknown vector of the inverse problem: coefficients of Q plus flagged scalars.
///
/// cosine:     Q(t) = sum_{k<M} c_k cos(k pi t / T).
/// mixed_half: Q = tail on [t_h, T]; below t_h,
///             Q(t) = g(t) + sum_{k=1..M} c_{k-1} (cos(k pi t / t_h) - (-1)^k),
///             g the linear extension of the tail with matching value and slope,
///             so the pieces join C^1 at t_h whatever the coefficients.
struct PotentialModel {
  enum class Basis { cosine, mixed_half };

  Order order{1.0};
  Basis basis = Basis::cosine;
  std::vector<double> coeffs;
  double h = 0.0;
  double H = 0.0;
  bool h_unknown = true;
  bool H_unknown = true;
  std::optional<FrozenTail> tail;

  static PotentialModel cosine(Order order, std::size_t M) {
    if (M == 0) throw usage_error("basis size must be at least 1");
    return PotentialModel{order, Basis::cosine, std::vector<double>(M, 0.0)};
  }

  static PotentialModel mixed_half(Order order, std::size_t M, FrozenTail tail, double H) {
    if (M == 0) throw usage_error("basis size must be at least 1");
    if (!(tail.order() == order)) throw usage_error("frozen tail was built for a different order");
    PotentialModel m{order, Basis::mixed_half, std::vector<double>(M, 0.0)};
    m.H = H;
    m.H_unknown = false;
    m.tail = std::move(tail);
    return m;
  }

  std::size_t size() const noexcept { return coeffs.size(); }

  /// dQ/dc_k at t.
  double basis_function(std::size_t k, double t) const {
    if (basis == Basis::cosine) return std::cos(static_cast<double>(k) * pi * t / order.t_end());
    const double th = tail->split();
    if (t >= th) return 0.0;
    const double j = static_cast<double>(k + 1);
    return std::cos(j * pi * t / th) - ((k + 1) % 2 == 0 ? 1.0 : -1.0);
  }

  double q_at_t(double t) const {
    if (basis == Basis::mixed_half) {
      const double th = tail->split();
      if (t >= th) return tail->at_t(t);
      double s = tail->at_t(th) + tail->slope() * (t - th);
      for (std::size_t k = 0; k < coeffs.size(); ++k) s += coeffs[k] * basis_function(k, t);
      return s;
    }
    double s = 0.0;
    for (std::size_t k = 0; k < coeffs.size(); ++k) s += coeffs[k] * basis_function(k, t);
    return s;
  }

  Potential potential() const {
    if (basis == Basis::cosine) return Potential::cosine(order, coeffs);
    auto self = std::make_shared<const PotentialModel>(*this);
    return Potential::from_t(order, [self](double t) { return self->q_at_t(t); }, "mixed_half");
  }

  Problem problem() const { return Problem(order, potential(), h, H); }

  /// Multiplier of c_k inside the smoothness penalty.
  double penalty_weight(std::size_t k) const {
    return basis == Basis::cosine ? static_cast<double>(k) : static_cast<double>(k + 1);
  }

  std::size_t unknowns() const noexcept { return coeffs.size() + (h_unknown ? 1 : 0) + (H_unknown ? 1 : 0); }

  std::vector<std::string> unknown_names() const {
    std::vector<std::string> n;
    for (std::size_t k = 0; k < coeffs.size(); ++k) n.push_back("c" + std::to_string(k));
    if (h_unknown) n.push_back("h");
    if (H_unknown) n.push_back("H");
    return n;
  }

  Eigen::VectorXd pack() const {
    Eigen::VectorXd x(static_cast<Eigen::Index>(unknowns()));
    Eigen::Index i = 0;
    for (double c : coeffs) x[i++] = c;
    if (h_unknown) x[i++] = h;
    if (H_unknown) x[i++] = H;
    return x;
  }

  PotentialModel with(const Eigen::VectorXd& x) const {
    if (x.size() != static_cast<Eigen::Index>(unknowns())) throw usage_error("unknown vector has the wrong length");
    PotentialModel m = *this;
    Eigen::Index i = 0;
    for (double& c : m.coeffs) c = x[i++];
    if (h_unknown) m.h = x[i++];
    if (H_unknown) m.H = x[i++];
    return m;
  }
};

enum class InitMode { omega, zero };

struct InverseConfig {
  /// 0 selects half the per-list data count.
  std::size_t basis_size = 0;
  /// Leading entries used from each data list; 0 uses everything.
  std::size_t data_count = 0;
  double damping = 1e-3;
  /// Multiplier tau of the penalty rows tau * w_k * c_k; unset means 1e-6 * |data|.
  std::optional<double> tikhonov;
  std::size_t max_iterations = 100;
  double step_tol = 1e-10;
  double residual_tol = 1e-10;
  /// Relative objective decrease below which an accepted step ends the fit.
  double objective_tol = 1e-10;
  InitMode init = InitMode::omega;
  bool gradient_check = true;
  IntegratorOptions integrator{};
};

struct InverseReport {
  PotentialModel model;
  /// Damped objective |W r|^2 + tau^2 sum w_k^2 c_k^2 at the start and after every accepted step.
  std::vector<double> history;
  /// |W r| at the returned model.
  double residual_norm = 0.0;
  bool converged = false;
  std::size_t iterations = 0;
  std::string status;
  double tikhonov = 0.0;
  std::vector<std::string> unknown_names;
  std::vector<double> standard_errors;
  double condition_number = 0.0;
  /// Largest column-wise relative deviation between the analytic and a
  /// finite-difference Jacobian at the initial model; NaN when disabled.
  double gradient_check = std::numeric_limits<double>::quiet_NaN();
  std::vector<std::string> warnings;
};

/// Keeps the first n entries of every list (n = 0 keeps all).
inline SpectralDataset truncate(const SpectralDataset& d, std::size_t n) {
  if (n == 0) return d;
  auto cut = [n](std::vector<double> v) {
    if (v.size() > n) v.resize(n);
    return v;
  };
  return std::visit(
      [&](auto p) -> SpectralDataset {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, WeylSamples>) {
          p.lambdas = cut(p.lambdas), p.values = cut(p.values);
        } else if constexpr (std::is_same_v<T, TwoSpectra>) {
          p.lambdas = cut(p.lambdas), p.xis = cut(p.xis);
        } else if constexpr (std::is_same_v<T, SpectrumWithNorms>) {
          p.lambdas = cut(p.lambdas), p.norms = cut(p.norms);
        } else {
          p.lambdas = cut(p.lambdas);
        }
        return SpectralDataset(d.order(), p);
      },
      d.payload());
}

namespace detail {

inline void check_model(const PotentialModel& m, const SpectralDataset& d) {
  if (!(m.order == d.order())) throw usage_error("model and dataset differ in alpha");
  const bool mixed = d.kind() == DataKind::mixed_half;
  if (mixed != (m.basis == PotentialModel::Basis::mixed_half))
    throw usage_error("mixed-half data needs the mixed-half basis and vice versa");
}

inline std::vector<double> norms_at(const Problem& p, std::span<const double> eigs, const IntegratorOptions& opt) {
  std::vector<double> out;
  for (double l : eigs) out.push_back(weighted_square_integral(solve_phi(p, l, opt), [](double) { return 1.0; }));
  return out;
}

inline void append_diff(std::vector<double>& r, const std::vector<double>& model, const std::vector<double>& data) {
  for (std::size_t i = 0; i < data.size(); ++i) r.push_back(model[i] - data[i]);
}

/// Data vector of the model at the shape of `d` (same counts, same Weyl abscissae).
inline std::vector<double> raw_residual(const PotentialModel& m, const SpectralDataset& d, const IntegratorOptions& opt) {
  check_model(m, d);
  const Problem p = m.problem();
  std::vector<double> r;
  std::visit(
      [&](const auto& data) {
        using T = std::decay_t<decltype(data)>;
        if constexpr (std::is_same_v<T, WeylSamples>) {
          for (std::size_t j = 0; j < data.lambdas.size(); ++j)
            r.push_back(weyl_function(p, data.lambdas[j], opt) - data.values[j]);
        } else if constexpr (std::is_same_v<T, TwoSpectra>) {
          append_diff(r, eigenvalues(p, data.lambdas.size(), opt, data.lambdas), data.lambdas);
          append_diff(r, second_spectrum(p, data.xis.size(), opt, data.xis), data.xis);
        } else if constexpr (std::is_same_v<T, SpectrumWithNorms>) {
          const auto eigs = eigenvalues(p, data.lambdas.size(), opt, data.lambdas);
          append_diff(r, eigs, data.lambdas);
          const auto norms = norms_at(p, eigs, opt);
          for (std::size_t n = 0; n < norms.size(); ++n) r.push_back(std::log(norms[n] / data.norms[n]));
        } else {
          if (m.H != data.H) throw usage_error("mixed-half model H differs from the dataset's known H");
          append_diff(r, eigenvalues(p, data.lambdas.size(), opt, data.lambdas), data.lambdas);
        }
      },
      d.payload());
  return r;
}

/// Rule over [0, T], split at the basis breakpoint when there is one.
inline QuadratureRule model_rule(const PotentialModel& m, double lambda_max) {
  const double T = m.order.t_end();
  const std::size_t panels = panels_for(lambda_max, T) + m.size();
  if (m.basis == PotentialModel::Basis::mixed_half) {
    const double th = m.tail->split();
    const auto n0 = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(panels * th / T)));
    return gauss_rule(0.0, th, n0) + gauss_rule(th, T, std::max<std::size_t>(1, panels - n0 + 1));
  }
  return gauss_rule(0.0, T, panels);
}

inline Eigen::MatrixXd basis_matrix(const PotentialModel& m, const QuadratureRule& rule) {
  Eigen::MatrixXd B(static_cast<Eigen::Index>(rule.nodes.size()), static_cast<Eigen::Index>(m.size()));
  for (std::size_t i = 0; i < rule.nodes.size(); ++i)
    for (std::size_t k = 0; k < m.size(); ++k)
      B(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rule.weights[i] * m.basis_function(k, rule.nodes[i]);
  return B;
}

/// Hellmann-Feynman row for an eigenvalue with eigenfunction `u`: d lambda / d c_k
/// = int u^2 b_k / int u^2, d/dh = u(0)^2 / int u^2, d/dH = u(T)^2 / int u^2.
inline void eigen_row(Eigen::MatrixXd& J, Eigen::Index r, const PotentialModel& m, const Trajectory<double>& u,
                      const QuadratureRule& rule, const Eigen::MatrixXd& B) {
  Eigen::VectorXd u2(static_cast<Eigen::Index>(rule.nodes.size()));
  double norm = 0.0;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
    const double v = u.u(rule.nodes[i]);
    u2[static_cast<Eigen::Index>(i)] = v * v;
    norm += rule.weights[i] * v * v;
  }
  if (!(norm > 0.0)) throw numeric_error("degenerate eigenfunction norm", u.lambda());
  const auto M = static_cast<Eigen::Index>(m.size());
  J.row(r).head(M) = (B.transpose() * u2).transpose() / norm;
  Eigen::Index i = M;
  const double u0 = u.u(0.0), uT = u.u(u.t_end());
  if (m.h_unknown) J(r, i++) = u0 * u0 / norm;
  if (m.H_unknown) J(r, i++) = uT * uT / norm;
}

inline Eigen::MatrixXd fd_jacobian(const PotentialModel& m, const SpectralDataset& d, double step,
                                   const IntegratorOptions& opt) {
  const Eigen::VectorXd x = m.pack();
  Eigen::MatrixXd J;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    const double s = step * std::max(1.0, std::abs(x[k]));
    Eigen::VectorXd xp = x, xm = x;
    xp[k] += s;
    xm[k] -= s;
    const auto rp = raw_residual(m.with(xp), d, opt);
    const auto rm = raw_residual(m.with(xm), d, opt);
    if (J.size() == 0) J.resize(static_cast<Eigen::Index>(rp.size()), x.size());
    for (std::size_t i = 0; i < rp.size(); ++i) J(static_cast<Eigen::Index>(i), k) = (rp[i] - rm[i]) / (2.0 * s);
  }
  return J;
}

inline std::vector<double> data_vector(const SpectralDataset& d) {
  std::vector<double> v;
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, WeylSamples>) {
          v = p.values;
        } else if constexpr (std::is_same_v<T, TwoSpectra>) {
          v = p.lambdas;
          v.insert(v.end(), p.xis.begin(), p.xis.end());
        } else if constexpr (std::is_same_v<T, SpectrumWithNorms>) {
          v = p.lambdas;
          v.insert(v.end(), p.norms.begin(), p.norms.end());
        } else {
          v = p.lambdas;
        }
      },
      d.payload());
  return v;
}

}  // namespace detail

/// Model-minus-data mismatch, unweighted: eigenvalue differences, log norming
/// ratios or Weyl differences, in the order the data lists are stored.
inline Eigen::VectorXd residual(const PotentialModel& m, const SpectralDataset& d, const IntegratorOptions& opt = {}) {
  const auto r = detail::raw_residual(m, d, opt);
  return Eigen::Map<const Eigen::VectorXd>(r.data(), static_cast<Eigen::Index>(r.size()));
}

/// Row weights of the least-squares objective: 1/(1+n) on eigenvalue rows,
/// 1 + |lambda_j| on Weyl rows, 1 on log norming rows.
inline Eigen::VectorXd residual_weights(const SpectralDataset& d) {
  std::vector<double> w;
  auto ramp = [&](std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) w.push_back(1.0 / (1.0 + static_cast<double>(i)));
  };
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, WeylSamples>) {
          for (double l : p.lambdas) w.push_back(1.0 + std::abs(l));
        } else if constexpr (std::is_same_v<T, TwoSpectra>) {
          ramp(p.lambdas.size());
          ramp(p.xis.size());
        } else if constexpr (std::is_same_v<T, SpectrumWithNorms>) {
          ramp(p.lambdas.size());
          w.insert(w.end(), p.norms.size(), 1.0);
        } else {
          ramp(p.lambdas.size());
        }
      },
      d.payload());
  return Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
}

/// d residual / d unknowns. Eigenvalue and Weyl rows are analytic; log norming
/// rows use central differences.
inline Eigen::MatrixXd jacobian(const PotentialModel& m, const SpectralDataset& d, const IntegratorOptions& opt = {},
                                double fd_step = 1e-4) {
  detail::check_model(m, d);
  const Problem p = m.problem();
  const auto n = static_cast<Eigen::Index>(m.unknowns());
  const auto M = static_cast<Eigen::Index>(m.size());
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d.size()), n);

  auto fill_eigen_rows = [&](Eigen::Index row0, const std::vector<double>& eigs, bool dirichlet) {
    if (eigs.empty()) return;
    const auto rule = detail::model_rule(m, eigs.back());
    const auto B = detail::basis_matrix(m, rule);
    for (std::size_t i = 0; i < eigs.size(); ++i) {
      const auto u = dirichlet ? detail::solve<double>(p, eigs[i], 0.0, p.t_end(), {0.0, 1.0}, opt)
                               : solve_phi(p, eigs[i], opt);
      detail::eigen_row(J, row0 + static_cast<Eigen::Index>(i), m, u, rule, B);
      if (dirichlet && m.h_unknown) J(row0 + static_cast<Eigen::Index>(i), M) = 0.0;
    }
  };

  std::visit(
      [&](const auto& data) {
        using T = std::decay_t<decltype(data)>;
        if constexpr (std::is_same_v<T, WeylSamples>) {
          // With Phi = psi / Delta: dM = int dQ Phi^2 dt + dH Phi(T)^2 + dh M^2.
          double lmax = 0.0;
          for (double l : data.lambdas) lmax = std::max(lmax, std::abs(l));
          const auto rule = detail::model_rule(m, lmax);
          const auto B = detail::basis_matrix(m, rule);
          for (std::size_t j = 0; j < data.lambdas.size(); ++j) {
            const double l = data.lambdas[j];
            const auto psi = solve_psi(p, l, opt);
            const double delta = p.h * psi.u(0.0) - psi.du(0.0);
            if (delta == 0.0) throw pole_error("Weyl sample sits on an eigenvalue of the model");
            const double Mj = -psi.u(0.0) / delta;
            Eigen::VectorXd f2(static_cast<Eigen::Index>(rule.nodes.size()));
            for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
              const double f = psi.u(rule.nodes[i]) / delta;
              f2[static_cast<Eigen::Index>(i)] = f * f;
            }
            const auto r = static_cast<Eigen::Index>(j);
            J.row(r).head(M) = (B.transpose() * f2).transpose();
            Eigen::Index c = M;
            if (m.h_unknown) J(r, c++) = Mj * Mj;
            if (m.H_unknown) J(r, c++) = 1.0 / (delta * delta);
          }
        } else if constexpr (std::is_same_v<T, TwoSpectra>) {
          fill_eigen_rows(0, eigenvalues(p, data.lambdas.size(), opt, data.lambdas), false);
          fill_eigen_rows(static_cast<Eigen::Index>(data.lambdas.size()),
                          second_spectrum(p, data.xis.size(), opt, data.xis), true);
        } else if constexpr (std::is_same_v<T, SpectrumWithNorms>) {
          fill_eigen_rows(0, eigenvalues(p, data.lambdas.size(), opt, data.lambdas), false);
          const auto N = static_cast<Eigen::Index>(data.lambdas.size());
          const Eigen::MatrixXd F = detail::fd_jacobian(m, d, fd_step, opt);
          J.bottomRows(N) = F.bottomRows(N);
        } else {
          fill_eigen_rows(0, eigenvalues(p, data.lambdas.size(), opt, data.lambdas), false);
        }
      },
      d.payload());
  return J;
}

/// Central-difference Jacobian of `residual`.
inline Eigen::MatrixXd finite_difference_jacobian(const PotentialModel& m, const SpectralDataset& d,
                                                  double step = 1e-4, const IntegratorOptions& opt = {}) {
  return detail::fd_jacobian(m, d, step, opt);
}

/// max over columns of |J_a e_k - J_f e_k| / |J_f e_k|.
inline double jacobian_deviation(const Eigen::MatrixXd& analytic, const Eigen::MatrixXd& fd) {
  if (analytic.rows() != fd.rows() || analytic.cols() != fd.cols()) throw usage_error("Jacobian shapes differ");
  double worst = 0.0;
  for (Eigen::Index k = 0; k < fd.cols(); ++k) {
    const double ref = fd.col(k).norm();
    const double diff = (analytic.col(k) - fd.col(k)).norm();
    worst = std::max(worst, ref > 0.0 ? diff / ref : diff);
  }
  return worst;
}

/// Starting model for `d`. InitMode::omega sets the mean of Q (cosine basis) or
/// h (mixed half) from the first spectral moment when at least 10 eigenvalues
/// are available; everything else starts at zero.
inline PotentialModel initial_model(const SpectralDataset& d, std::size_t M, InitMode init) {
  PotentialModel m = d.kind() == DataKind::mixed_half
                         ? PotentialModel::mixed_half(d.order(), M, FrozenTail(d.order(), d.get<MixedHalf>().tail),
                                                      d.get<MixedHalf>().H)
                         : PotentialModel::cosine(d.order(), M);
  if (init == InitMode::zero || d.kind() == DataKind::weyl_samples) return m;
  const auto& eigs = std::visit(
      [](const auto& p) -> const std::vector<double>& { return p.lambdas; }, d.payload());
  if (eigs.size() < 10) return m;
  const double omega = estimate_omega(eigs, d.order()).omega;
  const double T = d.order().t_end();
  if (m.basis == PotentialModel::Basis::cosine) {
    m.coeffs[0] = 2.0 * omega / T;
  } else {
    const double mean = integrate_panels([&](double t) { return m.q_at_t(t); }, 0.0, T, 64);
    m.h = omega - m.H - 0.5 * mean;
  }
  return m;
}

inline std::size_t default_basis_size(const SpectralDataset& d) {
  const std::size_t per_list = std::visit([](const auto& p) { return p.lambdas.size(); }, d.payload());
  return std::max<std::size_t>(1, per_list / 2);
}

/// Levenberg-Marquardt fit of `start` to `data`.
inline InverseReport reconstruct(const SpectralDataset& data, const InverseConfig& cfg, PotentialModel start) {
  if (!(cfg.damping > 0) || !(cfg.step_tol > 0) || !(cfg.residual_tol > 0) || !(cfg.objective_tol > 0))
    throw usage_error("damping and tolerances must be positive");
  const SpectralDataset d = truncate(data, cfg.data_count);
  detail::check_model(start, d);
  if (d.size() < start.unknowns())
    throw usage_error("underdetermined: " + std::to_string(d.size()) + " data for " +
                      std::to_string(start.unknowns()) + " unknowns");

  const auto& opt = cfg.integrator;
  const Eigen::VectorXd w = residual_weights(d);
  const auto M = static_cast<Eigen::Index>(start.size());
  const auto n = static_cast<Eigen::Index>(start.unknowns());
  const auto raw = detail::data_vector(d);
  const double tau = cfg.tikhonov ? *cfg.tikhonov : 1e-6 * Eigen::Map<const Eigen::VectorXd>(raw.data(), static_cast<Eigen::Index>(raw.size())).norm();
  Eigen::VectorXd L = Eigen::VectorXd::Zero(n);
  for (Eigen::Index k = 0; k < M; ++k) L[k] = tau * start.penalty_weight(static_cast<std::size_t>(k));

  InverseReport rep;
  rep.model = start;
  rep.tikhonov = tau;
  rep.unknown_names = start.unknown_names();

  Eigen::VectorXd x = start.pack();
  Eigen::VectorXd r = w.cwiseProduct(residual(start, d, opt));
  auto objective = [&](const Eigen::VectorXd& rr, const Eigen::VectorXd& xx) {
    return rr.squaredNorm() + L.cwiseProduct(xx).squaredNorm();
  };
  double F = objective(r, x);
  rep.history.push_back(F);

  Eigen::MatrixXd J = w.asDiagonal() * jacobian(start, d, opt);
  Eigen::VectorXd xJ = x;
  if (cfg.gradient_check) {
    IntegratorOptions tight = opt;
    tight.rtol = std::min(opt.rtol, 1e-12);
    tight.atol = std::min(opt.atol, 1e-14);
    const Eigen::MatrixXd Jf = w.asDiagonal() * finite_difference_jacobian(start, d, 1e-3, tight);
    rep.gradient_check = jacobian_deviation(J, Jf);
    if (!(rep.gradient_check < 1e-4))
      rep.warnings.push_back("gradient check: analytic and finite-difference Jacobians differ by " +
                             format_number(rep.gradient_check));
  }

  double mu = cfg.damping;
  bool done = r.norm() <= cfg.residual_tol;
  if (done) rep.status = "residual below tolerance";
  std::size_t it = 0;
  for (; !done && it < cfg.max_iterations; ++it) {
    const Eigen::MatrixXd A = J.transpose() * J + Eigen::MatrixXd(L.cwiseAbs2().asDiagonal());
    const Eigen::VectorXd g = J.transpose() * r + L.cwiseAbs2().cwiseProduct(x);
    Eigen::VectorXd D = A.diagonal();
    const double dmax = D.maxCoeff();
    for (Eigen::Index k = 0; k < n; ++k) D[k] = std::max(D[k], 1e-12 * dmax);

    bool accepted = false;
    while (!accepted) {
      const Eigen::MatrixXd Am = A + mu * Eigen::MatrixXd(D.asDiagonal());
      const Eigen::VectorXd step = Am.ldlt().solve(-g);
      const Eigen::VectorXd xn = x + step;
      Eigen::VectorXd rn;
      double Fn = std::numeric_limits<double>::infinity();
      try {
        rn = w.cwiseProduct(residual(start.with(xn), d, opt));
        Fn = objective(rn, xn);
      } catch (const error&) {
      }
      if (std::isfinite(Fn) && Fn < F) {
        accepted = true;
        const double decrease = F - Fn;
        const double step_norm = step.norm();
        x = xn;
        r = rn;
        const double Fold = F;
        F = Fn;
        rep.history.push_back(F);
        mu = std::max(mu / 3.0, 1e-15);
        if (r.norm() <= cfg.residual_tol) {
          done = true;
          rep.status = "residual below tolerance";
        } else if (step_norm <= cfg.step_tol * (x.norm() + cfg.step_tol)) {
          done = true;
          rep.status = "step below tolerance";
        } else if (decrease <= cfg.objective_tol * Fold) {
          done = true;
          rep.status = "objective stationary";
        }
      } else {
        mu *= 4.0;
        if (mu > 1e16) {
          done = true;
          rep.status = "no descent step at maximal damping";
          break;
        }
      }
    }
    if (!done) {
      J = w.asDiagonal() * jacobian(start.with(x), d, opt);
      xJ = x;
    }
  }
  rep.iterations = it;
  rep.converged = done;
  if (!done) rep.status = "iteration limit reached";
  rep.model = start.with(x);
  rep.residual_norm = r.norm();

  // Diagnostics at the returned model.
  try {
    if (xJ != x) J = w.asDiagonal() * jacobian(rep.model, d, opt);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(J);
    const auto& s = svd.singularValues();
    rep.condition_number = s[s.size() - 1] > 0 ? s[0] / s[s.size() - 1] : std::numeric_limits<double>::infinity();
    if (rep.condition_number > 1e12)
      rep.warnings.push_back("ill-posed: Jacobian condition number " + format_number(rep.condition_number));
    const auto m = J.rows();
    const double sigma2 = m > n ? r.squaredNorm() / static_cast<double>(m - n) : std::numeric_limits<double>::quiet_NaN();
    const Eigen::MatrixXd A = J.transpose() * J + Eigen::MatrixXd(L.cwiseAbs2().asDiagonal());
    const Eigen::MatrixXd cov = A.completeOrthogonalDecomposition().pseudoInverse() * sigma2;
    for (Eigen::Index k = 0; k < n; ++k) rep.standard_errors.push_back(std::sqrt(std::max(cov(k, k), 0.0)));
  } catch (const error& e) {
    rep.warnings.push_back(std::string("diagnostics unavailable: ") + e.what());
  }
  return rep;
}

inline InverseReport reconstruct(const SpectralDataset& data, const InverseConfig& cfg) {
  const SpectralDataset d = truncate(data, cfg.data_count);
  const std::size_t M = cfg.basis_size ? cfg.basis_size : default_basis_size(d);
  return reconstruct(d, cfg, initial_model(d, M, cfg.init));
}

/// max_n max(|lambda_n - lambda~_n|, |xi_n - xi~_n|) over the first `count` indices.
inline double uniqueness_probe(const Problem& a, const Problem& b, std::size_t count, const IntegratorOptions& opt = {}) {
  if (!(a.order == b.order)) throw usage_error("uniqueness_probe: problems differ in alpha");
  const auto la = eigenvalues(a, count, opt), lb = eigenvalues(b, count, opt);
  const auto xa = second_spectrum(a, count, opt), xb = second_spectrum(b, count, opt);
  double s = 0.0;
  for (std::size_t i = 0; i < count; ++i) s = std::max({s, std::abs(la[i] - lb[i]), std::abs(xa[i] - xb[i])});
  return s;
}

/// sqrt(int (a - b)^2 d_alpha x / int b^2 d_alpha x) over [x0, x1].
inline double relative_l2_error(const Potential& a, const Potential& b, double x0 = 0.0, double x1 = pi) {
  if (!(a.order() == b.order())) throw usage_error("relative_l2_error: potentials differ in alpha");
  const Order o = a.order();
  const auto rule = gauss_rule(to_t(x0, o), x1 >= pi ? o.t_end() : to_t(x1, o), 64);
  const double num = rule([&](double t) {
    const double e = a.at_t(t) - b.at_t(t);
    return e * e;
  });
  const double den = rule([&](double t) { return b.at_t(t) * b.at_t(t); });
  return std::sqrt(num / den);
}

// JSON forms of models, configs and reports.

inline json to_json(const PotentialModel& m) {
  json j{{"alpha", m.order.value()},
         {"basis", m.basis == PotentialModel::Basis::cosine ? "cosine" : "mixed_half"},
         {"coeffs", m.coeffs},
         {"h", m.h},
         {"H", m.H},
         {"h_unknown", m.h_unknown},
         {"H_unknown", m.H_unknown}};
  if (m.tail) j["tail"] = m.tail->samples();
  return j;
}

inline PotentialModel model_from_json(const json& j) {
  const Order order = detail::order_field(j, "model");
  const json& b = detail::field(j, "basis", "model");
  if (!b.is_string()) throw parse_error("model.basis: expected a string");
  auto coeffs = detail::numbers(detail::field(j, "coeffs", "model"), "model.coeffs");
  const double h = detail::number(detail::field(j, "h", "model"), "model.h");
  const double H = detail::number(detail::field(j, "H", "model"), "model.H");
  PotentialModel m = b.get<std::string>() == "cosine" ? PotentialModel::cosine(order, coeffs.size())
                     : b.get<std::string>() == "mixed_half"
                         ? PotentialModel::mixed_half(order, coeffs.size(),
                                                      FrozenTail(order, detail::numbers(detail::field(j, "tail", "model"), "model.tail")), H)
                         : throw parse_error("model.basis: unknown basis");
  m.coeffs = std::move(coeffs);
  m.h = h;
  m.H = H;
  if (j.contains("h_unknown")) m.h_unknown = j["h_unknown"].get<bool>();
  if (j.contains("H_unknown")) m.H_unknown = j["H_unknown"].get<bool>();
  return m;
}

inline json to_json(const InverseConfig& c) {
  json j{{"basis_size", c.basis_size},     {"data_count", c.data_count},
         {"damping", c.damping},           {"max_iterations", c.max_iterations},
         {"step_tol", c.step_tol},         {"residual_tol", c.residual_tol},
         {"objective_tol", c.objective_tol}, {"init", c.init == InitMode::zero ? "zero" : "omega"},
         {"gradient_check", c.gradient_check}, {"rtol", c.integrator.rtol},
         {"atol", c.integrator.atol}};
  j["tikhonov"] = c.tikhonov ? json(*c.tikhonov) : json(nullptr);
  return j;
}

/// Every field is optional; absent fields keep their defaults.
inline InverseConfig config_from_json(const json& j) {
  if (!j.is_object()) throw parse_error("config: expected an object");
  InverseConfig c;
  auto count = [&](const char* key, std::size_t& out) {
    if (!j.contains(key)) return;
    const double v = detail::number(j[key], std::string("config.") + key);
    if (v < 0 || v != std::floor(v)) throw parse_error(std::string("config.") + key + ": expected a non-negative integer");
    out = static_cast<std::size_t>(v);
  };
  auto positive = [&](const char* key, double& out) {
    if (!j.contains(key)) return;
    out = detail::number(j[key], std::string("config.") + key);
    if (!(out > 0)) throw parse_error(std::string("config.") + key + ": must be positive");
  };
  count("basis_size", c.basis_size);
  count("data_count", c.data_count);
  count("max_iterations", c.max_iterations);
  positive("damping", c.damping);
  positive("step_tol", c.step_tol);
  positive("residual_tol", c.residual_tol);
  positive("objective_tol", c.objective_tol);
  positive("rtol", c.integrator.rtol);
  positive("atol", c.integrator.atol);
  if (j.contains("tikhonov") && !j["tikhonov"].is_null()) {
    const double t = detail::number(j["tikhonov"], "config.tikhonov");
    if (t < 0) throw parse_error("config.tikhonov: must be non-negative");
    c.tikhonov = t;
  }
  if (j.contains("init")) {
    const auto& v = j["init"];
    if (!v.is_string() || (v != "omega" && v != "zero")) throw parse_error("config.init: expected \"omega\" or \"zero\"");
    c.init = v == "zero" ? InitMode::zero : InitMode::omega;
  }
  if (j.contains("gradient_check")) {
    if (!j["gradient_check"].is_boolean()) throw parse_error("config.gradient_check: expected a boolean");
    c.gradient_check = j["gradient_check"].get<bool>();
  }
  return c;
}

inline json to_json(const InverseReport& r) {
  json se = json::object();
  for (std::size_t k = 0; k < r.standard_errors.size() && k < r.unknown_names.size(); ++k)
    se[r.unknown_names[k]] = r.standard_errors[k];
  return json{{"converged", r.converged},
              {"status", r.status},
              {"iterations", r.iterations},
              {"residual_norm", r.residual_norm},
              {"tikhonov", r.tikhonov},
              {"history", r.history},
              {"gradient_check", std::isnan(r.gradient_check) ? json(nullptr) : json(r.gradient_check)},
              {"condition_number", r.condition_number},
              {"standard_errors", se},
              {"warnings", r.warnings},
              {"model", to_json(r.model)}};
}

inline std::string history_csv(const InverseReport& r) {
  std::string s = "step,objective\n";
  for (std::size_t i = 0; i < r.history.size(); ++i) s += std::to_string(i) + "," + format_number(r.history[i]) + "\n";
  return s;
}

}  // namespace cfsl
