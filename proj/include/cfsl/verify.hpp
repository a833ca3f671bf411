#pragma once

// Self-consistency suite over the forward solver, used by `cfsl verify` and the tests.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "cfsl/conformable.hpp"
#include "cfsl/errors.hpp"
#include "cfsl/forward.hpp"
#include "cfsl/problem.hpp"
#include "cfsl/spectral_data.hpp"

namespace cfsl {

/// q(x) = sum_{k<terms} (a_k cos kx + b_k sin kx) / (1+k)^2, a_k, b_k uniform in [-1, 1].
inline Potential random_smooth_potential(Order order, std::uint64_t seed, std::size_t terms = 5) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> a(terms), b(terms);
  for (std::size_t k = 0; k < terms; ++k) {
    const double s = 1.0 / ((1.0 + static_cast<double>(k)) * (1.0 + static_cast<double>(k)));
    a[k] = s * u(rng);
    b[k] = k == 0 ? 0.0 : s * u(rng);
  }
  return Potential::callable(
      order,
      [a, b](double x) {
        double s = 0.0;
        for (std::size_t k = 0; k < a.size(); ++k) {
          const double kx = static_cast<double>(k) * x;
          s += a[k] * std::cos(kx) + b[k] * std::sin(kx);
        }
        return s;
      },
      "random(seed=" + std::to_string(seed) + ")");
}

struct CheckResult {
  std::string name;
  double measured = 0.0;
  double tolerance = 0.0;
  bool pass = false;
  /// Set when the check could not run; the check then fails.
  std::string error;
};

struct VerifyOptions {
  std::uint64_t seed = 1;
  IntegratorOptions integrator{};
};

namespace detail {

/// Spectral parameters drawn uniformly from the inner 80% of random spectral gaps
/// (and from below the spectrum), so none sits near a pole.
inline std::vector<double> off_spectrum_samples(std::span<const double> eigs, std::size_t count, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> gap(0, eigs.size() - 1);
  std::uniform_real_distribution<double> u(0.1, 0.9);
  std::vector<double> out;
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t n = gap(rng);
    const double lo = n == 0 ? eigs[0] - 5.0 : eigs[n - 1];
    const double hi = eigs[n];
    out.push_back(lo + u(rng) * (hi - lo));
  }
  return out;
}

template <typename F>
CheckResult run_check(std::string name, double tol, F&& measure) {
  CheckResult r{std::move(name), 0.0, tol, false, {}};
  try {
    r.measured = measure();
    r.pass = r.measured < tol;
  } catch (const error& e) {
    r.measured = std::numeric_limits<double>::quiet_NaN();
    r.error = e.what();
  }
  return r;
}

inline double relative_std(const std::vector<double>& w) {
  double mean = 0.0;
  for (double v : w) mean += v;
  mean /= static_cast<double>(w.size());
  double var = 0.0;
  for (double v : w) var += (v - mean) * (v - mean);
  return std::sqrt(var / static_cast<double>(w.size() - 1)) / std::abs(mean);
}

}  // namespace detail

/// Runs the identity suite on p: Wronskian constancy, agreement of the two
/// characteristic-function evaluations, the norming identity
/// beta_n alpha_n = -Delta'(lambda_n), the first spectral moment, the Weyl
/// decomposition psi/Delta = S - M phi and the Lagrange identity.
inline std::vector<CheckResult> verify_identities(const Problem& p, const VerifyOptions& vo = {}) {
  const auto& opt = vo.integrator;
  std::mt19937_64 rng(vo.seed);
  std::vector<double> eigs;
  std::vector<CheckResult> out;
  try {
    eigs = eigenvalues(p, 40, opt);
  } catch (const error& e) {
    for (const char* name : {"wronskian_constancy", "delta_consistency", "norming_identity", "omega_asymptotics",
                             "weyl_identity", "lagrange_identity"})
      out.push_back({name, std::numeric_limits<double>::quiet_NaN(), 0.0, false, e.what()});
    return out;
  }
  const std::span<const double> low(eigs.data(), 20);
  const auto lams = detail::off_spectrum_samples(low, 20, rng);

  out.push_back(detail::run_check("wronskian_constancy", 1e-9, [&] {
    double worst = 0.0;
    for (std::size_t i = 0; i < 3; ++i) worst = std::max(worst, detail::relative_std(wronskian_profile(p, lams[i], 201, opt)));
    return worst;
  }));
  out.push_back(detail::run_check("delta_consistency", 1e-8, [&] {
    double worst = 0.0;
    for (double l : lams) {
      const double v = char_delta(p, l, opt);
      worst = std::max(worst, std::abs(v - delta_from_psi(p, l, opt)) / std::abs(v));
    }
    return worst;
  }));
  out.push_back(detail::run_check("norming_identity", 1e-6, [&] {
    double worst = 0.0;
    for (const auto& r : norming_constants(p, std::span<const double>(eigs.data(), 11), opt))
      worst = std::max(worst, r.lemma_residual());
    return worst;
  }));
  out.push_back(detail::run_check("omega_asymptotics", 0.05, [&] {
    return std::abs(estimate_omega(eigs, p.order).omega - p.omega());
  }));
  out.push_back(detail::run_check("weyl_identity", 1e-8, [&] {
    double worst = 0.0;
    for (std::size_t i = 0; i < 5; ++i) worst = std::max(worst, weyl_identity_residual(p, lams[i], 201, opt));
    return worst;
  }));
  out.push_back(detail::run_check("lagrange_identity", 1e-7, [&] {
    const Problem other(p.order, random_smooth_potential(p.order, vo.seed + 1), p.h + 0.25, p.H - 0.25);
    double worst = 0.0;
    for (std::size_t i = 0; i < 3; ++i) {
      const auto s = lagrange_identity(p, other, lams[i], opt);
      worst = std::max(worst, std::abs(s.bracket - s.integral));
    }
    return worst;
  }));
  return out;
}

}  // namespace cfsl
