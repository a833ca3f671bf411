#include <cmath>

#include "doctest.h"

#include "cfsl/cfsl.hpp"
#include "fixtures.hpp"

using namespace cfsl;
using fixtures::trivial;

namespace {

PotentialModel cosine_model(Order o, std::vector<double> c, double h, double H) {
  auto m = PotentialModel::cosine(o, c.size());
  m.coeffs = std::move(c);
  m.h = h;
  m.H = H;
  return m;
}

}  // namespace

TEST_CASE("model basics") {
  const Order o(0.7);
  const auto m = cosine_model(o, {0.5, -0.25, 0.1}, 0.3, -0.2);
  CHECK(m.unknowns() == 5);
  CHECK(m.unknown_names() == std::vector<std::string>{"c0", "c1", "c2", "h", "H"});
  CHECK(m.with(m.pack()).coeffs == m.coeffs);
  const double t = 0.9, T = o.t_end();
  CHECK(std::abs(m.q_at_t(t) - (0.5 - 0.25 * std::cos(pi * t / T) + 0.1 * std::cos(2 * pi * t / T))) < 1e-15);
  CHECK(std::abs(m.potential().at_t(t) - m.q_at_t(t)) < 1e-15);
  CHECK_THROWS_AS(PotentialModel::cosine(o, 0), usage_error);
  CHECK_THROWS_AS(m.with(Eigen::VectorXd::Zero(2)), usage_error);
}

TEST_CASE("residual at the truth vanishes and shifts by a constant") {
  const Order o(1.0);
  const auto truth = cosine_model(o, {0.2, 0.4, -0.3}, 0.3, -0.2);
  const auto d = generate(truth.problem(), DataKind::two_spectra, 8);
  CHECK(residual(truth, d).cwiseAbs().maxCoeff() < 1e-9);

  auto shifted = truth;
  shifted.coeffs[0] += 0.15;
  const auto r = residual(shifted, d);
  CHECK(r.size() == 16);
  for (Eigen::Index i = 0; i < r.size(); ++i) CHECK(std::abs(r[i] - 0.15) < 1e-8);
}

TEST_CASE("residual matches independently computed eigenvalue gaps") {
  const Order o(1.0);
  const Problem truth(o, Potential::callable(o, [](double x) { return std::cos(x); }), 0.0, 0.0);
  const auto d = generate(truth, DataKind::two_spectra, 6);
  const auto zero = cosine_model(o, {0.0, 0.0}, 0.0, 0.0);
  const auto r = residual(zero, d);
  CHECK(r.norm() > 0.0);
  const auto a = eigenvalues(trivial(1.0), 6), b = eigenvalues(truth, 6);
  for (std::size_t n = 0; n < 6; ++n) CHECK(std::abs(r[static_cast<Eigen::Index>(n)] - (a[n] - b[n])) < 1e-9);
}

TEST_CASE("residual rejects mismatched models") {
  const auto d = generate(trivial(1.0), DataKind::two_spectra, 4);
  CHECK_THROWS_AS(residual(PotentialModel::cosine(Order(0.5), 2), d), usage_error);
  const auto mh = generate(fixtures::smooth_problem(1.0, 1), DataKind::mixed_half, 4);
  CHECK_THROWS_AS(residual(PotentialModel::cosine(Order(1.0), 2), mh), usage_error);
}

TEST_CASE("weights") {
  const auto d = generate(trivial(1.0), DataKind::spectrum_with_norms, 3);
  const auto w = residual_weights(d);
  CHECK(w.size() == 6);
  CHECK(w[0] == 1.0);
  CHECK(w[2] == doctest::Approx(1.0 / 3));
  CHECK(w[5] == 1.0);
}

TEST_CASE("jacobian closed forms at the zero potential") {
  const Order o(1.0);
  const auto d = generate(trivial(1.0), DataKind::two_spectra, 5);
  const auto m = cosine_model(o, {0.0, 0.0, 0.0}, 0.0, 0.0);
  const auto J = jacobian(m, d);
  // Columns c0, c1, c2, h, H; rows lambda_0..4 then xi_0..4.
  for (Eigen::Index n = 0; n < 10; ++n) CHECK(std::abs(J(n, 0) - 1.0) < 1e-9);
  CHECK(std::abs(J(0, 3) - 1.0 / pi) < 1e-9);
  for (Eigen::Index n = 1; n < 5; ++n) CHECK(std::abs(J(n, 3) - 2.0 / pi) < 1e-9);
  for (Eigen::Index n = 1; n < 5; ++n) CHECK(std::abs(J(n, 4) - 2.0 / pi) < 1e-9);
  // Dirichlet rows do not see h.
  for (Eigen::Index n = 5; n < 10; ++n) CHECK(J(n, 3) == 0.0);
  // d lambda_n / d c_k = (2/pi) int cos^2(nt) cos(kt) dt: 1/2 when k = 2n, n >= 1.
  CHECK(std::abs(J(1, 2) - 0.5) < 1e-9);
  CHECK(std::abs(J(2, 1)) < 1e-9);
}

TEST_CASE("analytic jacobian agrees with finite differences") {
  const Order o(0.7);
  const auto truth = cosine_model(o, {0.3, -0.2, 0.15, 0.05}, 0.4, -0.3);
  const auto model = cosine_model(o, {0.1, 0.1, -0.05, 0.0}, 0.2, 0.1);
  IntegratorOptions tight;
  tight.rtol = 1e-12;
  tight.atol = 1e-14;
  for (auto k : {DataKind::two_spectra, DataKind::spectrum_with_norms, DataKind::weyl_samples}) {
    CAPTURE(to_string(k));
    const auto d = generate(truth.problem(), k, 8);
    const auto Ja = jacobian(model, d);
    const auto Jf = finite_difference_jacobian(model, d, 1e-3, tight);
    CHECK(jacobian_deviation(Ja, Jf) < 1e-4);
  }
  const auto& f = fixtures::smooth_problem(0.7, 1);
  const auto mh = generate(f, DataKind::mixed_half, 10);
  auto start = initial_model(mh, 5, InitMode::zero);
  start.coeffs = {0.1, -0.05, 0.02, 0.0, 0.01};
  start.h = 0.8;
  CHECK(jacobian_deviation(jacobian(start, mh), finite_difference_jacobian(start, mh, 1e-3, tight)) < 1e-4);
}

TEST_CASE("truth is a fixed point") {
  const Order o(1.0);
  const auto truth = cosine_model(o, {0.2, 0.4, -0.3}, 0.3, -0.2);
  const auto d = generate(truth.problem(), DataKind::two_spectra, 6);
  InverseConfig cfg;
  cfg.tikhonov = 0.0;
  const auto rep = reconstruct(d, cfg, truth);
  CHECK(rep.converged);
  CHECK(rep.iterations <= 2);
  CHECK(rep.residual_norm < 1e-9);
  CHECK(rep.gradient_check < 1e-4);
}

TEST_CASE("underdetermined fits are refused") {
  const auto d = generate(trivial(1.0), DataKind::two_spectra, 2);
  InverseConfig cfg;
  cfg.basis_size = 6;
  CHECK_THROWS_WITH_AS(reconstruct(d, cfg), doctest::Contains("underdetermined"), usage_error);
  cfg.basis_size = 2;
  cfg.damping = -1.0;
  CHECK_THROWS_AS(reconstruct(d, cfg), usage_error);
}

TEST_CASE("small two-spectra round trip") {
  const Order o(1.0);
  const auto truth = cosine_model(o, {0.1, 0.3, 0.0, -0.2}, 0.3, -0.2);
  const auto d = generate(truth.problem(), DataKind::two_spectra, 10);
  InverseConfig cfg;
  cfg.basis_size = 4;
  cfg.init = InitMode::zero;
  const auto rep = reconstruct(d, cfg);
  CHECK(rep.converged);
  for (std::size_t k = 0; k < 4; ++k) CHECK(std::abs(rep.model.coeffs[k] - truth.coeffs[k]) < 1e-4);
  CHECK(std::abs(rep.model.h - 0.3) < 1e-4);
  CHECK(std::abs(rep.model.H + 0.2) < 1e-4);
  // Accepted steps never raise the objective.
  for (std::size_t i = 1; i < rep.history.size(); ++i) CHECK(rep.history[i] <= rep.history[i - 1]);
  CHECK(rep.standard_errors.size() == 6);
  CHECK(rep.condition_number > 1.0);
}

TEST_CASE("mixed-half fits keep the tail bit for bit") {
  const auto& f = fixtures::smooth_problem(0.7, 1);
  const auto d = generate(f, DataKind::mixed_half, 12);
  InverseConfig cfg;
  cfg.basis_size = 4;
  cfg.init = InitMode::zero;
  const auto rep = reconstruct(d, cfg);
  const auto& mh = d.get<MixedHalf>();
  const auto q = rep.model.potential();
  for (std::size_t i = 0; i < mh.tail.size(); ++i) CHECK(q.at_x(mh.tail_node(i)) == mh.tail[i]);
  CHECK(rep.model.H == mh.H);
  CHECK_FALSE(rep.model.H_unknown);
  CHECK(rep.unknown_names.back() == "h");
  CHECK(std::abs(rep.model.h - f.h) < 2e-2);
}

TEST_CASE("initial models") {
  const Order o(1.0);
  const Problem p(o, Potential::constant(o, 0.8), 0.0, 0.0);
  const auto d = generate(p, DataKind::two_spectra, 20);
  const auto m = initial_model(d, 4, InitMode::omega);
  // omega = 1/2 int 0.8 dt = 0.4 pi, so c0 = 2 omega / T = 0.8.
  CHECK(std::abs(m.coeffs[0] - 0.8) < 1e-2);
  CHECK(initial_model(d, 4, InitMode::zero).coeffs[0] == 0.0);
  CHECK(default_basis_size(d) == 10);
}

TEST_CASE("uniqueness probe") {
  const Order o(1.0);
  const auto& p = fixtures::smooth_problem(1.0, 0);
  CHECK(uniqueness_probe(p, p, 10) < 1e-10);
  const Problem shifted(o, p.q.shifted(0.1), p.h, p.H);
  CHECK(std::abs(uniqueness_probe(p, shifted, 10) - 0.1) < 1e-8);
  const Problem bump(o, Potential::callable(o, [](double x) { return x < pi / 2 ? std::sin(x) : 0.0; }), 0.0, 0.0);
  CHECK(uniqueness_probe(trivial(1.0), bump, 20) > 1e-4);
  CHECK_THROWS_AS(uniqueness_probe(p, trivial(0.5), 3), usage_error);
}

TEST_CASE("relative l2 error") {
  const Order o(0.6);
  const auto a = Potential::callable(o, [](double x) { return 1.0 + x; });
  CHECK(relative_l2_error(a, a) == 0.0);
  const auto b = Potential::callable(o, [](double x) { return 1.1 * (1.0 + x); });
  CHECK(std::abs(relative_l2_error(b, a) - 0.1) < 1e-12);
}

TEST_CASE("json forms") {
  const Order o(0.7);
  auto m = cosine_model(o, {0.1, 0.2}, 0.3, 0.4);
  m.H_unknown = false;
  const auto back = model_from_json(json::parse(to_json(m).dump()));
  CHECK(back.coeffs == m.coeffs);
  CHECK(back.h == m.h);
  CHECK_FALSE(back.H_unknown);

  InverseConfig c;
  c.basis_size = 8;
  c.tikhonov = 1e-7;
  c.init = InitMode::zero;
  const auto cb = config_from_json(json::parse(to_json(c).dump()));
  CHECK(cb.basis_size == 8);
  CHECK(*cb.tikhonov == 1e-7);
  CHECK(cb.init == InitMode::zero);
  CHECK(config_from_json(json::object()).damping == InverseConfig{}.damping);
  CHECK_THROWS_WITH_AS(config_from_json(json::parse(R"({"step_tol": 0})")), doctest::Contains("config.step_tol"), parse_error);
  CHECK_THROWS_AS(config_from_json(json::parse(R"({"basis_size": 2.5})")), parse_error);
  CHECK_THROWS_AS(config_from_json(json::parse(R"({"init": "random"})")), parse_error);
}
