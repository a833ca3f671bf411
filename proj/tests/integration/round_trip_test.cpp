// Random truths that lie inside the basis, so a fit can reproduce them exactly.

#include <cmath>
#include <random>

#include "doctest.h"

#include "cfsl/cfsl.hpp"

using namespace cfsl;

namespace {

PotentialModel random_truth(Order o, std::uint64_t seed, std::size_t M) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  auto m = PotentialModel::cosine(o, M);
  for (std::size_t k = 0; k < M; ++k) m.coeffs[k] = 0.5 * u(rng) / (1.0 + static_cast<double>(k));
  m.h = 0.5 * u(rng);
  m.H = 0.5 * u(rng);
  return m;
}

/// max |model data - data| relative to the largest datum.
double data_misfit(const PotentialModel& m, const SpectralDataset& d) {
  double scale = 1.0;
  for (double v : detail::data_vector(d)) scale = std::max(scale, std::abs(v));
  return residual(m, d).cwiseAbs().maxCoeff() / scale;
}

void check_round_trip(const PotentialModel& truth, DataKind kind, std::size_t count) {
  const auto d = generate(truth.problem(), kind, count);
  InverseConfig cfg;
  cfg.basis_size = truth.size();
  cfg.init = InitMode::zero;
  const auto rep = reconstruct(d, cfg);
  CAPTURE(rep.status);
  CHECK(rep.converged);
  CHECK(rep.gradient_check < 1e-4);
  CHECK(data_misfit(rep.model, d) < 1e-6);
  CHECK(relative_l2_error(rep.model.potential(), truth.potential()) < 1e-2);
  CHECK(std::abs(rep.model.h - truth.h) + std::abs(rep.model.H - truth.H) < 1e-2);
}

}  // namespace

TEST_CASE("round trip: two spectra") {
  for (double a : {1.0, 0.7}) {
    CAPTURE(a);
    check_round_trip(random_truth(Order(a), 31, 5), DataKind::two_spectra, 12);
  }
}

TEST_CASE("round trip: spectrum with norming constants") {
  for (double a : {1.0, 0.7}) {
    CAPTURE(a);
    check_round_trip(random_truth(Order(a), 32, 5), DataKind::spectrum_with_norms, 12);
  }
}

TEST_CASE("round trip: weyl samples") {
  for (double a : {1.0, 0.7}) {
    CAPTURE(a);
    check_round_trip(random_truth(Order(a), 33, 5), DataKind::weyl_samples, 14);
  }
}

TEST_CASE("round trip: mixed half") {
  // Truth built from the mixed-half basis over a random smooth tail.
  for (double a : {1.0, 0.7}) {
    CAPTURE(a);
    const Order o(a);
    const auto q = random_smooth_potential(o, 34);
    std::vector<double> tail(257);
    for (std::size_t i = 0; i < tail.size(); ++i) tail[i] = q.at_x(0.5 * pi + 0.5 * pi * static_cast<double>(i) / 256.0);
    auto truth = PotentialModel::mixed_half(o, 4, FrozenTail(o, tail), 0.35);
    truth.coeffs = {0.2, -0.1, 0.05, 0.02};
    truth.h = -0.25;
    const auto d = generate(truth.problem(), DataKind::mixed_half, 14);
    InverseConfig cfg;
    cfg.basis_size = 4;
    cfg.init = InitMode::zero;
    const auto rep = reconstruct(d, cfg);
    CHECK(rep.converged);
    CHECK(rep.gradient_check < 1e-4);
    CHECK(data_misfit(rep.model, d) < 1e-6);
    CHECK(relative_l2_error(rep.model.potential(), truth.potential(), 0.0, pi / 2) < 1e-2);
    CHECK(std::abs(rep.model.h - truth.h) < 1e-2);
  }
}
