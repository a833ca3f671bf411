#include <cmath>
#include <algorithm>
#include <filesystem>
#include <fstream>

#include "doctest.h"

#include "cfsl/cfsl.hpp"
#include "fixtures.hpp"

using namespace cfsl;
using fixtures::trivial;

namespace {

std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "cfsl_spectral_data_test";
  std::filesystem::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_CASE("kind names") {
  for (auto k : {DataKind::weyl_samples, DataKind::two_spectra, DataKind::spectrum_with_norms, DataKind::mixed_half})
    CHECK(data_kind_from_string(to_string(k)) == k);
  CHECK(to_string(DataKind::two_spectra) == "TwoSpectra");
  CHECK_THROWS_AS(data_kind_from_string("Spectra"), parse_error);
}

TEST_CASE("generate on the trivial problem") {
  const auto p = trivial(1.0);
  const auto ts = generate(p, DataKind::two_spectra, 3);
  const auto& d = ts.get<TwoSpectra>();
  const std::vector<double> l{0, 1, 4}, x{0.25, 2.25, 6.25};
  for (std::size_t n = 0; n < 3; ++n) {
    CHECK(std::abs(d.lambdas[n] - l[n]) < 1e-10);
    CHECK(std::abs(d.xis[n] - x[n]) < 1e-10);
  }
  CHECK(ts.size() == 6);

  const auto sn = generate(p, DataKind::spectrum_with_norms, 2).get<SpectrumWithNorms>();
  CHECK(std::abs(sn.lambdas[1] - 1.0) < 1e-10);
  CHECK(std::abs(sn.norms[0] - pi) < 1e-9);
  CHECK(std::abs(sn.norms[1] - pi / 2) < 1e-9);

  const double quarter = 0.25;
  CHECK(std::abs(weyl_samples(p, std::span<const double>(&quarter, 1)).values[0]) < 1e-9);

  const auto ws = generate(p, DataKind::weyl_samples, 20).get<WeylSamples>();
  CHECK(ws.lambdas.size() == 30);
  for (std::size_t j = 0; j < ws.lambdas.size(); ++j) {
    CHECK(std::isfinite(ws.values[j]));
    const double s = ws.lambdas[j];
    // M = cot(sqrt(l) pi)/sqrt(l), -coth(sqrt(-l) pi)/sqrt(-l) below zero.
    const double exact = s > 0 ? 1.0 / std::tan(std::sqrt(s) * pi) / std::sqrt(s)
                               : -1.0 / std::tanh(std::sqrt(-s) * pi) / std::sqrt(-s);
    CHECK(std::abs(ws.values[j] - exact) < 1e-8 * std::max(1.0, std::abs(exact)));
  }
  // Midpoints 1/2, 5/2, ... between n^2 and (n+1)^2.
  CHECK(std::abs(ws.lambdas[10] - 0.5) < 1e-10);
  CHECK(std::abs(ws.lambdas[11] - 2.5) < 1e-10);

  const auto& f = fixtures::smooth_problem(0.6, 1);
  const auto mh = generate(f, DataKind::mixed_half, 5).get<MixedHalf>();
  CHECK(mh.H == f.H);
  CHECK(mh.tail.size() == 257);
  CHECK(mh.tail_node(0) == pi / 2);
  CHECK(mh.tail_node(256) == pi);
  CHECK(mh.tail[100] == f.q.at_x(mh.tail_node(100)));
}

TEST_CASE("dataset invariants") {
  const Order o(1.0);
  CHECK_THROWS_WITH_AS(SpectralDataset(o, TwoSpectra{{0, 2, 1}, {0.5}}), "payload.lambda: spectrum not increasing at index 2",
                       parse_error);
  CHECK_THROWS_AS(SpectralDataset(o, SpectrumWithNorms{{0, 1}, {1.0, -1.0}}), parse_error);
  CHECK_THROWS_AS(SpectralDataset(o, SpectrumWithNorms{{0, 1}, {1.0}}), parse_error);
  CHECK_THROWS_AS(SpectralDataset(o, WeylSamples{{0.5}, {}}), parse_error);
  CHECK_THROWS_AS(SpectralDataset(o, MixedHalf{{1, 2}, 0.0, {1, 2, 3}}), parse_error);
  CHECK(SpectralDataset(o, SpectrumWithNorms{{0, 1}, {1.0, 2.0}}).size() == 4);
}

TEST_CASE("omega estimates") {
  for (double a : {1.0, 0.7, 0.4}) {
    const auto e = eigenvalues(trivial(a), 40);
    CHECK(std::abs(estimate_omega(e, Order(a)).omega) < 1e-6);
  }
  CHECK(std::abs(estimate_omega(eigenvalues(trivial(1.0, 1.0), 40), Order(1.0)).omega - 1.0) < 0.05);
  const Order o(1.0);
  const Problem q2(o, Potential::constant(o, 2.0), 0.0, 0.0);
  CHECK(std::abs(estimate_omega(eigenvalues(q2, 40), o).omega - pi) < 0.05);
  CHECK_THROWS_AS(estimate_omega(std::vector<double>(9, 1.0), o), usage_error);

  for (const auto& f : fixtures::smooth_all()) {
    CAPTURE(f.name);
    const auto ts = generate(f.problem, DataKind::two_spectra, 40).get<TwoSpectra>();
    const auto q = [&](double x) { return f.problem.q.at_x(x); };
    const double formula = f.problem.h + f.problem.H + 0.5 * conformable_integral(q, pi, f.problem.order, 32);
    const auto est = estimate_omega(ts.lambdas, f.problem.order);
    CHECK(std::abs(est.omega - formula) < 0.05);
    // Residuals shrink along the sequence.
    CHECK(std::abs(est.residuals[38]) < std::abs(est.residuals[2]) + 1e-3);
  }
}

TEST_CASE("json round trip on every kind") {
  const auto& f = fixtures::smooth_problem(0.6, 2);
  for (auto k : {DataKind::weyl_samples, DataKind::two_spectra, DataKind::spectrum_with_norms, DataKind::mixed_half}) {
    CAPTURE(to_string(k));
    const auto d = generate(f, k, 6);
    const auto path = scratch(to_string(k) + ".json");
    write_dataset(d, path);
    CHECK(read_dataset(path) == d);
    CHECK(dataset_from_json(json::parse(to_json(d).dump())) == d);
  }
}

TEST_CASE("parse errors name the field") {
  auto load = [](const std::string& text) { return dataset_from_json(json::parse(text)); };
  CHECK_THROWS_WITH_AS(load(R"({"kind":"TwoSpectra","alpha":1.5,"payload":{"lambda":[0],"xi":[1]}})"),
                       doctest::Contains("alpha out of (0,1]"), parse_error);
  CHECK_THROWS_WITH_AS(load(R"({"kind":"TwoSpectra","alpha":1,"payload":{"lambda":[0,2,1],"xi":[1,2,3]}})"),
                       doctest::Contains("spectrum not increasing"), parse_error);
  CHECK_THROWS_WITH_AS(load(R"({"kind":"TwoSpectra","alpha":1,"payload":{"lambda":[0,1]}})"),
                       doctest::Contains("payload.xi"), parse_error);
  CHECK_THROWS_WITH_AS(load(R"({"kind":"Spectra","alpha":1,"payload":{}})"), doctest::Contains("Spectra"), parse_error);
  CHECK_THROWS_WITH_AS(load(R"({"kind":"WeylSamples","alpha":1,"payload":{"lambda":[0.5],"M":["x"]}})"),
                       doctest::Contains("payload.M[0]"), parse_error);

  const auto bad = scratch("bad.json");
  std::ofstream(bad) << "{\"kind\": ";
  CHECK_THROWS_WITH_AS(read_dataset(bad), doctest::Contains("malformed JSON"), parse_error);
  CHECK_THROWS_AS(read_dataset(scratch("missing.json")), parse_error);
}

TEST_CASE("csv export") {
  const auto d = generate(trivial(1.0), DataKind::two_spectra, 2);
  const auto csv = dataset_csv(d);
  CHECK(csv.rfind("n,lambda,xi\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
  CHECK(csv.find("\n1,") != std::string::npos);
}

TEST_CASE("problem json round trip") {
  const Order o(0.6);
  const Problem p(o, Potential::cosine(o, {0.1, -0.2, 0.3}), 0.25, -1.5);
  const auto q = problem_from_json(json::parse(to_json(p).dump()));
  CHECK(q.h == p.h);
  CHECK(q.H == p.H);
  CHECK(q.q.kind() == Potential::Kind::cosine);
  CHECK(std::equal(q.q.data().begin(), q.q.data().end(), p.q.data().begin()));
  CHECK_THROWS_WITH_AS(problem_from_json(json::parse(R"({"alpha":1,"h":0,"q":{"kind":"cosine","coeffs":[0]}})")),
                       doctest::Contains("problem.H"), parse_error);
  CHECK_THROWS_WITH_AS(problem_from_json(json::parse(R"({"alpha":1,"h":0,"H":0,"q":{"kind":"spline"}})")),
                       doctest::Contains("problem.q.kind"), parse_error);
}
