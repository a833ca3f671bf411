// Command-line front end.
//
// Exit codes: 0 success, 1 unexpected failure, 2 parse or usage error
// (including underdetermined fits), 3 solver failure, 4 pole of the Weyl
// function, 5 inverse fit did not converge (report still written),
// 6 verification failure.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "cfsl/cfsl.hpp"

namespace {

enum Exit : int { ok = 0, unexpected = 1, bad_input = 2, solver = 3, pole = 4, no_convergence = 5, verify_failed = 6 };

void setup_logging() {
  auto logger = spdlog::stderr_logger_st("cfsl");
  logger->set_pattern("cfsl %l: %v");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::warn);
  if (const char* env = std::getenv("CFSL_LOG")) {
    const std::string v = env;
    if (v == "error") spdlog::set_level(spdlog::level::err);
    else if (v == "info") spdlog::set_level(spdlog::level::info);
    else if (v == "debug") spdlog::set_level(spdlog::level::debug);
    else spdlog::warn("ignoring CFSL_LOG={} (expected error, info or debug)", v);
  }
}

/// Writes to `path`, or to stdout when it is empty.
void emit(const std::string& path, const std::string& text) {
  if (path.empty()) {
    std::cout << text;
    return;
  }
  cfsl::write_text_file(path, text);
  spdlog::info("wrote {}", path);
}

std::string csv_list(const std::vector<std::vector<double>>& cols, const std::string& header) {
  std::ostringstream os;
  os << header << '\n';
  const std::size_t rows = cols.empty() ? 0 : cols[0].size();
  for (std::size_t i = 0; i < rows; ++i) {
    os << i;
    for (const auto& c : cols) os << ',' << (i < c.size() ? cfsl::format_number(c[i]) : "");
    os << '\n';
  }
  return os.str();
}

/// "0.25,1,4" or a path to a JSON array / whitespace-separated list.
std::vector<double> parse_lambdas(const std::string& spec) {
  std::vector<double> out;
  if (std::filesystem::exists(spec)) {
    std::ifstream in(spec);
    std::stringstream buf;
    buf << in.rdbuf();
    const std::string text = buf.str();
    const auto first = text.find_first_not_of(" \t\r\n");
    if (first != std::string::npos && text[first] == '[') {
      try {
        return cfsl::detail::numbers(cfsl::json::parse(text), "lambdas");
      } catch (const cfsl::json::parse_error& e) {
        throw cfsl::parse_error(spec + ": malformed JSON: " + e.what());
      }
    }
    std::istringstream is(text);
    std::string tok;
    while (is >> tok) out.push_back(std::stod(tok));
    return out;
  }
  std::istringstream is(spec);
  std::string tok;
  while (std::getline(is, tok, ',')) {
    std::size_t used = 0;
    double v = 0;
    try {
      v = std::stod(tok, &used);
    } catch (const std::exception&) {
      throw cfsl::parse_error("--lambdas: cannot parse '" + tok + "'");
    }
    if (tok.find_first_not_of(" \t", used) != std::string::npos)
      throw cfsl::parse_error("--lambdas: cannot parse '" + tok + "'");
    out.push_back(v);
  }
  if (out.empty()) throw cfsl::parse_error("--lambdas: empty list");
  return out;
}

struct Common {
  std::string output;
  std::string format = "json";
};

int cmd_forward(const std::string& problem_path, double lambda, const std::string& which, std::size_t points,
                const Common& c) {
  const auto p = cfsl::read_problem(problem_path);
  const auto tr = which == "psi" ? cfsl::solve_psi(p, lambda) : which == "S" ? cfsl::solve_S(p, lambda) : cfsl::solve_phi(p, lambda);
  emit(c.output, cfsl::trajectory_csv(tr, points));
  return ok;
}

int cmd_spectrum(const std::string& problem_path, std::size_t count, bool second, const Common& c) {
  const auto p = cfsl::read_problem(problem_path);
  const auto eigs = cfsl::eigenvalues(p, count);
  std::vector<double> xis;
  if (second) xis = cfsl::second_spectrum(p, count);

  cfsl::json omega;
  if (count >= 10) {
    const auto e = cfsl::estimate_omega(eigs, p.order);
    omega = {{"estimate", e.omega}, {"formula", p.omega()}, {"residuals", e.residuals}};
    spdlog::info("omega estimate {} (formula {})", e.omega, p.omega());
  }
  if (c.format == "csv") {
    emit(c.output, second ? csv_list({eigs, xis}, "n,lambda,xi") : csv_list({eigs}, "n,lambda"));
    return ok;
  }
  cfsl::json j;
  if (second) j["kind"] = "TwoSpectra";
  j["alpha"] = p.order.value();
  j["payload"] = {{"lambda", eigs}};
  if (second) j["payload"]["xi"] = xis;
  j["omega"] = omega;
  emit(c.output, j.dump(2) + "\n");
  return ok;
}

int cmd_weyl(const std::string& problem_path, const std::string& lambdas, const Common& c) {
  const auto p = cfsl::read_problem(problem_path);
  const auto at = parse_lambdas(lambdas);
  const cfsl::SpectralDataset d(p.order, cfsl::weyl_samples(p, at));
  emit(c.output, c.format == "csv" ? cfsl::dataset_csv(d) : cfsl::to_json(d).dump(2) + "\n");
  return ok;
}

int cmd_generate(const std::string& problem_path, const std::string& kind, std::size_t count, const Common& c) {
  const auto p = cfsl::read_problem(problem_path);
  const auto d = cfsl::generate(p, cfsl::data_kind_from_string(kind), count);
  emit(c.output, c.format == "csv" ? cfsl::dataset_csv(d) : cfsl::to_json(d).dump(2) + "\n");
  return ok;
}

int cmd_invert(const std::string& dataset_path, const std::string& config_path, const std::string& history,
               const Common& c) {
  const auto d = cfsl::read_dataset(dataset_path);
  const auto cfg = config_path.empty() ? cfsl::InverseConfig{} : cfsl::config_from_json(cfsl::read_json_file(config_path));
  const auto rep = cfsl::reconstruct(d, cfg);
  for (const auto& w : rep.warnings) spdlog::warn("{}", w);
  spdlog::info("{} after {} iterations, residual {}", rep.status, rep.iterations, rep.residual_norm);
  emit(c.output, cfsl::to_json(rep).dump(2) + "\n");
  if (!history.empty()) cfsl::write_text_file(history, cfsl::history_csv(rep));
  if (!rep.converged) {
    spdlog::error("inverse fit did not converge: {}", rep.status);
    return no_convergence;
  }
  return ok;
}

int cmd_verify(const std::string& problem_path, std::uint64_t seed, std::optional<double> rtol) {
  const auto p = cfsl::read_problem(problem_path);
  cfsl::VerifyOptions vo;
  vo.seed = seed;
  if (rtol) vo.integrator.rtol = *rtol;
  bool all = true;
  for (const auto& r : cfsl::verify_identities(p, vo)) {
    all = all && r.pass;
    std::cout << (r.pass ? "PASS " : "FAIL ") << r.name << " measured=" << cfsl::format_number(r.measured)
              << " tol=" << cfsl::format_number(r.tolerance);
    if (!r.error.empty()) std::cout << " error=\"" << r.error << '"';
    std::cout << '\n';
  }
  return all ? ok : verify_failed;
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"Conformable fractional Sturm-Liouville toolkit"};
  app.require_subcommand(1);

  Common common;
  auto add_output = [&](CLI::App* sub, bool formats) {
    sub->add_option("-o,--output", common.output, "Output file (default: standard output)");
    if (formats) sub->add_option("--format", common.format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
  };

  std::string problem, dataset, config, which = "phi", lambdas, kind, history;
  double lambda = 0.0;
  std::size_t count = 10, points = 201;
  bool second = false;
  std::uint64_t seed = 1;
  std::optional<double> rtol;

  auto* fwd = app.add_subcommand("forward", "Solution phi, psi or S at one lambda, as CSV (t, x, u, du)");
  fwd->add_option("problem", problem, "Problem JSON")->required();
  fwd->add_option("--lambda", lambda, "Spectral parameter")->required();
  fwd->add_option("--solution", which, "phi, psi or S")->check(CLI::IsMember({"phi", "psi", "S"}));
  fwd->add_option("--points", points, "Number of t samples")->check(CLI::Range(2, 1000000));
  add_output(fwd, false);

  auto* spec = app.add_subcommand("spectrum", "Eigenvalues, optional second spectrum and omega summary");
  spec->add_option("problem", problem, "Problem JSON")->required();
  spec->add_option("--count", count, "Number of eigenvalues")->check(CLI::Range(1, 100000));
  spec->add_flag("--second", second, "Also compute the spectrum with y(0) = 0");
  add_output(spec, true);

  auto* weyl = app.add_subcommand("weyl", "Weyl function samples");
  weyl->add_option("problem", problem, "Problem JSON")->required();
  weyl->add_option("--lambdas", lambdas, "Comma-separated list or file")->required();
  add_output(weyl, true);

  auto* gen = app.add_subcommand("generate", "Synthetic dataset from a problem");
  gen->add_option("problem", problem, "Problem JSON")->required();
  gen->add_option("--kind", kind, "WeylSamples, TwoSpectra, SpectrumWithNorms or MixedHalf")
      ->required()
      ->check(CLI::IsMember({"WeylSamples", "TwoSpectra", "SpectrumWithNorms", "MixedHalf"}));
  gen->add_option("--count", count, "Data count per list")->check(CLI::Range(1, 100000));
  add_output(gen, true);

  auto* inv = app.add_subcommand("invert", "Reconstruct (q, h, H) from a dataset");
  inv->add_option("dataset", dataset, "Dataset JSON")->required();
  inv->add_option("config", config, "Inverse configuration JSON (optional)");
  inv->add_option("--history", history, "Also write the objective history as CSV");
  add_output(inv, false);

  auto* ver = app.add_subcommand("verify", "Run the identity suite and print PASS/FAIL per identity");
  ver->add_option("problem", problem, "Problem JSON")->required();
  ver->add_option("--seed", seed, "Seed for the random spectral parameters");
  ver->add_option("--rtol", rtol, "Integrator relative tolerance")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? ok : bad_input;
  }

  try {
    if (*fwd) return cmd_forward(problem, lambda, which, points, common);
    if (*spec) return cmd_spectrum(problem, count, second, common);
    if (*weyl) return cmd_weyl(problem, lambdas, common);
    if (*gen) return cmd_generate(problem, kind, count, common);
    if (*inv) return cmd_invert(dataset, config, history, common);
    if (*ver) return cmd_verify(problem, seed, rtol);
  } catch (const cfsl::pole_error& e) {
    spdlog::error("pole: {}", e.what());
    return pole;
  } catch (const cfsl::parse_error& e) {
    spdlog::error("{}", e.what());
    return bad_input;
  } catch (const cfsl::usage_error& e) {
    spdlog::error("{}", e.what());
    return bad_input;
  } catch (const cfsl::error& e) {
    spdlog::error("solver failure: {}", e.what());
    return solver;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return unexpected;
  }
  return unexpected;
}
