#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "doctest.h"

#include "cfsl/cfsl.hpp"

namespace fs = std::filesystem;
using cfsl::json;

namespace {

struct Run {
  int code;
  std::string out;
};

const fs::path& workdir() {
  static const fs::path dir = [] {
    auto d = fs::temp_directory_path() / "cfsl_cli_test";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

Run cli(const std::string& args) {
  const auto out = workdir() / "stdout.txt";
  const std::string cmd = std::string(CFSL_CLI_PATH) + " " + args + " > " + out.string() + " 2> " +
                          (workdir() / "stderr.txt").string();
  const int status = std::system(cmd.c_str());
  std::ifstream in(out);
  std::stringstream s;
  s << in.rdbuf();
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, s.str()};
}

std::string data(const std::string& name) { return std::string(CFSL_DEMO_DATA) + "/" + name; }

std::string tmp(const std::string& name) { return (workdir() / name).string(); }

}  // namespace

TEST_CASE("spectrum of the trivial problem") {
  const auto r = cli("spectrum " + data("trivial.json") + " --count 4 -o " + tmp("spec.json"));
  REQUIRE(r.code == 0);
  const auto j = cfsl::read_json_file(tmp("spec.json"));
  const std::vector<double> want{0, 1, 4, 9};
  const auto got = j["payload"]["lambda"].get<std::vector<double>>();
  REQUIRE(got.size() == 4);
  for (std::size_t n = 0; n < 4; ++n) CHECK(std::abs(got[n] - want[n]) < 1e-10);
  CHECK(j["omega"].is_null());

  const auto s = cli("spectrum " + data("trivial.json") + " --count 4 --second");
  REQUIRE(s.code == 0);
  const auto xi = json::parse(s.out)["payload"]["xi"].get<std::vector<double>>();
  const std::vector<double> wx{0.25, 2.25, 6.25, 12.25};
  for (std::size_t n = 0; n < 4; ++n) CHECK(std::abs(xi[n] - wx[n]) < 1e-10);

  const auto big = cli("spectrum " + data("cos_x.json") + " --count 20");
  REQUIRE(big.code == 0);
  CHECK(json::parse(big.out)["omega"]["estimate"].is_number());
}

TEST_CASE("identical inputs give identical bytes") {
  const auto a = cli("generate " + data("cos_x.json") + " --kind TwoSpectra --count 5");
  const auto b = cli("generate " + data("cos_x.json") + " --kind TwoSpectra --count 5");
  CHECK(a.code == 0);
  CHECK(a.out == b.out);
  const auto d = cfsl::dataset_from_json(json::parse(a.out));
  CHECK(d.kind() == cfsl::DataKind::two_spectra);
}

TEST_CASE("malformed input exits 2 without output") {
  { std::ofstream(tmp("broken.json")) << "{\"alpha\": 1, "; }
  fs::remove(tmp("never.json"));
  const auto r = cli("spectrum " + tmp("broken.json") + " -o " + tmp("never.json"));
  CHECK(r.code == 2);
  CHECK_FALSE(fs::exists(tmp("never.json")));
  CHECK(cli("spectrum --count 3").code == 2);
  CHECK(cli("nonsense").code == 2);
  { std::ofstream(tmp("alpha.json")) << R"({"alpha": 1.5, "h": 0, "H": 0, "q": {"kind": "cosine", "coeffs": [0]}})"; }
  CHECK(cli("spectrum " + tmp("alpha.json")).code == 2);
}

TEST_CASE("weyl subcommand") {
  const auto r = cli("weyl " + data("trivial.json") + " --lambdas 0.25");
  REQUIRE(r.code == 0);
  CHECK(std::abs(json::parse(r.out)["payload"]["M"][0].get<double>()) < 1e-9);
  CHECK(cli("weyl " + data("trivial.json") + " --lambdas 1").code == 4);

  // Ten gap midpoints of the trivial spectrum, given as a file.
  std::ofstream(tmp("mid.json")) << "[0.5, 2.5, 6.5, 12.5, 20.5, 30.5, 42.5, 56.5, 72.5, 90.5]";
  const auto batch = cli("weyl " + data("trivial.json") + " --lambdas " + tmp("mid.json"));
  REQUIRE(batch.code == 0);
  const auto m = json::parse(batch.out)["payload"]["M"];
  CHECK(m.size() == 10);
  for (const auto& v : m) CHECK(std::isfinite(v.get<double>()));
  CHECK(cli("weyl " + data("trivial.json") + " --lambdas 0.5,abc").code == 2);
}

TEST_CASE("forward subcommand writes a trajectory") {
  const auto r = cli("forward " + data("trivial.json") + " --lambda 4 --points 5");
  REQUIRE(r.code == 0);
  std::istringstream in(r.out);
  std::string header, line;
  std::getline(in, header);
  CHECK(header == "t,x,u,du");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 5);
}

TEST_CASE("invert subcommand") {
  REQUIRE(cli("generate " + data("cos_x.json") + " --kind TwoSpectra --count 12 -o " + tmp("ts.json")).code == 0);
  { std::ofstream(tmp("cfg.json")) << R"({"basis_size": 4, "init": "zero", "max_iterations": 60})"; }
  const auto r = cli("invert " + tmp("ts.json") + " " + tmp("cfg.json") + " -o " + tmp("report.json") + " --history " +
                     tmp("history.csv"));
  CHECK((r.code == 0 || r.code == 5));
  const auto rep = cfsl::read_json_file(tmp("report.json"));
  CHECK(rep["converged"].get<bool>() == (r.code == 0));
  CHECK(rep["model"]["coeffs"].size() == 4);
  CHECK(fs::exists(tmp("history.csv")));

  { std::ofstream(tmp("big.json")) << R"({"basis_size": 40})"; }
  CHECK(cli("invert " + tmp("ts.json") + " " + tmp("big.json")).code == 2);

  // One iteration cannot converge from zero: exit 5 and a report anyway.
  { std::ofstream(tmp("short.json")) << R"({"basis_size": 4, "init": "zero", "max_iterations": 1})"; }
  fs::remove(tmp("partial.json"));
  CHECK(cli("invert " + tmp("ts.json") + " " + tmp("short.json") + " -o " + tmp("partial.json")).code == 5);
  CHECK(fs::exists(tmp("partial.json")));
}

TEST_CASE("mixed-half report echoes the tail") {
  REQUIRE(cli("generate " + data("cos_x.json") + " --kind MixedHalf --count 10 -o " + tmp("mh.json")).code == 0);
  { std::ofstream(tmp("mhcfg.json")) << R"({"basis_size": 3, "init": "zero"})"; }
  cli("invert " + tmp("mh.json") + " " + tmp("mhcfg.json") + " -o " + tmp("mhrep.json"));
  const auto rep = cfsl::read_json_file(tmp("mhrep.json"));
  const auto data_json = cfsl::read_json_file(tmp("mh.json"));
  CHECK(rep["model"]["tail"] == data_json["payload"]["tail"]);
}

TEST_CASE("verify subcommand") {
  const auto ok = cli("verify " + data("trivial.json"));
  CHECK(ok.code == 0);
  CHECK(ok.out.find("FAIL") == std::string::npos);
  CHECK(ok.out.find("PASS norming_identity") != std::string::npos);

  const cfsl::Order o(0.6);
  cfsl::write_json_file(tmp("random.json"), cfsl::to_json(cfsl::Problem(o, cfsl::random_smooth_potential(o, 7), -0.4, 0.8)));
  const auto rnd = cli("verify " + tmp("random.json") + " --seed 3");
  CHECK(rnd.code == 0);
  CHECK(rnd.out.find("FAIL") == std::string::npos);

  const auto bad = cli("verify " + data("cos_x.json") + " --rtol 1e-2");
  CHECK(bad.code == 6);
  CHECK(bad.out.find("FAIL norming_identity") != std::string::npos);
}
