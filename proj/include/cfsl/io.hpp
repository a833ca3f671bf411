#pragma once

// JSON and CSV plumbing shared by the data model, the inverse solver and the CLI.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "cfsl/conformable.hpp"
#include "cfsl/errors.hpp"
#include "cfsl/forward.hpp"
#include "cfsl/problem.hpp"

namespace cfsl {

using json = nlohmann::json;

/// Full-precision decimal form used in every CSV file.
inline std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace detail {

inline const json& field(const json& j, const std::string& key, const std::string& path) {
  if (!j.is_object()) throw parse_error(path + ": expected an object");
  auto it = j.find(key);
  if (it == j.end()) throw parse_error(path + "." + key + ": missing");
  return *it;
}

inline double number(const json& j, const std::string& path) {
  if (!j.is_number()) throw parse_error(path + ": expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw parse_error(path + ": not finite");
  return v;
}

inline std::vector<double> numbers(const json& j, const std::string& path) {
  if (!j.is_array()) throw parse_error(path + ": expected an array of numbers");
  std::vector<double> v;
  v.reserve(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) v.push_back(number(j[i], path + "[" + std::to_string(i) + "]"));
  return v;
}

inline Order order_field(const json& j, const std::string& path) {
  const double a = number(field(j, "alpha", path), path + ".alpha");
  if (!(a > 0.0 && a <= 1.0)) throw parse_error(path + ".alpha: alpha out of (0,1]");
  return Order(a);
}

}  // namespace detail

inline json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw parse_error(path.string() + ": cannot open");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw parse_error(path.string() + ": malformed JSON: " + e.what());
  }
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw usage_error(path.string() + ": cannot write");
  out << text;
  if (!out) throw usage_error(path.string() + ": write failed");
}

inline void write_json_file(const std::filesystem::path& path, const json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

/// Callable potentials are written as 257 grid samples.
inline json to_json(const Potential& q, std::size_t callable_nodes = 257) {
  json j;
  if (q.kind() == Potential::Kind::cosine) {
    j["kind"] = "cosine";
    j["coeffs"] = std::vector<double>(q.data().begin(), q.data().end());
  } else if (q.kind() == Potential::Kind::grid) {
    j["kind"] = "grid";
    j["nodes"] = std::vector<double>(q.data().begin(), q.data().end());
  } else {
    j["kind"] = "grid";
    j["nodes"] = q.sample(callable_nodes);
  }
  return j;
}

inline json to_json(const Problem& p) {
  return json{{"alpha", p.order.value()}, {"h", p.h}, {"H", p.H}, {"q", to_json(p.q)}};
}

inline Potential potential_from_json(const json& j, Order order, const std::string& path) {
  const json& kind = detail::field(j, "kind", path);
  if (!kind.is_string()) throw parse_error(path + ".kind: expected a string");
  const auto k = kind.get<std::string>();
  if (k == "cosine") {
    auto c = detail::numbers(detail::field(j, "coeffs", path), path + ".coeffs");
    if (c.empty()) throw parse_error(path + ".coeffs: empty");
    return Potential::cosine(order, std::move(c));
  }
  if (k == "grid") {
    auto v = detail::numbers(detail::field(j, "nodes", path), path + ".nodes");
    if (v.size() < 2) throw parse_error(path + ".nodes: need at least two samples");
    return Potential::grid(order, std::move(v));
  }
  throw parse_error(path + ".kind: unknown potential kind '" + k + "'");
}

inline Problem problem_from_json(const json& j) {
  const Order order = detail::order_field(j, "problem");
  const double h = detail::number(detail::field(j, "h", "problem"), "problem.h");
  const double H = detail::number(detail::field(j, "H", "problem"), "problem.H");
  return Problem(order, potential_from_json(detail::field(j, "q", "problem"), order, "problem.q"), h, H);
}

inline Problem read_problem(const std::filesystem::path& path) { return problem_from_json(read_json_file(path)); }

/// Columns t, x, u, du sampled at `points` uniform t-nodes.
inline std::string trajectory_csv(const Trajectory<double>& tr, std::size_t points = 201) {
  std::ostringstream os;
  os << "t,x,u,du\n";
  for (std::size_t i = 0; i < points; ++i) {
    const double t = i + 1 == points ? tr.t_end() : tr.t_end() * static_cast<double>(i) / static_cast<double>(points - 1);
    const auto y = tr.at(t);
    os << format_number(t) << ',' << format_number(to_x(t, tr.order())) << ',' << format_number(y[0]) << ','
       << format_number(y[1]) << '\n';
  }
  return os.str();
}

}  // namespace cfsl
