#pragma once

#include <cstdio>
#include <string>
#include <vector>

#include "cfsl/cfsl.hpp"

namespace fixtures {

inline cfsl::Problem trivial(double alpha, double h = 0.0, double H = 0.0) {
  const cfsl::Order o(alpha);
  return cfsl::Problem(o, cfsl::Potential::constant(o, 0.0), h, H);
}

struct Named {
  std::string name;
  cfsl::Problem problem;
};

/// q = cos x, q = x(pi - x)/4 and a seeded random smooth q, with mixed h, H.
inline std::vector<Named> smooth(double alpha) {
  const cfsl::Order o(alpha);
  char buf[32];
  std::snprintf(buf, sizeof buf, " alpha=%g", alpha);
  const std::string a = buf;
  return {
      {"cos x" + a, cfsl::Problem(o, cfsl::Potential::callable(o, [](double x) { return std::cos(x); }), 0.3, -0.2)},
      {"x(pi-x)/4" + a,
       cfsl::Problem(o, cfsl::Potential::callable(o, [](double x) { return x * (cfsl::pi - x) / 4; }), 1.0, 0.5)},
      {"random" + a, cfsl::Problem(o, cfsl::random_smooth_potential(o, 7), -0.4, 0.8)},
  };
}

inline cfsl::Problem smooth_problem(double alpha, std::size_t i) { return smooth(alpha).at(i).problem; }

inline std::vector<Named> smooth_all() {
  auto v = smooth(1.0);
  for (auto& f : smooth(0.6)) v.push_back(f);
  return v;
}

}  // namespace fixtures
