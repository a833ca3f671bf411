// Recovers q on (0, pi/2) and h from one spectrum, given q on (pi/2, pi) and H.
//
//   half_inverse_demo [alpha] [count]

#include <cstdio>
#include <cstdlib>

#include "cfsl/cfsl.hpp"

int main(int argc, char** argv) {
  const cfsl::Order order(argc > 1 ? std::atof(argv[1]) : 0.7);
  const std::size_t count = argc > 2 ? static_cast<std::size_t>(std::atoi(argv[2])) : 20;

  const cfsl::Problem truth(order, cfsl::Potential::callable(order, [](double x) { return x * (cfsl::pi - x) / 4; }),
                            0.3, -0.2);
  const auto data = cfsl::generate(truth, cfsl::DataKind::mixed_half, count);

  cfsl::InverseConfig cfg;
  cfg.basis_size = 8;
  cfg.init = cfsl::InitMode::zero;
  const auto rep = cfsl::reconstruct(data, cfg);

  std::printf("%s after %zu iterations, residual %.3e\n", rep.status.c_str(), rep.iterations, rep.residual_norm);
  std::printf("h: true %.6f, recovered %.6f\n", truth.h, rep.model.h);
  std::printf("relative L2 error of q on (0, pi/2): %.3e\n",
              cfsl::relative_l2_error(rep.model.potential(), truth.q, 0.0, cfsl::pi / 2));
  std::printf("\n%8s %12s %12s\n", "x", "q", "recovered");
  const auto q = rep.model.potential();
  for (int i = 0; i <= 16; ++i) {
    const double x = cfsl::pi * i / 16;
    std::printf("%8.4f %12.6f %12.6f\n", x, truth.q(x), q(x));
  }
  return rep.converged ? 0 : 1;
}
