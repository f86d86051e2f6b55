// Calibration run for kLatticeAveragingConstant. Not part of ctest.
// Prints, per integrand, both estimate/reference ratios and the largest
// two-sided ratio max(r, 1/r) over the family.

#include <algorithm>
#include <cstdio>
#include <cstdlib>

#include "ul/analysis.hpp"
#include "ul/lattice.hpp"

int main(int argc, char** argv) {
  const std::size_t trials = argc > 1 ? std::strtoull(argv[1], nullptr, 10) : 20000;
  double worst = 0.0;
  auto report = [&](const ul::LalIntegrand& phi, const char* label) {
    const ul::LalReports r = ul::verify_lal(phi, trials, 0xca1);
    for (const auto* rep : {&r.dilated, &r.contracted}) {
      const double q = rep->ratio();
      if (q > 0.0) worst = std::max({worst, q, 1.0 / q});
    }
    std::printf("d=%d %-22s dilated %.4f  contracted %.4f\n", phi.dimension(), label, r.dilated.ratio(),
                r.contracted.ratio());
  };
  const double annuli[][2] = {{1.0, 2.0}, {1.0, 3.0}, {0.5, 4.0}, {2.0, 5.0}};
  for (int d = 1; d <= 3; ++d) {
    for (const auto& a : annuli) {
      char label[64];
      std::snprintf(label, sizeof label, "annulus [%.1f, %.1f]", a[0], a[1]);
      report(ul::annulus_indicator(d, a[0], a[1]), label);
    }
    for (double scale : {1.0, 2.0, 4.0}) {
      char label[64];
      std::snprintf(label, sizeof label, "gaussian scale %.1f", scale);
      report(ul::lal_integrand(ul::TestFunction::gaussian(d, scale)), label);
    }
  }
  std::printf("largest two-sided ratio: %.4f\n", worst);
  return 0;
}
