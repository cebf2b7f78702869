#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <vector>

namespace oracle {

// Largest |a - f| / max(|a|, |f|, floor) with floor = 1e-3 * max|f|, so
// entries many orders below the tensor's scale are judged against that scale.
inline double max_rel_error(const std::vector<double>& a, const std::vector<double>& f) {
  double scale = 0.0;
  for (double v : f) scale = std::max(scale, std::abs(v));
  const double floor = std::max(1e-3 * scale, 1e-12);
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double den = std::max({std::abs(a[i]), std::abs(f[i]), floor});
    const double e = std::abs(a[i] - f[i]) / den;
    if (std::getenv("GRADCHECK_DEBUG") && e > 1e-3) {
      std::fprintf(stderr, "entry %zu analytic %.9g numeric %.9g scale %.3g\n", i, a[i], f[i], scale);
    }
    worst = std::max(worst, e);
  }
  return worst;
}

}  // namespace oracle
