#pragma once

// Independent reference computations used by the test suites.

#include <cmath>
#include <numbers>

namespace flex::testing {

/// Standard normal CDF by composite Simpson integration of the density.
inline double cdf_by_simpson(double z, int intervals = 4000) {
  const double h = z / intervals;
  auto pdf = [](double t) { return std::exp(-0.5 * t * t) / std::sqrt(2.0 * std::numbers::pi); };
  double s = pdf(0.0) + pdf(z);
  for (int i = 1; i < intervals; ++i) s += (i % 2 ? 4.0 : 2.0) * pdf(i * h);
  return 0.5 + s * h / 3.0;
}

/// Inverse CDF by bisection on the Simpson-integrated CDF.
inline double quantile_by_bisection(double p) {
  double lo = -12.0, hi = 12.0;
  for (int it = 0; it < 200 && hi - lo > 1e-13; ++it) {
    const double mid = 0.5 * (lo + hi);
    (cdf_by_simpson(mid) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

/// Sum of rho0 / (k + k0)^p for k = 1..n.
inline double schedule_sum(double rho0, double k0, double p, long n, double power = 1.0) {
  double s = 0.0;
  for (long k = 1; k <= n; ++k) s += std::pow(rho0 / std::pow(k + k0, p), power);
  return s;
}

}  // namespace flex::testing
