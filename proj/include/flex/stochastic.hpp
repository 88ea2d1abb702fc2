#pragma once

// Deterministic equivalent of the per-area supply chance constraint under
// independent Gaussian nodal net-demand.

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "flex/grid.hpp"

namespace flex {

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

inline double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }

/// Inverse standard normal CDF. Acklam's rational approximation followed by
/// two Halley steps against erfc, which brings |cdf(z) - p| to rounding level.
inline double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::domain_error("normal_quantile: p must lie in (0,1)");

  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                 1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                 6.680131188771972e+01,  -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                 -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                 3.754408661907416e+00};
  constexpr double lo = 0.02425;

  double z;
  if (p < lo) {
    const double q = std::sqrt(-2.0 * std::log(p));
    z = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p > 1.0 - lo) {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    z = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else {
    const double q = p - 0.5;
    const double r = q * q;
    z = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  }
  for (int k = 0; k < 2; ++k) {
    const double e = normal_cdf(z) - p;
    const double u = e / normal_pdf(z);
    z -= u / (1.0 + 0.5 * z * u);
  }
  return z;
}

struct AggregateRequirement {
  std::string area_id;
  double mean_total = 0.0;
  double std_total = 0.0;
  double z = 0.0;
  double requirement = 0.0;  // mean_total + z * std_total
};

/// r_a from nodal means and standard deviations, independent buses assumed.
inline AggregateRequirement aggregate_requirement(std::string area_id, const std::vector<double>& means,
                                                  const std::vector<double>& stds, double t_a) {
  if (!(t_a > 0.0 && t_a < 1.0)) throw std::domain_error("aggregate_requirement: t_a must lie in (0,1)");
  if (means.size() != stds.size()) throw std::invalid_argument("aggregate_requirement: size mismatch");
  AggregateRequirement r;
  r.area_id = std::move(area_id);
  double var = 0.0;
  for (std::size_t i = 0; i < means.size(); ++i) {
    r.mean_total += means[i];
    var += stds[i] * stds[i];
  }
  r.std_total = std::sqrt(var);
  r.z = normal_quantile(1.0 - t_a);
  r.requirement = r.mean_total + r.z * r.std_total;
  return r;
}

inline AggregateRequirement aggregate_requirement(const Network& net, std::size_t area) {
  const auto& a = net.areas().at(area);
  std::vector<double> means, stds;
  for (auto b : a.buses) {
    means.push_back(net.buses()[b].mean_net_demand);
    stds.push_back(net.buses()[b].demand_std);
  }
  return aggregate_requirement(a.id, means, stds, a.confidence_tail);
}

/// Nodal balance uses the forecast mean; uncertainty enters only through the
/// aggregate requirement.
inline double nodal_requirement(const Bus& bus) { return bus.mean_net_demand; }

}  // namespace flex
