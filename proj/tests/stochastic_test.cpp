#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "flex/cases.hpp"
#include "flex/stochastic.hpp"
#include "oracles.hpp"

using flex::normal_quantile;

TEST(NormalQuantile, MedianIsZero) { EXPECT_NEAR(normal_quantile(0.5), 0.0, 1e-15); }

TEST(NormalQuantile, MatchesBisectionOracle) {
  EXPECT_NEAR(normal_quantile(0.95), flex::testing::quantile_by_bisection(0.95), 1e-9);
  EXPECT_NEAR(normal_quantile(0.975), flex::testing::quantile_by_bisection(0.975), 1e-9);
  EXPECT_NEAR(normal_quantile(0.95), 1.644854, 1e-4);
  EXPECT_NEAR(normal_quantile(0.975), 1.959964, 1e-4);
}

TEST(NormalQuantile, CdfResidualBelowContract) {
  for (double p = 1e-6; p < 1.0; p += 0.0137) EXPECT_LE(std::abs(flex::normal_cdf(normal_quantile(p)) - p), 1e-9) << p;
  for (double p : {1e-10, 1e-4, 0.02425, 0.97575, 1 - 1e-4}) EXPECT_LE(std::abs(flex::normal_cdf(normal_quantile(p)) - p), 1e-9) << p;
}

TEST(NormalQuantile, OddSymmetryAndMonotone) {
  double prev = -INFINITY;
  for (int i = 1; i < 1000; ++i) {
    const double p = i / 1000.0;
    const double z = normal_quantile(p);
    EXPECT_NEAR(z, -normal_quantile(1.0 - p), 1e-9);
    EXPECT_GT(z, prev);
    prev = z;
  }
}

TEST(NormalQuantile, RejectsOutOfRange) {
  EXPECT_THROW(normal_quantile(0.0), std::domain_error);
  EXPECT_THROW(normal_quantile(1.0), std::domain_error);
  EXPECT_THROW(normal_quantile(std::nan("")), std::domain_error);
}

TEST(AggregateRequirement, MedianConfidenceIsMeanDemand) {
  const auto r = flex::aggregate_requirement("X", {10, 20}, {3, 4}, 0.5);
  EXPECT_NEAR(r.requirement, 30.0, 1e-12);
  EXPECT_NEAR(r.std_total, 5.0, 1e-15);
}

TEST(AggregateRequirement, PythagoreanStd) {
  const auto r = flex::aggregate_requirement("X", {10, 20}, {3, 4}, 0.05);
  EXPECT_NEAR(r.requirement, 30.0 + flex::testing::quantile_by_bisection(0.95) * 5.0, 1e-8);
  EXPECT_NEAR(r.requirement, 38.2243, 1e-3);
}

TEST(AggregateRequirement, CoefficientOfVariationSixPercent) {
  const auto net = flex::load_case(R"({
    "areas": [{"id": "X"}], "buses": [{"area": "X", "id": "1"}],
    "generators": [{"id": "g", "area": "X", "bus": "1", "cost_quadratic": 1, "p_min": 0, "p_max": 200,
                    "ramp_down": -50, "ramp_up": 50, "p_da": 100}],
    "lines": [], "tie_lines": [],
    "demand": {"cov": 0.06, "buses": [{"area": "X", "bus": "1", "mean": 100}]},
    "confidence": {"X": 0.05}})");
  const auto r = flex::aggregate_requirement(net, 0);
  EXPECT_NEAR(r.std_total, 6.0, 1e-12);
  EXPECT_NEAR(r.requirement, 109.869, 1e-2);
}

TEST(AggregateRequirement, DecreasingInTail) {
  double prev = INFINITY;
  for (double t = 0.01; t < 0.99; t += 0.01) {
    const double r = flex::aggregate_requirement("X", {10, 20}, {3, 4}, t).requirement;
    EXPECT_LT(r, prev);
    prev = r;
  }
  EXPECT_THROW(flex::aggregate_requirement("X", {1}, {1}, 1.0), std::domain_error);
}

TEST(NodalRequirement, IsTheMean) {
  flex::Bus b;
  EXPECT_EQ(flex::nodal_requirement(b), 0.0);
  b.mean_net_demand = 55.0;
  EXPECT_EQ(flex::nodal_requirement(b), 55.0);
  const auto net = flex::cases::load("tri3");
  flex::ScenarioModifiers m;
  m.demand_cov_override = 0.2;
  const auto mod = flex::apply_scenario(net, m);
  for (std::size_t i = 0; i < net.buses().size(); ++i)
    EXPECT_EQ(flex::nodal_requirement(mod.buses()[i]), flex::nodal_requirement(net.buses()[i]));
}
