#include <gtest/gtest.h>

#include <nlohmann/json.hpp>

#include "flex/benchmark.hpp"
#include "flex/cases.hpp"

using flex::cases::load;

namespace {

flex::MechanismConfig fast() {
  flex::MechanismConfig c;
  c.schedule = {1.0, 0.0, 0.6};
  return c;
}

double price(const flex::CentralSolution& s, std::size_t a, std::size_t bus_slot) {
  return s.duals[a].gamma + s.duals[a].alpha[bus_slot];
}

// A state whose clears are the per-area responses to the optimal terms.
flex::CouplingState state_at_fixed_point(const flex::Network& net, const flex::CentralSolution& c) {
  const auto terms = flex::optimal_terms_of_trade(net, c);
  const flex::ChanceConstrainedClearing clearing(net);
  flex::CouplingState s;
  s.mu.assign(net.ties().size(), 0.0);
  for (std::size_t a = 0; a < net.areas().size(); ++a) {
    s.last.push_back(clearing.clear(a, terms[a]));
    s.x.push_back(flex::broadcast_of(s.last.back()));
    for (std::size_t k = 0; k < terms[a].ties.size(); ++k)
      s.mu[net.areas()[a].ties[k].tie] = terms[a].ties[k].capacity_price;
  }
  return s;
}

// toy2 with a day-ahead dispatch that is already optimal for the intraday
// demand: both marginal costs equal 8 and no tie-line flow is scheduled.
flex::Network settled_toy2() {
  auto j = nlohmann::json::parse(flex::cases::toy2);
  j["generators"][0]["p_da"] = 8.0;
  j["generators"][1]["p_da"] = 2.0;
  j["demand"]["buses"][0]["mean"] = 8.0;
  j["demand"]["buses"][1]["mean"] = 2.0;
  return flex::load_case(j.dump());
}

}  // namespace

// Marginal costs equalize: dP1 = 4 dP2 and dP1 + dP2 = 10.
TEST(SolveCentralized, Toy2HandKkt) {
  const auto s = flex::solve_centralized(load("toy2"));
  EXPECT_NEAR(s.decisions[0].delta_p[0], 8.0, 1e-6);
  EXPECT_NEAR(s.decisions[1].delta_p[0], 2.0, 1e-6);
  EXPECT_NEAR(s.flow[0], 8.0, 1e-6);
  EXPECT_NEAR(s.objective, 40.0, 1e-5);
  EXPECT_NEAR(s.eta_bar[0], 0.0, 1e-6);
  EXPECT_NEAR(s.kappa_bar[0], 0.0, 1e-6);
}

// Binding 5 MW tie: dP = (5, 5), marginal costs 5 and 20.
TEST(SolveCentralized, CongestedHandKkt) {
  const auto s = flex::solve_centralized(load("toy2-congested"));
  EXPECT_NEAR(s.flow[0], 5.0, 1e-6);
  EXPECT_NEAR(s.decisions[0].delta_p[0], 5.0, 1e-6);
  EXPECT_NEAR(s.decisions[1].delta_p[0], 5.0, 1e-6);
  EXPECT_NEAR(price(s, 1, 0) - price(s, 0, 0), 15.0, 1e-5);
  EXPECT_NEAR(s.eta_bar[0] - s.kappa_bar[0], 15.0, 1e-5);
}

TEST(SolveCentralized, NoIncrementMeansNoAdjustment) {
  const auto net = settled_toy2();
  const auto s = flex::solve_centralized(net);
  for (const auto& d : s.decisions) EXPECT_NEAR(d.delta_p[0], 0.0, 1e-6);
  EXPECT_NEAR(s.flow[0], 0.0, 1e-6);
  EXPECT_NEAR(s.objective, net.generators()[0].cost(8.0) + net.generators()[1].cost(2.0), 1e-5);
}

TEST(SolveCentralized, AntiSymmetryAndCapacityComplementarity) {
  for (auto name : flex::cases::names) {
    const auto net = load(std::string(name));
    const auto s = flex::solve_centralized(net);
    for (std::size_t a = 0; a < net.areas().size(); ++a)
      for (std::size_t k = 0; k < net.areas()[a].ties.size(); ++k) {
        const auto& e = net.areas()[a].ties[k];
        EXPECT_NEAR(e.t_da + s.decisions[a].delta_t[k], e.orientation * s.flow[e.tie], 1e-9) << name;
      }
    for (std::size_t t = 0; t < net.ties().size(); ++t) {
      const double cap = net.ties()[t].capacity;
      EXPECT_GE(s.eta_bar[t], 0.0);
      EXPECT_GE(s.kappa_bar[t], 0.0);
      EXPECT_LE(s.eta_bar[t] * (cap - s.flow[t]), 1e-6) << name;
      EXPECT_LE(s.kappa_bar[t] * (cap + s.flow[t]), 1e-6) << name;
    }
  }
}

TEST(SolveCentralized, ObjectiveInvariantUnderAreaRelabeling) {
  for (auto name : flex::cases::names) {
    auto j = nlohmann::json::parse(flex::cases::text(name));
    const double base = flex::solve_centralized(flex::load_case(j.dump())).objective;
    std::reverse(j["areas"].begin(), j["areas"].end());
    std::reverse(j["buses"].begin(), j["buses"].end());
    std::reverse(j["generators"].begin(), j["generators"].end());
    std::reverse(j["tie_lines"].begin(), j["tie_lines"].end());
    const double permuted = flex::solve_centralized(flex::load_case(j.dump())).objective;
    EXPECT_NEAR(permuted, base, 1e-6 * (1.0 + std::abs(base))) << name;
  }
}

TEST(SolveCentralized, InfeasibleNetworkThrows) {
  auto j = nlohmann::json::parse(flex::cases::toy2);
  j["generators"][0]["p_max"] = 1.0;
  j["generators"][1]["p_max"] = 1.0;
  EXPECT_THROW(flex::solve_centralized(flex::load_case(j.dump())), flex::SolveError);
}

TEST(OptimalTerms, CapacityPriceFromCapacityDuals) {
  const auto net = load("toy2");
  auto terms = flex::optimal_terms_of_trade(net, flex::solve_centralized(net));
  EXPECT_NEAR(terms[0].ties[0].capacity_price, 0.0, 1e-6);
  const auto cong = load("toy2-congested");
  const auto s = flex::solve_centralized(cong);
  terms = flex::optimal_terms_of_trade(cong, s);
  EXPECT_NEAR(terms[0].ties[0].capacity_price / 2.0, 15.0, 1e-5);
  EXPECT_NEAR(terms[1].ties[0].capacity_price / 2.0, 15.0, 1e-5);
  // Single-bus areas: the quote is the neighbor's gamma + alpha.
  EXPECT_DOUBLE_EQ(terms[0].ties[0].neighbor_delta, price(s, 1, 0));
  EXPECT_DOUBLE_EQ(terms[1].ties[0].neighbor_delta, price(s, 0, 0));
  EXPECT_DOUBLE_EQ(terms[0].ties[0].neighbor_angle, s.decisions[1].theta[0]);
}

TEST(VerifyFixedPoint, EveryBundledCase) {
  for (auto name : flex::cases::names) {
    const auto net = load(std::string(name));
    const auto s = flex::solve_centralized(net);
    const auto r = flex::verify_fixed_point(net, flex::optimal_terms_of_trade(net, s), s);
    EXPECT_TRUE(r.passed) << name << " deviation " << r.max_deviation;
    EXPECT_LE(r.max_deviation, 1e-4) << name;
  }
}

TEST(VerifyFixedPoint, PerturbedQuoteMovesTheResponse) {
  for (auto name : flex::cases::names) {
    const auto net = load(std::string(name));
    const auto s = flex::solve_centralized(net);
    auto terms = flex::optimal_terms_of_trade(net, s);
    for (auto& t : terms)
      for (auto& tt : t.ties) tt.neighbor_delta += 1.0;
    const auto r = flex::verify_fixed_point(net, terms, s);
    EXPECT_GT(r.max_deviation, 0.1) << name;
    EXPECT_FALSE(r.passed);
  }
}

TEST(LimitFeasibility, CongestedLimitRespectsCapacity) {
  const auto net = load("toy2-congested");
  const auto res = flex::run(net, fast());
  ASSERT_TRUE(res.converged);
  const auto r = flex::check_limit_feasibility(res.state, net);
  EXPECT_TRUE(r.passed) << r.max_residual;
  EXPECT_GE(r.capacity_slack[0], -1e-3);
}

TEST(LimitFeasibility, UncongestedLimitIsInterior) {
  const auto net = load("toy2");
  const auto res = flex::run(net, fast());
  ASSERT_TRUE(res.converged);
  const auto r = flex::check_limit_feasibility(res.state, net);
  EXPECT_TRUE(r.passed);
  EXPECT_GT(r.capacity_slack[0], 1.0);
}

TEST(LimitFeasibility, EarlyIterateIsFlaggedNotThrown) {
  const auto net = load("toy2-congested");
  auto cfg = fast();
  cfg.max_rounds = 3;
  const auto res = flex::run(net, cfg);
  flex::FeasibilityReport r;
  ASSERT_NO_THROW(r = flex::check_limit_feasibility(res.state, net));
  EXPECT_LT(r.capacity_slack[0], 0.0);
  EXPECT_FALSE(r.passed);
}

TEST(KktEquivalence, Toy2LimitSatisfiesCentralKkt) {
  const auto net = load("toy2");
  const auto res = flex::run(net, fast());
  ASSERT_TRUE(res.converged);
  const auto r = flex::verify_kkt_equivalence(res.state, net, flex::solve_centralized(net));
  EXPECT_LE(r.residuals.dual_stationarity, 1e-3);
  EXPECT_TRUE(r.passed) << r.residuals.max();
}

TEST(KktEquivalence, CongestedConstructedDuals) {
  const auto net = load("toy2-congested");
  const auto res = flex::run(net, fast());
  ASSERT_TRUE(res.converged);
  const auto r = flex::verify_kkt_equivalence(res.state, net, flex::solve_centralized(net));
  EXPECT_NEAR(r.eta_bar[0], 15.0, 0.1);
  EXPECT_EQ(r.kappa_bar[0], 0.0);
  EXPECT_TRUE(r.passed) << r.residuals.max();
}

TEST(KktEquivalence, NoTradeGivesZeroTieDuals) {
  const auto net = settled_toy2();
  const auto res = flex::run(net, fast());
  ASSERT_TRUE(res.converged);
  const auto r = flex::verify_kkt_equivalence(res.state, net, flex::solve_centralized(net));
  EXPECT_EQ(r.eta_bar[0], 0.0);
  EXPECT_EQ(r.kappa_bar[0], 0.0);
}

TEST(EfficiencyGap, CentralAgainstItselfIsZero) {
  for (auto name : flex::cases::names) {
    const auto net = load(std::string(name));
    const auto c = flex::solve_centralized(net);
    const auto g = flex::efficiency_gap(net, state_at_fixed_point(net, c), c);
    EXPECT_LE(std::abs(g.objective_gap), 1e-7) << name;
    EXPECT_LE(g.flow_deviation, 1e-4) << name;
  }
}

TEST(EfficiencyGap, Toy2Limit) {
  const auto net = load("toy2");
  const auto res = flex::run(net, fast());
  const auto g = flex::efficiency_gap(net, res.state, flex::solve_centralized(net));
  EXPECT_LE(std::abs(g.objective_gap), 1e-3);
  EXPECT_LE(g.flow_deviation, 1e-2);
}

TEST(ComparisonReport, HasTheDocumentedKeys) {
  const auto net = load("toy2");
  const auto c = flex::solve_centralized(net);
  const auto s = state_at_fixed_point(net, c);
  const flex::ChanceConstrainedClearing clearing(net);
  const auto j = flex::comparison_report(net, flex::efficiency_gap(net, s, c), flex::verify_kkt_equivalence(s, net, c),
                                         flex::check_limit_feasibility(s, net), flex::verify_nash(net, s, clearing, 1e-4));
  for (auto key : {"objective_gap", "flow_deviation", "kkt_residuals", "feasibility_residuals", "nash_gaps"})
    EXPECT_TRUE(j.contains(key)) << key;
  EXPECT_TRUE(j["nash_gaps"].contains("A1"));
  EXPECT_TRUE(j["feasibility_residuals"]["capacity_slack"].contains("T12"));
}
