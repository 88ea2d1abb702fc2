#pragma once

// One area's intraday clearing problem: chance-constrained DC dispatch that
// trades flow adjustments on its tie-lines against neighbor quotes.
//
// Variable layout:  [ dP per generator | dT+, dT- per incident tie | theta per bus ]
// The tie-line flow adjustment in the area's own orientation is dT = dT+ - dT-.

#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "flex/errors.hpp"
#include "flex/grid.hpp"
#include "flex/qp.hpp"
#include "flex/stochastic.hpp"

namespace flex {

/// Tikhonov weight on the angle and split-flow diagonals. Only the generator
/// block is strictly convex by itself.
inline constexpr double kRegularization = 1e-9;

/// Quotes an area receives for one incident tie-line.
struct TieTerms {
  double neighbor_delta = 0.0;  // USD/MWh, neighbor's willingness to pay
  double neighbor_angle = 0.0;  // rad, neighbor's boundary bus
  double capacity_price = 0.0;  // USD/MWh, shared by both ends

  bool operator==(const TieTerms&) const = default;
};

/// One entry per incident tie-line, in Area::ties order.
struct TermsOfTrade {
  std::vector<TieTerms> ties;

  bool operator==(const TermsOfTrade&) const = default;
};

struct AreaDecision {
  std::vector<double> delta_p;  // per area generator
  std::vector<double> delta_t;  // per incident tie, own orientation
  std::vector<double> theta;    // per area bus
};

struct AreaDuals {
  std::vector<double> alpha;   // nodal balance, per bus
  std::vector<double> nu;      // generator lower bound
  std::vector<double> lambda;  // generator upper bound
  std::vector<double> psi;     // ramp down
  std::vector<double> varphi;  // ramp up
  std::vector<double> kappa;   // internal line, reverse direction
  std::vector<double> eta;     // internal line, forward direction
  std::vector<double> xi;      // tie-line definition, signed
  double gamma = 0.0;          // aggregate supply requirement
};

/// Optional restrictions on an area's program. Used for the autarky probe,
/// zero-trade runs and the Nash deviation check.
struct ClearingOptions {
  /// Per incident tie: fix dT to this value and drop the angle coupling.
  std::vector<std::optional<double>> fixed_delta_t;
  /// Per area bus: pin theta to this value.
  std::vector<std::optional<double>> fixed_theta;
};

/// Row and column map of an assembled area program.
struct AreaLayout {
  Eigen::Index n_gen = 0, n_tie = 0, n_bus = 0;
  Eigen::Index dp(std::size_t g) const { return static_cast<Eigen::Index>(g); }
  Eigen::Index tp(std::size_t t) const { return n_gen + 2 * static_cast<Eigen::Index>(t); }
  Eigen::Index tm(std::size_t t) const { return tp(t) + 1; }
  Eigen::Index th(std::size_t b) const { return n_gen + 2 * n_tie + static_cast<Eigen::Index>(b); }

  std::vector<Eigen::Index> nodal, gen_max, gen_min, ramp_up, ramp_down, line_fwd, line_rev;
  Eigen::Index aggregate = -1;
  std::vector<Eigen::Index> tie_def;  // equality row per tie, -1 when the tie is fixed
  double constant = 0.0;              // generation cost at the day-ahead schedule
};

struct AreaProgram {
  qp::QuadraticProgram qp;
  AreaLayout layout;
};

struct ClearingResult {
  std::size_t area = 0;
  qp::Status status = qp::Status::optimal;
  AreaDecision decision;
  AreaDuals duals;
  double objective = 0.0;                   // clearing objective, regularization removed
  double generation_cost = 0.0;             // sum of C_g(P_da + dP)
  std::vector<double> willingness_to_pay;   // gamma + alpha at the own boundary bus, per tie
  std::vector<double> boundary_theta;       // own boundary angle, per tie

  // Raw multipliers by row label, for KKT cross-checks.
  std::vector<std::string> eq_labels, ineq_labels;
  Eigen::VectorXd y, z;
};

// ---------------------------------------------------------------------------
// Row and variable labels shared with the centralized program
// ---------------------------------------------------------------------------

namespace label {
inline std::string bus(const Network& n, std::size_t b) { return n.buses()[b].area_id + "/" + n.buses()[b].id; }
inline std::string nodal(const Network& n, std::size_t b) { return "nodal[" + bus(n, b) + "]"; }
inline std::string theta(const Network& n, std::size_t b) { return "theta[" + bus(n, b) + "]"; }
inline std::string gen(const char* kind, const Network& n, std::size_t g) {
  return std::string(kind) + "[" + n.generators()[g].id + "]";
}
inline std::string line(const char* kind, std::size_t l) { return std::string(kind) + "[" + std::to_string(l) + "]"; }
inline std::string aggregate(const Network& n, std::size_t a) { return "aggregate[" + n.areas()[a].id + "]"; }
inline std::string tie(const char* kind, const Network& n, std::size_t t) {
  return std::string(kind) + "[" + n.ties()[t].id + "]";
}
inline const char* slack = "slack";
}  // namespace label

namespace detail {

inline Eigen::VectorXd unit(Eigen::Index n) { return Eigen::VectorXd::Zero(n); }

}  // namespace detail

/// Builds the area's clearing program. Throws std::invalid_argument when the
/// terms or requirement do not match the area.
inline AreaProgram assemble(std::size_t a, const Network& net, const TermsOfTrade& terms,
                            const AggregateRequirement& req, const ClearingOptions& opts = {}) {
  const Area& area = net.areas().at(a);
  if (terms.ties.size() != area.ties.size())
    throw std::invalid_argument("assemble: terms cover " + std::to_string(terms.ties.size()) + " ties, area '" +
                                area.id + "' has " + std::to_string(area.ties.size()));
  if (req.area_id != area.id)
    throw std::invalid_argument("assemble: requirement for area '" + req.area_id + "' passed to '" + area.id + "'");
  for (const auto& t : terms.ties)
    if (!(t.capacity_price >= 0.0)) throw std::invalid_argument("assemble: capacity price must be >= 0");
  if (!opts.fixed_delta_t.empty() && opts.fixed_delta_t.size() != area.ties.size())
    throw std::invalid_argument("assemble: fixed_delta_t size mismatch");
  if (!opts.fixed_theta.empty() && opts.fixed_theta.size() != area.buses.size())
    throw std::invalid_argument("assemble: fixed_theta size mismatch");

  AreaProgram out;
  AreaLayout& L = out.layout;
  L.n_gen = static_cast<Eigen::Index>(area.generators.size());
  L.n_tie = static_cast<Eigen::Index>(area.ties.size());
  L.n_bus = static_cast<Eigen::Index>(area.buses.size());
  const Eigen::Index n = L.n_gen + 2 * L.n_tie + L.n_bus;
  auto& p = out.qp;
  p = qp::QuadraticProgram::with_vars(n);

  std::map<std::size_t, std::size_t> local_bus;  // network bus -> area bus slot
  for (std::size_t k = 0; k < area.buses.size(); ++k) local_bus[area.buses[k]] = k;

  // Objective.
  for (std::size_t k = 0; k < area.generators.size(); ++k) {
    const auto& g = net.generators()[area.generators[k]];
    p.Q(L.dp(k), L.dp(k)) = 2.0 * g.cost_quadratic;
    p.c(L.dp(k)) = 2.0 * g.cost_quadratic * g.p_da + g.cost_linear;
    p.var_labels[static_cast<std::size_t>(L.dp(k))] = label::gen("dP", net, area.generators[k]);
    L.constant += g.cost(g.p_da);
  }
  for (std::size_t k = 0; k < area.ties.size(); ++k) {
    const auto& tt = terms.ties[k];
    p.Q(L.tp(k), L.tp(k)) = kRegularization;
    p.Q(L.tm(k), L.tm(k)) = kRegularization;
    p.c(L.tp(k)) = -tt.neighbor_delta + 0.5 * tt.capacity_price;
    p.c(L.tm(k)) = tt.neighbor_delta + 0.5 * tt.capacity_price;
    p.var_labels[static_cast<std::size_t>(L.tp(k))] = label::tie("dT+", net, area.ties[k].tie);
    p.var_labels[static_cast<std::size_t>(L.tm(k))] = label::tie("dT-", net, area.ties[k].tie);
  }
  for (std::size_t k = 0; k < area.buses.size(); ++k) {
    p.Q(L.th(k), L.th(k)) = kRegularization;
    p.var_labels[static_cast<std::size_t>(L.th(k))] = label::theta(net, area.buses[k]);
  }

  // Nodal balance: injections minus line and tie outflows cover the mean demand.
  for (std::size_t k = 0; k < area.buses.size(); ++k) {
    const std::size_t b = area.buses[k];
    Eigen::VectorXd row = detail::unit(n);
    double rhs = nodal_requirement(net.buses()[b]);
    for (std::size_t gk = 0; gk < area.generators.size(); ++gk) {
      const auto& g = net.generators()[area.generators[gk]];
      if (net.bus_index(g.area_id, g.bus_id) == b) {
        row(L.dp(gk)) += 1.0;
        rhs -= g.p_da;
      }
    }
    for (auto l : area.lines) {
      const auto& ln = net.lines()[l];
      const auto f = local_bus.at(net.bus_index(ln.area_id, ln.from_bus));
      const auto t = local_bus.at(net.bus_index(ln.area_id, ln.to_bus));
      if (f != k && t != k) continue;
      const auto other = f == k ? t : f;
      row(L.th(k)) -= 1.0 / ln.reactance;
      row(L.th(other)) += 1.0 / ln.reactance;
    }
    for (std::size_t tk = 0; tk < area.ties.size(); ++tk) {
      if (area.ties[tk].own_bus != b) continue;
      row(L.tp(tk)) -= 1.0;
      row(L.tm(tk)) += 1.0;
      rhs += area.ties[tk].t_da;
    }
    L.nodal.push_back(p.add_ineq(-row, -rhs, label::nodal(net, b)));
  }

  for (std::size_t k = 0; k < area.generators.size(); ++k) {
    const std::size_t gi = area.generators[k];
    const auto& g = net.generators()[gi];
    Eigen::VectorXd e = detail::unit(n);
    e(L.dp(k)) = 1.0;
    L.gen_max.push_back(p.add_ineq(e, g.p_max - g.p_da, label::gen("gen_max", net, gi)));
    L.gen_min.push_back(p.add_ineq(-e, g.p_da - g.p_min, label::gen("gen_min", net, gi)));
    L.ramp_up.push_back(p.add_ineq(e, g.ramp_up, label::gen("ramp_up", net, gi)));
    L.ramp_down.push_back(p.add_ineq(-e, -g.ramp_down, label::gen("ramp_down", net, gi)));
  }

  for (auto l : area.lines) {
    const auto& ln = net.lines()[l];
    const auto f = local_bus.at(net.bus_index(ln.area_id, ln.from_bus));
    const auto t = local_bus.at(net.bus_index(ln.area_id, ln.to_bus));
    Eigen::VectorXd row = detail::unit(n);
    row(L.th(f)) = 1.0 / ln.reactance;
    row(L.th(t)) = -1.0 / ln.reactance;
    L.line_fwd.push_back(p.add_ineq(row, ln.capacity, label::line("line_fwd", l)));
    L.line_rev.push_back(p.add_ineq(-row, ln.capacity, label::line("line_rev", l)));
  }

  {
    Eigen::VectorXd row = detail::unit(n);
    double rhs = req.requirement;
    for (std::size_t k = 0; k < area.generators.size(); ++k) {
      row(L.dp(k)) = 1.0;
      rhs -= net.generators()[area.generators[k]].p_da;
    }
    for (std::size_t k = 0; k < area.ties.size(); ++k) {
      row(L.tp(k)) = -1.0;
      row(L.tm(k)) = 1.0;
      rhs += area.ties[k].t_da;
    }
    L.aggregate = p.add_ineq(-row, -rhs, label::aggregate(net, a));
  }

  for (std::size_t k = 0; k < area.ties.size(); ++k) {
    Eigen::VectorXd e = detail::unit(n);
    e(L.tp(k)) = -1.0;
    p.add_ineq(e, 0.0, label::tie("split+", net, area.ties[k].tie));
    e.setZero();
    e(L.tm(k)) = -1.0;
    p.add_ineq(e, 0.0, label::tie("split-", net, area.ties[k].tie));
  }

  // Tie-line definition against the neighbor's quoted angle:
  //   t_da + dT = (theta_own - theta_neighbor) / x
  for (std::size_t k = 0; k < area.ties.size(); ++k) {
    const auto& end = area.ties[k];
    const double x = net.ties()[end.tie].reactance;
    Eigen::VectorXd row = detail::unit(n);
    row(L.tp(k)) = 1.0;
    row(L.tm(k)) = -1.0;
    const bool fixed = !opts.fixed_delta_t.empty() && opts.fixed_delta_t[k].has_value();
    if (fixed) {
      p.add_eq(row, *opts.fixed_delta_t[k], label::tie("tie_fix", net, end.tie));
      L.tie_def.push_back(-1);
    } else {
      row(L.th(local_bus.at(end.own_bus))) = -1.0 / x;
      L.tie_def.push_back(
          p.add_eq(row, -end.t_da - terms.ties[k].neighbor_angle / x, label::tie("tie_def", net, end.tie)));
    }
  }

  if (net.slack().area == area.id) {
    Eigen::VectorXd e = detail::unit(n);
    e(L.th(local_bus.at(net.slack_bus()))) = 1.0;
    p.add_eq(e, 0.0, label::slack);
  }
  for (std::size_t k = 0; k < opts.fixed_theta.size(); ++k) {
    if (!opts.fixed_theta[k]) continue;
    Eigen::VectorXd e = detail::unit(n);
    e(L.th(k)) = 1.0;
    p.add_eq(e, *opts.fixed_theta[k], "pin[" + label::bus(net, area.buses[k]) + "]");
  }
  return out;
}

/// Clearing objective at a decision: generation cost minus trade revenue plus
/// the capacity charge on the absolute flow adjustment.
inline double clearing_objective(std::size_t a, const Network& net, const TermsOfTrade& terms,
                                 const AreaDecision& d) {
  const Area& area = net.areas().at(a);
  double v = 0.0;
  for (std::size_t k = 0; k < area.generators.size(); ++k) {
    const auto& g = net.generators()[area.generators[k]];
    v += g.cost(g.p_da + d.delta_p[k]);
  }
  for (std::size_t k = 0; k < area.ties.size(); ++k)
    v += -terms.ties[k].neighbor_delta * d.delta_t[k] + 0.5 * terms.ties[k].capacity_price * std::abs(d.delta_t[k]);
  return v;
}

/// Solves one area's program. Throws SolveError (round -1) when the program
/// is not solved to optimality.
inline ClearingResult clear(std::size_t a, const Network& net, const TermsOfTrade& terms,
                            const AggregateRequirement& req, const qp::SolverConfig& cfg = {},
                            const ClearingOptions& opts = {}) {
  const Area& area = net.areas().at(a);
  const AreaProgram prog = assemble(a, net, terms, req, opts);
  const qp::QpSolution sol = qp::solve(prog.qp, cfg);
  if (!sol.optimal())
    throw SolveError(area.id, -1, qp::to_string(sol.status),
                     "area '" + area.id + "': clearing problem " + qp::to_string(sol.status));
  const AreaLayout& L = prog.layout;

  ClearingResult r;
  r.area = a;
  r.status = sol.status;
  for (std::size_t k = 0; k < area.generators.size(); ++k) r.decision.delta_p.push_back(sol.x(L.dp(k)));
  for (std::size_t k = 0; k < area.ties.size(); ++k) {
    const double dt = sol.x(L.tp(k)) - sol.x(L.tm(k));
    r.decision.delta_t.push_back(dt);
  }
  for (std::size_t k = 0; k < area.buses.size(); ++k) r.decision.theta.push_back(sol.x(L.th(k)));

  auto take = [&](const std::vector<Eigen::Index>& rows, std::vector<double>& out, const Eigen::VectorXd& v) {
    for (auto i : rows) out.push_back(i >= 0 ? v(i) : 0.0);
  };
  take(L.nodal, r.duals.alpha, sol.z);
  take(L.gen_min, r.duals.nu, sol.z);
  take(L.gen_max, r.duals.lambda, sol.z);
  take(L.ramp_down, r.duals.psi, sol.z);
  take(L.ramp_up, r.duals.varphi, sol.z);
  take(L.line_rev, r.duals.kappa, sol.z);
  take(L.line_fwd, r.duals.eta, sol.z);
  take(L.tie_def, r.duals.xi, sol.y);
  r.duals.gamma = sol.z(L.aggregate);

  std::map<std::size_t, std::size_t> local_bus;
  for (std::size_t k = 0; k < area.buses.size(); ++k) local_bus[area.buses[k]] = k;
  for (const auto& end : area.ties) {
    const auto k = local_bus.at(end.own_bus);
    r.willingness_to_pay.push_back(r.duals.gamma + r.duals.alpha[k]);
    r.boundary_theta.push_back(r.decision.theta[k]);
  }

  for (std::size_t k = 0; k < area.generators.size(); ++k) {
    const auto& g = net.generators()[area.generators[k]];
    r.generation_cost += g.cost(g.p_da + r.decision.delta_p[k]);
  }
  r.objective = clearing_objective(a, net, terms, r.decision);
  r.eq_labels = prog.qp.eq_labels;
  r.ineq_labels = prog.qp.ineq_labels;
  r.y = sol.y;
  r.z = sol.z;
  return r;
}

/// The contract the coupling mechanism relies on: given neighbor quotes and
/// capacity prices, return the area's flows, boundary angles and prices.
class ClearingInterface {
public:
  virtual ~ClearingInterface() = default;
  virtual std::size_t num_areas() const = 0;
  virtual ClearingResult clear(std::size_t area, const TermsOfTrade& terms,
                               const ClearingOptions& opts = {}) const = 0;
};

/// Chance-constrained DC clearing; the aggregate requirements are computed once.
class ChanceConstrainedClearing final : public ClearingInterface {
public:
  explicit ChanceConstrainedClearing(Network net, qp::SolverConfig cfg = {}) : net_(std::move(net)), cfg_(std::move(cfg)) {
    for (std::size_t a = 0; a < net_.areas().size(); ++a) reqs_.push_back(aggregate_requirement(net_, a));
  }

  std::size_t num_areas() const override { return net_.areas().size(); }

  ClearingResult clear(std::size_t area, const TermsOfTrade& terms, const ClearingOptions& opts = {}) const override {
    return flex::clear(area, net_, terms, reqs_.at(area), cfg_, opts);
  }

  const Network& network() const { return net_; }
  const AggregateRequirement& requirement(std::size_t a) const { return reqs_.at(a); }

private:
  Network net_;
  qp::SolverConfig cfg_;
  std::vector<AggregateRequirement> reqs_;
};

/// Zero quotes on every incident tie.
inline TermsOfTrade zero_terms(const Network& net, std::size_t a) {
  return TermsOfTrade{std::vector<TieTerms>(net.areas().at(a).ties.size())};
}

/// Options that hold every tie at a fixed total flow: dT = target - t_da.
inline ClearingOptions fixed_flow_options(const Network& net, std::size_t a, double total_flow) {
  ClearingOptions o;
  for (const auto& end : net.areas().at(a).ties) o.fixed_delta_t.emplace_back(total_flow - end.t_da);
  return o;
}

/// Structural violations plus an autarky probe: each area must be able to
/// clear with every tie-line's total flow held at zero.
inline std::vector<std::string> validate(const NetworkData& data) {
  auto v = structural_violations(data);
  if (!v.empty()) return v;
  const Network net(data);
  for (std::size_t a = 0; a < net.areas().size(); ++a) {
    try {
      clear(a, net, zero_terms(net, a), aggregate_requirement(net, a), {}, fixed_flow_options(net, a, 0.0));
    } catch (const SolveError& e) {
      v.push_back("areas[" + net.areas()[a].id + "]: autarky probe " + e.status() +
                  " (area cannot meet its own demand with zero net intertie flow)");
    }
  }
  return v;
}

inline std::vector<std::string> validate(const Network& net) { return validate(net.data()); }

}  // namespace flex
