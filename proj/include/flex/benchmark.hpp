#pragma once

// Centralized omniscient clearing over all areas, and the checks that compare
// the decentralized limit against it.
//
// Variable layout:  [ dP per generator | dT per tie-line | theta per bus ]
// dT is the flow adjustment in the tie-line's from->to orientation; the
// to-area's adjustment is -dT, so anti-symmetry holds by construction.

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "flex/area_market.hpp"
#include "flex/coupling.hpp"
#include "flex/errors.hpp"
#include "flex/grid.hpp"
#include "flex/qp.hpp"
#include "flex/stochastic.hpp"

namespace flex {

struct CentralLayout {
  Eigen::Index n_gen = 0, n_tie = 0, n_bus = 0;
  Eigen::Index dp(std::size_t g) const { return static_cast<Eigen::Index>(g); }
  Eigen::Index dt(std::size_t t) const { return n_gen + static_cast<Eigen::Index>(t); }
  Eigen::Index th(std::size_t b) const { return n_gen + n_tie + static_cast<Eigen::Index>(b); }

  std::vector<Eigen::Index> nodal, gen_max, gen_min, ramp_up, ramp_down, line_fwd, line_rev;
  std::vector<Eigen::Index> aggregate;         // per area
  std::vector<Eigen::Index> cap_fwd, cap_rev;  // per tie-line
  std::vector<Eigen::Index> tie_def;           // equality row per tie-line
  Eigen::Index slack = -1;                     // equality row
};

struct CentralProgram {
  qp::QuadraticProgram qp;
  CentralLayout layout;
  double constant = 0.0;  // generation cost at the day-ahead schedule
};

struct CentralSolution {
  std::vector<AreaDecision> decisions;  // per area, own tie orientation
  std::vector<AreaDuals> duals;         // per area, xi in own orientation
  std::vector<double> delta_t;          // per tie-line, from->to
  std::vector<double> flow;             // t_da + dT, from->to
  std::vector<double> eta_bar;          // upper capacity dual, from->to
  std::vector<double> kappa_bar;        // lower capacity dual
  double objective = 0.0;               // total generation cost
  CentralProgram program;
  qp::QpSolution solution;
};

/// Joint program: total generation cost subject to every area's nodal,
/// generator, ramp, line and aggregate constraints, shared tie-line
/// definitions, explicit tie capacity bounds and the global slack.
inline CentralProgram assemble_centralized(const Network& net) {
  CentralProgram out;
  CentralLayout& L = out.layout;
  L.n_gen = static_cast<Eigen::Index>(net.generators().size());
  L.n_tie = static_cast<Eigen::Index>(net.ties().size());
  L.n_bus = static_cast<Eigen::Index>(net.buses().size());
  const Eigen::Index n = L.n_gen + L.n_tie + L.n_bus;
  auto& p = out.qp;
  p = qp::QuadraticProgram::with_vars(n);

  for (std::size_t g = 0; g < net.generators().size(); ++g) {
    const auto& gen = net.generators()[g];
    p.Q(L.dp(g), L.dp(g)) = 2.0 * gen.cost_quadratic;
    p.c(L.dp(g)) = 2.0 * gen.cost_quadratic * gen.p_da + gen.cost_linear;
    p.var_labels[static_cast<std::size_t>(L.dp(g))] = label::gen("dP", net, g);
    out.constant += gen.cost(gen.p_da);
  }
  for (std::size_t t = 0; t < net.ties().size(); ++t)
    p.var_labels[static_cast<std::size_t>(L.dt(t))] = label::tie("dT", net, t);
  for (std::size_t b = 0; b < net.buses().size(); ++b) {
    p.Q(L.th(b), L.th(b)) = kRegularization;
    p.var_labels[static_cast<std::size_t>(L.th(b))] = label::theta(net, b);
  }

  for (std::size_t b = 0; b < net.buses().size(); ++b) {
    Eigen::VectorXd row = detail::unit(n);
    double rhs = nodal_requirement(net.buses()[b]);
    for (std::size_t g = 0; g < net.generators().size(); ++g) {
      const auto& gen = net.generators()[g];
      if (net.bus_index(gen.area_id, gen.bus_id) != b) continue;
      row(L.dp(g)) += 1.0;
      rhs -= gen.p_da;
    }
    for (std::size_t l = 0; l < net.lines().size(); ++l) {
      const auto& ln = net.lines()[l];
      const auto f = net.bus_index(ln.area_id, ln.from_bus);
      const auto t = net.bus_index(ln.area_id, ln.to_bus);
      if (f != b && t != b) continue;
      const auto other = f == b ? t : f;
      row(L.th(b)) -= 1.0 / ln.reactance;
      row(L.th(other)) += 1.0 / ln.reactance;
    }
    for (const auto& area : net.areas())
      for (const auto& end : area.ties) {
        if (end.own_bus != b) continue;
        row(L.dt(end.tie)) -= end.orientation;
        rhs += end.t_da;
      }
    L.nodal.push_back(p.add_ineq(-row, -rhs, label::nodal(net, b)));
  }

  for (std::size_t g = 0; g < net.generators().size(); ++g) {
    const auto& gen = net.generators()[g];
    Eigen::VectorXd e = detail::unit(n);
    e(L.dp(g)) = 1.0;
    L.gen_max.push_back(p.add_ineq(e, gen.p_max - gen.p_da, label::gen("gen_max", net, g)));
    L.gen_min.push_back(p.add_ineq(-e, gen.p_da - gen.p_min, label::gen("gen_min", net, g)));
    L.ramp_up.push_back(p.add_ineq(e, gen.ramp_up, label::gen("ramp_up", net, g)));
    L.ramp_down.push_back(p.add_ineq(-e, -gen.ramp_down, label::gen("ramp_down", net, g)));
  }

  for (std::size_t l = 0; l < net.lines().size(); ++l) {
    const auto& ln = net.lines()[l];
    Eigen::VectorXd row = detail::unit(n);
    row(L.th(net.bus_index(ln.area_id, ln.from_bus))) = 1.0 / ln.reactance;
    row(L.th(net.bus_index(ln.area_id, ln.to_bus))) = -1.0 / ln.reactance;
    L.line_fwd.push_back(p.add_ineq(row, ln.capacity, label::line("line_fwd", l)));
    L.line_rev.push_back(p.add_ineq(-row, ln.capacity, label::line("line_rev", l)));
  }

  for (std::size_t a = 0; a < net.areas().size(); ++a) {
    const auto& area = net.areas()[a];
    Eigen::VectorXd row = detail::unit(n);
    double rhs = aggregate_requirement(net, a).requirement;
    for (auto g : area.generators) {
      row(L.dp(g)) = 1.0;
      rhs -= net.generators()[g].p_da;
    }
    for (const auto& end : area.ties) {
      row(L.dt(end.tie)) -= end.orientation;
      rhs += end.t_da;
    }
    L.aggregate.push_back(p.add_ineq(-row, -rhs, label::aggregate(net, a)));
  }

  for (std::size_t t = 0; t < net.ties().size(); ++t) {
    const auto& tie = net.ties()[t];
    Eigen::VectorXd e = detail::unit(n);
    e(L.dt(t)) = 1.0;
    L.cap_fwd.push_back(p.add_ineq(e, tie.capacity - tie.t_da, label::tie("cap_fwd", net, t)));
    L.cap_rev.push_back(p.add_ineq(-e, tie.capacity + tie.t_da, label::tie("cap_rev", net, t)));
  }

  // t_da + dT = (theta_from - theta_to) / x
  for (std::size_t t = 0; t < net.ties().size(); ++t) {
    const auto& tie = net.ties()[t];
    Eigen::VectorXd row = detail::unit(n);
    row(L.dt(t)) = 1.0;
    row(L.th(net.bus_index(tie.from_area, tie.from_bus))) = -1.0 / tie.reactance;
    row(L.th(net.bus_index(tie.to_area, tie.to_bus))) = 1.0 / tie.reactance;
    L.tie_def.push_back(p.add_eq(row, -tie.t_da, label::tie("tie_def", net, t)));
  }

  Eigen::VectorXd e = detail::unit(n);
  e(L.th(net.slack_bus())) = 1.0;
  L.slack = p.add_eq(e, 0.0, label::slack);
  return out;
}

/// Throws SolveError (area "central") when the joint program is not solved.
inline CentralSolution solve_centralized(const Network& net, const qp::SolverConfig& cfg = {}) {
  CentralSolution s;
  s.program = assemble_centralized(net);
  s.solution = qp::solve(s.program.qp, cfg);
  if (!s.solution.optimal())
    throw SolveError("central", -1, qp::to_string(s.solution.status),
                     std::string("centralized problem ") + qp::to_string(s.solution.status));
  const auto& L = s.program.layout;
  const auto& x = s.solution.x;
  const auto& y = s.solution.y;
  const auto& z = s.solution.z;

  for (std::size_t t = 0; t < net.ties().size(); ++t) {
    s.delta_t.push_back(x(L.dt(t)));
    s.flow.push_back(net.ties()[t].t_da + x(L.dt(t)));
    s.eta_bar.push_back(z(L.cap_fwd[t]));
    s.kappa_bar.push_back(z(L.cap_rev[t]));
  }
  for (std::size_t a = 0; a < net.areas().size(); ++a) {
    const auto& area = net.areas()[a];
    AreaDecision d;
    AreaDuals u;
    for (auto g : area.generators) {
      d.delta_p.push_back(x(L.dp(g)));
      u.nu.push_back(z(L.gen_min[g]));
      u.lambda.push_back(z(L.gen_max[g]));
      u.psi.push_back(z(L.ramp_down[g]));
      u.varphi.push_back(z(L.ramp_up[g]));
    }
    for (const auto& end : area.ties) {
      d.delta_t.push_back(end.orientation * x(L.dt(end.tie)));
      u.xi.push_back(end.orientation * y(L.tie_def[end.tie]));
    }
    for (auto b : area.buses) {
      d.theta.push_back(x(L.th(b)));
      u.alpha.push_back(z(L.nodal[b]));
    }
    for (auto l : area.lines) {
      u.eta.push_back(z(L.line_fwd[l]));
      u.kappa.push_back(z(L.line_rev[l]));
    }
    u.gamma = z(L.aggregate[a]);
    s.decisions.push_back(std::move(d));
    s.duals.push_back(std::move(u));
  }
  for (std::size_t g = 0; g < net.generators().size(); ++g)
    s.objective += net.generators()[g].cost(net.generators()[g].p_da + x(L.dp(g)));
  return s;
}

namespace detail {

inline std::size_t slot_of(const std::vector<std::size_t>& v, std::size_t value) {
  return static_cast<std::size_t>(std::find(v.begin(), v.end(), value) - v.begin());
}

inline double sign0(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

}  // namespace detail

/// Terms of trade that make the centralized optimum a fixed point of every
/// area's clearing: the neighbor's starred price gamma + alpha at its
/// boundary bus, its starred angle, and mu/2 = (eta_bar - kappa_bar) sign(dT).
inline std::vector<TermsOfTrade> optimal_terms_of_trade(const Network& net, const CentralSolution& sol) {
  std::vector<TermsOfTrade> out;
  for (const auto& area : net.areas()) {
    TermsOfTrade terms;
    for (const auto& end : area.ties) {
      const auto o = end.other_area;
      const auto& other = net.areas()[o];
      const auto k = detail::slot_of(other.buses, end.other_bus);
      TieTerms tt;
      tt.neighbor_delta = sol.duals[o].gamma + sol.duals[o].alpha[k];
      tt.neighbor_angle = sol.decisions[o].theta[k];
      // Clamped at zero: a capacity dual of solver-noise size with the
      // opposite sign must not produce a negative price.
      tt.capacity_price = std::max(
          0.0, 2.0 * (sol.eta_bar[end.tie] - sol.kappa_bar[end.tie]) * detail::sign0(sol.delta_t[end.tie]));
      terms.ties.push_back(tt);
    }
    out.push_back(std::move(terms));
  }
  return out;
}

struct FixedPointReport {
  std::vector<double> deviation;  // per area, max-norm over dP, dT and theta
  double max_deviation = 0.0;
  bool passed = true;
};

inline FixedPointReport verify_fixed_point(const Network& net, const std::vector<TermsOfTrade>& terms,
                                           const CentralSolution& sol, double tol = 1e-4,
                                           const qp::SolverConfig& solver = {}) {
  const ChanceConstrainedClearing clearing(net, solver);
  FixedPointReport r;
  for (std::size_t a = 0; a < net.areas().size(); ++a) {
    const auto c = clearing.clear(a, terms.at(a));
    double dev = 0.0;
    auto cmp = [&dev](const std::vector<double>& u, const std::vector<double>& v) {
      for (std::size_t i = 0; i < u.size(); ++i) dev = std::max(dev, std::abs(u[i] - v[i]));
    };
    cmp(c.decision.delta_p, sol.decisions[a].delta_p);
    cmp(c.decision.delta_t, sol.decisions[a].delta_t);
    cmp(c.decision.theta, sol.decisions[a].theta);
    r.deviation.push_back(dev);
    r.max_deviation = std::max(r.max_deviation, dev);
  }
  r.passed = r.max_deviation <= tol;
  return r;
}

namespace detail {

inline std::map<std::string, double> by_label(const std::vector<std::string>& labels, const Eigen::VectorXd& v) {
  std::map<std::string, double> m;
  for (std::size_t i = 0; i < labels.size(); ++i) m[labels[i]] = v(static_cast<Eigen::Index>(i));
  return m;
}

/// Centralized primal point assembled from the areas' latest clears. Tie
/// adjustments are taken from the from-area.
inline Eigen::VectorXd limit_primal(const Network& net, const CentralLayout& L, const std::vector<ClearingResult>& last) {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(L.n_gen + L.n_tie + L.n_bus);
  for (std::size_t a = 0; a < net.areas().size(); ++a) {
    const auto& area = net.areas()[a];
    for (std::size_t k = 0; k < area.generators.size(); ++k) x(L.dp(area.generators[k])) = last[a].decision.delta_p[k];
    for (std::size_t k = 0; k < area.buses.size(); ++k) x(L.th(area.buses[k])) = last[a].decision.theta[k];
    for (std::size_t k = 0; k < area.ties.size(); ++k)
      if (area.ties[k].orientation > 0) x(L.dt(area.ties[k].tie)) = last[a].decision.delta_t[k];
  }
  return x;
}

}  // namespace detail

struct FeasibilityReport {
  double equality = 0.0;             // max |A x - b|
  double inequality = 0.0;           // max (G x - h)+
  double consensus = 0.0;            // max |dT_from + dT_to|
  std::vector<double> capacity_slack;  // per tie-line, capacity - |t_da + dT|
  double max_residual = 0.0;
  bool passed = true;
};

/// Evaluates the joint constraints at the decentralized limit. Mid-run
/// states may violate the tie capacity; the report flags this without
/// throwing.
inline FeasibilityReport check_limit_feasibility(const CouplingState& s, const Network& net, double tol = 1e-3) {
  if (s.last.size() != net.areas().size())
    throw std::invalid_argument("check_limit_feasibility: state carries no clearing results");
  const auto prog = assemble_centralized(net);
  const auto x = detail::limit_primal(net, prog.layout, s.last);
  FeasibilityReport r;
  if (prog.qp.num_eq() > 0) r.equality = (prog.qp.A * x - prog.qp.b).cwiseAbs().maxCoeff();
  r.inequality = std::max(0.0, (prog.qp.G * x - prog.qp.h).maxCoeff());
  const auto ends = detail::tie_ends(net);
  for (std::size_t t = 0; t < net.ties().size(); ++t) {
    const auto& e = ends[t];
    const double from = s.x[e.from_area][e.from_slot].delta_t;
    const double to = s.x[e.to_area][e.to_slot].delta_t;
    r.consensus = std::max(r.consensus, std::abs(from + to));
    const double worst = std::max(std::abs(net.ties()[t].t_da + from), std::abs(-net.ties()[t].t_da + to));
    r.capacity_slack.push_back(net.ties()[t].capacity - worst);
  }
  r.max_residual = std::max({r.equality, r.inequality, r.consensus});
  for (double sl : r.capacity_slack) r.max_residual = std::max(r.max_residual, -sl);
  r.passed = r.max_residual <= tol;
  return r;
}

struct EfficiencyGap {
  double objective_gap = 0.0;   // (sum of limit generation costs - V*) / (1 + |V*|)
  double flow_deviation = 0.0;  // max over ties and both ends, MW
};

inline EfficiencyGap efficiency_gap(const Network& net, const CouplingState& s, const CentralSolution& c) {
  EfficiencyGap g;
  double cost = 0.0;
  for (const auto& r : s.last) cost += r.generation_cost;
  g.objective_gap = (cost - c.objective) / (1.0 + std::abs(c.objective));
  const auto ends = detail::tie_ends(net);
  for (std::size_t t = 0; t < net.ties().size(); ++t) {
    const auto& e = ends[t];
    const double t_da = net.ties()[t].t_da;
    g.flow_deviation = std::max(g.flow_deviation, std::abs(t_da + s.x[e.from_area][e.from_slot].delta_t - c.flow[t]));
    g.flow_deviation = std::max(g.flow_deviation, std::abs(-t_da + s.x[e.to_area][e.to_slot].delta_t + c.flow[t]));
  }
  return g;
}

struct KktEquivalenceReport {
  qp::KktResiduals residuals;      // centralized KKT at the constructed point
  double objective_gap = 0.0;      // relative, absolute value
  std::vector<double> eta_bar;     // constructed, per tie-line
  std::vector<double> kappa_bar;
  bool passed = true;
};

/// Builds a centralized primal-dual candidate from the limit: primal values
/// and every area multiplier are carried over by row label, the tie-line
/// definition dual from the from-area, and the capacity duals from the
/// limiting capacity price as eta_bar = max(s, 0), kappa_bar = max(-s, 0)
/// with s = (mu/2) sign(dT).
inline KktEquivalenceReport verify_kkt_equivalence(const CouplingState& s, const Network& net,
                                                   const CentralSolution& c, double tol = 1e-3,
                                                   double tol_obj = 1e-3) {
  if (s.last.size() != net.areas().size())
    throw std::invalid_argument("verify_kkt_equivalence: state carries no clearing results");
  const auto& prog = c.program;
  const auto& L = prog.layout;
  const auto x = detail::limit_primal(net, L, s.last);

  std::map<std::string, double> ineq, eq;
  for (std::size_t a = 0; a < net.areas().size(); ++a) {
    for (const auto& [k, v] : detail::by_label(s.last[a].ineq_labels, s.last[a].z)) ineq.emplace(k, v);
    const auto& area = net.areas()[a];
    for (const auto& [k, v] : detail::by_label(s.last[a].eq_labels, s.last[a].y)) {
      const bool own_tie = std::any_of(area.ties.begin(), area.ties.end(), [&](const TieEnd& e) {
        return e.orientation > 0 && k == label::tie("tie_def", net, e.tie);
      });
      if (own_tie || k == label::slack) eq[k] = v;
    }
  }

  KktEquivalenceReport r;
  Eigen::VectorXd z = Eigen::VectorXd::Zero(prog.qp.num_ineq());
  Eigen::VectorXd y = Eigen::VectorXd::Zero(prog.qp.num_eq());
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const auto it = ineq.find(prog.qp.ineq_labels[static_cast<std::size_t>(i)]);
    if (it != ineq.end()) z(i) = it->second;
  }
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const auto it = eq.find(prog.qp.eq_labels[static_cast<std::size_t>(i)]);
    if (it != eq.end()) y(i) = it->second;
  }
  for (std::size_t t = 0; t < net.ties().size(); ++t) {
    const double sv = 0.5 * s.mu[t] * detail::sign0(x(L.dt(t)));
    r.eta_bar.push_back(std::max(sv, 0.0));
    r.kappa_bar.push_back(std::max(-sv, 0.0));
    z(L.cap_fwd[t]) = r.eta_bar.back();
    z(L.cap_rev[t]) = r.kappa_bar.back();
  }
  r.residuals = qp::kkt_residuals(prog.qp, x, y, z);
  r.objective_gap = std::abs(efficiency_gap(net, s, c).objective_gap);
  r.passed = r.residuals.max() <= tol && r.objective_gap <= tol_obj;
  return r;
}

/// Comparison report written by the command-line front end.
inline nlohmann::json comparison_report(const Network& net, const EfficiencyGap& gap, const KktEquivalenceReport& kkt,
                                        const FeasibilityReport& feas, const NashReport& nash) {
  nlohmann::json j;
  j["objective_gap"] = gap.objective_gap;
  j["flow_deviation"] = gap.flow_deviation;
  j["kkt_residuals"] = {{"primal_eq", kkt.residuals.primal_eq},
                        {"primal_ineq", kkt.residuals.primal_ineq},
                        {"dual_stationarity", kkt.residuals.dual_stationarity},
                        {"complementarity", kkt.residuals.complementarity},
                        {"dual_feasibility", kkt.residuals.dual_feasibility}};
  nlohmann::json cap = nlohmann::json::object();
  for (std::size_t t = 0; t < net.ties().size(); ++t) cap[net.ties()[t].id] = feas.capacity_slack[t];
  j["feasibility_residuals"] = {{"equality", feas.equality},
                                {"inequality", feas.inequality},
                                {"consensus", feas.consensus},
                                {"capacity_slack", cap}};
  nlohmann::json ng = nlohmann::json::object();
  for (std::size_t a = 0; a < net.areas().size(); ++a) ng[net.areas()[a].id] = nash.gap[a];
  j["nash_gaps"] = ng;
  return j;
}

}  // namespace flex
