#pragma once

// Round-based market coupling. Every round each area clears against its
// neighbors' previous broadcasts, blends the fresh result into its broadcast
// with a diminishing step, and each tie-line's capacity price moves with the
// observed capacity violation.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <future>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

#include "flex/area_market.hpp"
#include "flex/errors.hpp"
#include "flex/grid.hpp"
#include "flex/message.hpp"

namespace flex {

/// Step schedule rho_k = rho0 / (k + k0)^p.
struct StepSchedule {
  double rho0 = 1.0;
  double k0 = 1.0;
  double p = 1.0;
};

struct MechanismConfig {
  int max_rounds = 5000;
  StepSchedule schedule;
  double beta = 0.1;
  double tolerance = 1e-6;  // on the max-norm change of the broadcast
  int patience = 5;         // consecutive rounds below tolerance
  bool warm_start = false;  // one zero-terms clear before round 1
  bool parallel = true;     // clear areas concurrently within a round
  qp::SolverConfig solver;

  void check() const {
    if (max_rounds < 1) throw ConfigError("max_rounds must be >= 1");
    if (!(schedule.rho0 > 0.0)) throw ConfigError("rho0 must be > 0");
    if (!(schedule.k0 >= 0.0)) throw ConfigError("k0 must be >= 0");
    if (!(schedule.p > 0.5 && schedule.p <= 1.0)) throw ConfigError("schedule exponent must lie in (0.5, 1]");
    if (schedule.rho0 / std::pow(1.0 + schedule.k0, schedule.p) > 1.0)
      throw ConfigError("rho0 / (1 + k0)^p must not exceed 1");
    if (!(beta > 0.0 && beta < 1.0)) throw ConfigError("beta must lie in (0, 1)");
    if (!(tolerance > 0.0)) throw ConfigError("tolerance must be > 0");
    if (patience < 1) throw ConfigError("patience must be >= 1");
  }
};

inline double step_rho(int k, const StepSchedule& s) {
  if (k < 1) throw std::invalid_argument("step_rho: k must be >= 1");
  return s.rho0 / std::pow(k + s.k0, s.p);
}

/// What an area broadcasts about one incident tie-line.
struct TieBroadcast {
  double delta_t = 0.0;  // MW, own orientation
  double theta = 0.0;    // rad, own boundary bus
  double delta = 0.0;    // USD/MWh, willingness to pay

  bool operator==(const TieBroadcast&) const = default;
};

using AreaBroadcast = std::vector<TieBroadcast>;  // Area::ties order

inline AreaBroadcast inertial_update(const AreaBroadcast& prev, const AreaBroadcast& fresh, double rho) {
  if (prev.size() != fresh.size()) throw std::invalid_argument("inertial_update: shape mismatch");
  AreaBroadcast out(prev.size());
  for (std::size_t i = 0; i < prev.size(); ++i) {
    out[i].delta_t = (1.0 - rho) * prev[i].delta_t + rho * fresh[i].delta_t;
    out[i].theta = (1.0 - rho) * prev[i].theta + rho * fresh[i].theta;
    out[i].delta = (1.0 - rho) * prev[i].delta + rho * fresh[i].delta;
  }
  return out;
}

inline double update_capacity_price(double mu_prev, double abs_dt_a, double abs_dt_b, double abs_t_da,
                                    double capacity, double beta) {
  return std::max(mu_prev + beta * (0.5 * (abs_dt_a + abs_dt_b) + abs_t_da - capacity), 0.0);
}

struct CouplingState {
  int round = 0;
  std::vector<AreaBroadcast> x;          // per area
  std::vector<double> mu;                // per tie-line
  std::vector<ClearingResult> last;      // fresh clears of the latest round
};

struct TraceRecord {
  int k = 0;
  // Per tie-line, network order.
  std::vector<double> flow_from, flow_to, mu, delta_from, delta_to;
  // Per area, network order.
  std::vector<double> gamma, objective;
  double dx_inf = 0.0;
  double consensus = 0.0;
  double slackness = 0.0;
  std::vector<double> x;  // flattened broadcast, for metrics
};

struct RunResult {
  CouplingState state;
  std::vector<TraceRecord> trace;
  bool converged = false;
};

namespace detail {

struct TieEnds {
  std::size_t from_area, from_slot, to_area, to_slot;
};

inline std::vector<TieEnds> tie_ends(const Network& net) {
  std::vector<TieEnds> out(net.ties().size());
  for (std::size_t a = 0; a < net.areas().size(); ++a)
    for (std::size_t k = 0; k < net.areas()[a].ties.size(); ++k) {
      const auto& e = net.areas()[a].ties[k];
      if (e.orientation > 0) {
        out[e.tie].from_area = a;
        out[e.tie].from_slot = k;
      } else {
        out[e.tie].to_area = a;
        out[e.tie].to_slot = k;
      }
    }
  return out;
}

inline double capacity_excess(const Network& net, const std::vector<TieEnds>& ends, const CouplingState& s,
                         std::size_t t) {
  const auto& e = ends[t];
  const auto& tie = net.ties()[t];
  return 0.5 * (std::abs(s.x[e.from_area][e.from_slot].delta_t) + std::abs(s.x[e.to_area][e.to_slot].delta_t)) +
         std::abs(tie.t_da) - tie.capacity;
}

inline std::vector<double> flatten(const std::vector<AreaBroadcast>& x) {
  std::vector<double> v;
  for (const auto& a : x)
    for (const auto& t : a) {
      v.push_back(t.delta_t);
      v.push_back(t.theta);
      v.push_back(t.delta);
    }
  return v;
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace detail

/// Terms area `a` faces given the broadcasts and capacity prices in `s`.
inline TermsOfTrade terms_for(const Network& net, const CouplingState& s, std::size_t a) {
  const auto ends = detail::tie_ends(net);
  TermsOfTrade t;
  for (const auto& e : net.areas()[a].ties) {
    const auto& te = ends[e.tie];
    const auto& other = e.orientation > 0 ? s.x[te.to_area][te.to_slot] : s.x[te.from_area][te.from_slot];
    t.ties.push_back(TieTerms{other.delta, other.theta, s.mu[e.tie]});
  }
  return t;
}

inline AreaBroadcast broadcast_of(const ClearingResult& r) {
  AreaBroadcast b(r.decision.delta_t.size());
  for (std::size_t i = 0; i < b.size(); ++i) b[i] = {r.decision.delta_t[i], r.boundary_theta[i], r.willingness_to_pay[i]};
  return b;
}

inline ExchangeMessage to_message(const Network& net, std::size_t a, int round, const AreaBroadcast& x) {
  ExchangeMessage m{net.areas()[a].id, round, {}};
  for (std::size_t k = 0; k < x.size(); ++k)
    m.ties.push_back({net.ties()[net.areas()[a].ties[k].tie].id, x[k].delta_t, x[k].theta, x[k].delta});
  return m;
}

inline AreaBroadcast from_message(const Network& net, std::size_t a, const ExchangeMessage& m) {
  const auto& area = net.areas()[a];
  if (m.sender != area.id) throw ParseError("message: sender '" + m.sender + "' where '" + area.id + "' was expected");
  if (m.ties.size() != area.ties.size())
    throw ParseError("message from '" + m.sender + "' does not cover exactly its incident ties");
  AreaBroadcast x(m.ties.size());
  for (std::size_t k = 0; k < x.size(); ++k) {
    if (m.ties[k].id != net.ties()[area.ties[k].tie].id)
      throw ParseError("message from '" + m.sender + "': unexpected tie '" + m.ties[k].id + "'");
    x[k] = {m.ties[k].delta_t_mw, m.ties[k].theta_rad, m.ties[k].delta_price};
  }
  return x;
}

inline TraceRecord make_record(const Network& net, const CouplingState& s, double dx_inf) {
  const auto ends = detail::tie_ends(net);
  TraceRecord r;
  r.k = s.round;
  for (std::size_t t = 0; t < net.ties().size(); ++t) {
    const auto& e = ends[t];
    const auto& tie = net.ties()[t];
    const auto& f = s.x[e.from_area][e.from_slot];
    const auto& g = s.x[e.to_area][e.to_slot];
    r.flow_from.push_back(tie.t_da + f.delta_t);
    r.flow_to.push_back(-tie.t_da + g.delta_t);
    r.mu.push_back(s.mu[t]);
    r.delta_from.push_back(f.delta);
    r.delta_to.push_back(g.delta);
    r.consensus = std::max(r.consensus, std::abs(r.flow_from.back() + r.flow_to.back()));
    r.slackness = std::max(r.slackness, std::abs(s.mu[t] * detail::capacity_excess(net, ends, s, t)));
  }
  for (const auto& c : s.last) {
    r.gamma.push_back(c.duals.gamma);
    r.objective.push_back(c.objective);
  }
  r.dx_inf = dx_inf;
  r.x = detail::flatten(s.x);
  return r;
}

namespace detail {

inline std::vector<ClearingResult> clear_all(const ClearingInterface& cl, const std::vector<TermsOfTrade>& terms,
                                             bool parallel, int round) {
  const auto n = terms.size();
  std::vector<ClearingResult> out(n);
  auto rethrow = [&](const SolveError& e) {
    return SolveError(e.area(), round, e.status(),
                      "area '" + e.area() + "': clearing problem " + e.status() + " in round " + std::to_string(round));
  };
  if (parallel && n > 1) {
    std::vector<std::future<ClearingResult>> fut;
    for (std::size_t a = 0; a < n; ++a)
      fut.push_back(std::async(std::launch::async, [&cl, &terms, a] { return cl.clear(a, terms[a]); }));
    for (std::size_t a = 0; a < n; ++a) {
      try {
        out[a] = fut[a].get();
      } catch (const SolveError& e) {
        for (std::size_t b = a + 1; b < n; ++b) fut[b].wait();
        throw rethrow(e);
      }
    }
  } else {
    for (std::size_t a = 0; a < n; ++a) {
      try {
        out[a] = cl.clear(a, terms[a]);
      } catch (const SolveError& e) {
        throw rethrow(e);
      }
    }
  }
  return out;
}

}  // namespace detail

/// Runs the mechanism with a caller-supplied clearing implementation.
/// `on_round` (optional) observes every completed round.
inline RunResult run(const Network& net, const ClearingInterface& clearing, const MechanismConfig& cfg,
                     const std::function<void(const TraceRecord&)>& on_round = {}) {
  cfg.check();
  if (clearing.num_areas() != net.areas().size()) throw ConfigError("clearing interface does not match the network");
  const auto n_area = net.areas().size();
  const auto ends = detail::tie_ends(net);

  RunResult res;
  CouplingState& s = res.state;
  s.x.resize(n_area);
  for (std::size_t a = 0; a < n_area; ++a) s.x[a].assign(net.areas()[a].ties.size(), TieBroadcast{});
  s.mu.assign(net.ties().size(), 0.0);

  auto exchange = [&](int round) {
    // Every broadcast goes through the wire format, as a networked deployment would.
    for (std::size_t a = 0; a < n_area; ++a)
      s.x[a] = from_message(net, a, decode_message(encode_message(to_message(net, a, round, s.x[a])), round));
  };
  auto all_terms = [&] {
    std::vector<TermsOfTrade> t;
    for (std::size_t a = 0; a < n_area; ++a) t.push_back(terms_for(net, s, a));
    return t;
  };

  if (cfg.warm_start) {
    s.last = detail::clear_all(clearing, all_terms(), cfg.parallel, 0);
    for (std::size_t a = 0; a < n_area; ++a) s.x[a] = broadcast_of(s.last[a]);
  }

  int calm = 0;
  for (int k = 1; k <= cfg.max_rounds; ++k) {
    exchange(k - 1);
    s.last = detail::clear_all(clearing, all_terms(), cfg.parallel, k);
    const double rho = step_rho(k, cfg.schedule);
    const auto before = detail::flatten(s.x);
    for (std::size_t a = 0; a < n_area; ++a) s.x[a] = inertial_update(s.x[a], broadcast_of(s.last[a]), rho);
    for (std::size_t t = 0; t < net.ties().size(); ++t) {
      const auto& e = ends[t];
      s.mu[t] = update_capacity_price(s.mu[t], std::abs(s.x[e.from_area][e.from_slot].delta_t),
                                      std::abs(s.x[e.to_area][e.to_slot].delta_t), std::abs(net.ties()[t].t_da),
                                      net.ties()[t].capacity, cfg.beta);
    }
    s.round = k;
    const double dx = detail::max_abs_diff(detail::flatten(s.x), before);
    res.trace.push_back(make_record(net, s, dx));
    if (on_round) on_round(res.trace.back());
    calm = dx < cfg.tolerance ? calm + 1 : 0;
    if (calm >= cfg.patience) {
      res.converged = true;
      break;
    }
  }
  return res;
}

inline RunResult run(const Network& net, const MechanismConfig& cfg,
                     const std::function<void(const TraceRecord&)>& on_round = {}) {
  const ChanceConstrainedClearing clearing(net, cfg.solver);
  return run(net, clearing, cfg, on_round);
}

/// Every area clears once with all tie-line adjustments held at zero.
inline std::vector<ClearingResult> zero_trade(const Network& net, const qp::SolverConfig& solver = {}) {
  const ChanceConstrainedClearing clearing(net, solver);
  std::vector<ClearingResult> out;
  for (std::size_t a = 0; a < net.areas().size(); ++a) {
    ClearingOptions o;
    o.fixed_delta_t.assign(net.areas()[a].ties.size(), 0.0);
    out.push_back(clearing.clear(a, zero_terms(net, a), o));
  }
  return out;
}

struct ConvergenceMetrics {
  double dx_inf = 0.0;
  std::vector<double> slackness;  // per tie, signed mu * (capacity term)
  std::vector<double> consensus;  // per tie, |flow_from + flow_to|
  double max_slackness = 0.0;     // max |slackness|
  double max_consensus = 0.0;
};

inline ConvergenceMetrics convergence_metrics(const Network& net, const std::vector<TraceRecord>& trace) {
  if (trace.size() < 2) throw std::invalid_argument("convergence_metrics: need at least two records");
  const auto& last = trace.back();
  ConvergenceMetrics m;
  m.dx_inf = detail::max_abs_diff(last.x, trace[trace.size() - 2].x);
  for (std::size_t t = 0; t < net.ties().size(); ++t) {
    const auto& tie = net.ties()[t];
    const double dt_from = last.flow_from[t] - tie.t_da;
    const double dt_to = last.flow_to[t] + tie.t_da;
    const double sl = last.mu[t] * (0.5 * (std::abs(dt_from) + std::abs(dt_to)) + std::abs(tie.t_da) - tie.capacity);
    m.slackness.push_back(sl);
    m.consensus.push_back(std::abs(last.flow_from[t] + last.flow_to[t]));
    m.max_slackness = std::max(m.max_slackness, std::abs(sl));
    m.max_consensus = std::max(m.max_consensus, m.consensus.back());
  }
  return m;
}

struct NashReport {
  std::vector<double> limit_objective;  // per area
  std::vector<double> best_objective;   // per area
  std::vector<double> gap;              // limit - best, per area
  bool passed = true;
};

/// Re-clears every area against the frozen limit terms. The limit strategy
/// keeps the area's broadcast boundary angles, hence its tie flows; the best
/// response is unrestricted. A gap above tol * (1 + |V_a|) flags a
/// profitable unilateral deviation.
inline NashReport verify_nash(const Network& net, const CouplingState& s, const ClearingInterface& clearing,
                              double tol) {
  NashReport r;
  const auto slack = net.slack_bus();
  for (std::size_t a = 0; a < net.areas().size(); ++a) {
    const auto& area = net.areas()[a];
    const auto terms = terms_for(net, s, a);
    ClearingOptions pin;
    pin.fixed_theta.assign(area.buses.size(), std::nullopt);
    for (std::size_t k = 0; k < area.ties.size(); ++k) {
      const auto b = area.ties[k].own_bus;
      if (b == slack) continue;
      const auto slot = static_cast<std::size_t>(std::find(area.buses.begin(), area.buses.end(), b) - area.buses.begin());
      pin.fixed_theta[slot] = s.x[a][k].theta;
    }
    const auto limit = clearing.clear(a, terms, pin);
    const auto best = clearing.clear(a, terms);
    r.limit_objective.push_back(limit.objective);
    r.best_objective.push_back(best.objective);
    r.gap.push_back(limit.objective - best.objective);
    if (r.gap.back() > tol * (1.0 + std::abs(limit.objective))) r.passed = false;
  }
  return r;
}

/// CSV with a fixed column order: k, per tie (sorted by id) flow_from,
/// flow_to, mu, delta_from, delta_to, per area (sorted by id) gamma,
/// objective, then dx_inf, consensus, slackness.
inline void write_trace_csv(std::ostream& os, const Network& net, const std::vector<TraceRecord>& trace) {
  std::vector<std::size_t> ties(net.ties().size()), areas(net.areas().size());
  std::iota(ties.begin(), ties.end(), 0);
  std::iota(areas.begin(), areas.end(), 0);
  std::sort(ties.begin(), ties.end(), [&](auto a, auto b) { return net.ties()[a].id < net.ties()[b].id; });
  std::sort(areas.begin(), areas.end(), [&](auto a, auto b) { return net.areas()[a].id < net.areas()[b].id; });

  os << "k";
  for (auto t : ties)
    for (const char* c : {"flow_from", "flow_to", "mu", "delta_from", "delta_to"}) os << ',' << net.ties()[t].id << '.' << c;
  for (auto a : areas)
    for (const char* c : {"gamma", "objective"}) os << ',' << net.areas()[a].id << '.' << c;
  os << ",dx_inf,consensus,slackness\n";

  char buf[32];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    os << ',' << buf;
  };
  for (const auto& r : trace) {
    os << r.k;
    for (auto t : ties) {
      num(r.flow_from[t]);
      num(r.flow_to[t]);
      num(r.mu[t]);
      num(r.delta_from[t]);
      num(r.delta_to[t]);
    }
    for (auto a : areas) {
      num(r.gamma[a]);
      num(r.objective[a]);
    }
    num(r.dx_inf);
    num(r.consensus);
    num(r.slackness);
    os << '\n';
  }
}

}  // namespace flex
