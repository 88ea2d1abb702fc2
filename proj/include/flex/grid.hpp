#pragma once

// Multi-area network data model, case-file I/O and scenario modifiers.
//
// Units: MW and USD/MWh throughout. Reactances are per-unit on an implicit
// 1.0 base, so a line flow is simply (theta_from - theta_to) / x.
//
// Each tie-line is stored once with a canonical direction. The from-area sees
// the flow variable with day-ahead flow t_da, the to-area sees the reverse
// orientation with day-ahead flow -t_da.

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "flex/errors.hpp"

namespace flex {

struct Bus {
  std::string id;  // unique within its area
  std::string area_id;
  double mean_net_demand = 0.0;  // MW
  double demand_std = 0.0;       // MW

  bool operator==(const Bus&) const = default;
};

struct Generator {
  std::string id;
  std::string area_id;
  std::string bus_id;
  double cost_quadratic = 0.0;  // USD/MW^2h, strictly positive
  double cost_linear = 0.0;     // USD/MWh
  double cost_constant = 0.0;   // USD/h
  double p_min = 0.0;
  double p_max = 0.0;
  double ramp_down = 0.0;  // signed lower bound on the intraday adjustment
  double ramp_up = 0.0;    // signed upper bound on the intraday adjustment
  double p_da = 0.0;

  double cost(double p) const { return (cost_quadratic * p + cost_linear) * p + cost_constant; }
  double marginal_cost(double p) const { return 2.0 * cost_quadratic * p + cost_linear; }

  bool operator==(const Generator&) const = default;
};

struct InternalLine {
  std::string area_id;
  std::string from_bus;
  std::string to_bus;
  double reactance = 0.0;
  double capacity = 0.0;

  bool operator==(const InternalLine&) const = default;
};

struct TieLine {
  std::string id;
  std::string from_area;
  std::string from_bus;
  std::string to_area;
  std::string to_bus;
  double reactance = 0.0;
  double capacity = 0.0;
  double t_da = 0.0;  // signed from -> to

  bool operator==(const TieLine&) const = default;
};

struct AreaSpec {
  std::string id;
  double confidence_tail = 0.05;  // t_a: the chance constraint holds with probability 1 - t_a

  bool operator==(const AreaSpec&) const = default;
};

struct SlackBus {
  std::string area;
  std::string bus;

  bool operator==(const SlackBus&) const = default;
};

/// Raw, unvalidated network content as it appears in a case file.
struct NetworkData {
  std::string name;
  std::vector<AreaSpec> areas;
  std::vector<Bus> buses;
  std::vector<Generator> generators;
  std::vector<InternalLine> lines;
  std::vector<TieLine> tie_lines;
  std::optional<SlackBus> slack;  // defaults to the first bus of the first area

  bool operator==(const NetworkData&) const = default;
};

/// One end of a tie-line as seen from an area.
struct TieEnd {
  std::size_t tie = 0;        // index into Network::ties()
  int orientation = +1;       // +1 for the from-area, -1 for the to-area
  std::size_t own_bus = 0;    // index into Network::buses()
  std::size_t other_bus = 0;  // index into Network::buses()
  std::size_t other_area = 0;
  double t_da = 0.0;  // day-ahead flow out of this area
};

/// Derived per-area view with indices into the network's flat tables.
struct Area {
  std::string id;
  double confidence_tail = 0.05;
  std::vector<std::size_t> buses;
  std::vector<std::size_t> generators;
  std::vector<std::size_t> lines;
  std::vector<TieEnd> ties;  // incident tie-lines in case-file order
};

std::vector<std::string> structural_violations(const NetworkData& d);

/// Immutable validated network. Safe to share across threads.
class Network {
public:
  /// Throws ValidationError listing every structural violation.
  explicit Network(NetworkData data) : data_(std::move(data)) {
    auto v = structural_violations(data_);
    if (!v.empty()) throw ValidationError(std::move(v));
    if (!data_.slack) data_.slack = SlackBus{data_.areas.front().id, first_bus_of(data_.areas.front().id)};
    build_index();
  }

  const NetworkData& data() const { return data_; }
  const std::string& name() const { return data_.name; }
  const std::vector<Area>& areas() const { return areas_; }
  const std::vector<Bus>& buses() const { return data_.buses; }
  const std::vector<Generator>& generators() const { return data_.generators; }
  const std::vector<InternalLine>& lines() const { return data_.lines; }
  const std::vector<TieLine>& ties() const { return data_.tie_lines; }
  const SlackBus& slack() const { return *data_.slack; }
  std::size_t slack_bus() const { return bus_index(slack().area, slack().bus); }

  std::size_t area_index(const std::string& id) const {
    auto it = area_idx_.find(id);
    if (it == area_idx_.end()) throw std::out_of_range("unknown area '" + id + "'");
    return it->second;
  }
  std::size_t bus_index(const std::string& area, const std::string& bus) const {
    auto it = bus_idx_.find({area, bus});
    if (it == bus_idx_.end()) throw std::out_of_range("unknown bus '" + area + "/" + bus + "'");
    return it->second;
  }
  std::optional<std::size_t> tie_index(const std::string& id) const {
    for (std::size_t i = 0; i < data_.tie_lines.size(); ++i)
      if (data_.tie_lines[i].id == id) return i;
    return std::nullopt;
  }
  /// Area index owning a bus.
  std::size_t bus_area(std::size_t bus) const { return area_index(data_.buses[bus].area_id); }

  /// Human-readable warnings (disconnected internal graphs).
  std::vector<std::string> warnings() const;

  bool operator==(const Network& o) const { return data_ == o.data_; }

private:
  std::string first_bus_of(const std::string& area) const {
    for (const auto& b : data_.buses)
      if (b.area_id == area) return b.id;
    return {};
  }

  void build_index() {
    for (std::size_t a = 0; a < data_.areas.size(); ++a) {
      area_idx_[data_.areas[a].id] = a;
      Area ar;
      ar.id = data_.areas[a].id;
      ar.confidence_tail = data_.areas[a].confidence_tail;
      areas_.push_back(std::move(ar));
    }
    for (std::size_t i = 0; i < data_.buses.size(); ++i) {
      const auto& b = data_.buses[i];
      bus_idx_[{b.area_id, b.id}] = i;
      areas_[area_idx_.at(b.area_id)].buses.push_back(i);
    }
    for (std::size_t g = 0; g < data_.generators.size(); ++g)
      areas_[area_idx_.at(data_.generators[g].area_id)].generators.push_back(g);
    for (std::size_t l = 0; l < data_.lines.size(); ++l)
      areas_[area_idx_.at(data_.lines[l].area_id)].lines.push_back(l);
    for (std::size_t t = 0; t < data_.tie_lines.size(); ++t) {
      const auto& tl = data_.tie_lines[t];
      const auto fa = area_idx_.at(tl.from_area);
      const auto ta = area_idx_.at(tl.to_area);
      const auto fb = bus_idx_.at({tl.from_area, tl.from_bus});
      const auto tb = bus_idx_.at({tl.to_area, tl.to_bus});
      areas_[fa].ties.push_back(TieEnd{t, +1, fb, tb, ta, tl.t_da});
      areas_[ta].ties.push_back(TieEnd{t, -1, tb, fb, fa, -tl.t_da});
    }
  }

  NetworkData data_;
  std::vector<Area> areas_;
  std::map<std::string, std::size_t> area_idx_;
  std::map<std::pair<std::string, std::string>, std::size_t> bus_idx_;
};

inline std::vector<std::string> structural_violations(const NetworkData& d) {
  std::vector<std::string> v;
  auto num = [](double x) {
    std::ostringstream os;
    os << x;
    return os.str();
  };

  std::set<std::string> area_ids;
  if (d.areas.empty()) v.push_back("areas: at least one area is required");
  for (const auto& a : d.areas) {
    if (!area_ids.insert(a.id).second) v.push_back("areas[" + a.id + "]: duplicate area id");
    if (!(a.confidence_tail > 0.0 && a.confidence_tail < 1.0))
      v.push_back("confidence[" + a.id + "]: t_a must lie in (0,1) (got " + num(a.confidence_tail) + ")");
  }

  std::set<std::pair<std::string, std::string>> bus_keys;
  for (const auto& b : d.buses) {
    const std::string path = "buses[" + b.area_id + "/" + b.id + "]";
    if (!area_ids.count(b.area_id)) v.push_back(path + ".area: unknown area '" + b.area_id + "'");
    if (!bus_keys.insert({b.area_id, b.id}).second) v.push_back(path + ": duplicate bus id");
    if (!std::isfinite(b.mean_net_demand)) v.push_back(path + ".mean: not finite");
    if (!(b.demand_std >= 0.0) || !std::isfinite(b.demand_std))
      v.push_back(path + ".std: must be >= 0 (got " + num(b.demand_std) + ")");
  }
  auto has_bus = [&](const std::string& a, const std::string& b) { return bus_keys.count({a, b}) > 0; };

  std::set<std::string> gen_ids;
  std::map<std::string, int> gens_per_area;
  for (const auto& g : d.generators) {
    const std::string path = "generators[" + g.id + "]";
    if (!gen_ids.insert(g.id).second) v.push_back(path + ": duplicate generator id");
    if (!has_bus(g.area_id, g.bus_id)) v.push_back(path + ".bus: unknown bus '" + g.area_id + "/" + g.bus_id + "'");
    ++gens_per_area[g.area_id];
    if (!(g.cost_quadratic > 0.0))
      v.push_back(path + ".cost_quadratic: must be > 0 (got " + num(g.cost_quadratic) + ")");
    if (!(g.p_min <= g.p_da && g.p_da <= g.p_max))
      v.push_back(path + ": requires p_min <= p_da <= p_max (got " + num(g.p_min) + ", " + num(g.p_da) + ", " +
                  num(g.p_max) + ")");
    if (!(g.ramp_down <= g.ramp_up))
      v.push_back(path + ": requires ramp_down <= ramp_up (got " + num(g.ramp_down) + ", " + num(g.ramp_up) + ")");
  }
  for (const auto& a : d.areas)
    if (gens_per_area[a.id] == 0) v.push_back("areas[" + a.id + "]: at least one generator is required");

  for (std::size_t i = 0; i < d.lines.size(); ++i) {
    const auto& l = d.lines[i];
    const std::string path = "lines[" + std::to_string(i) + "]";
    if (!has_bus(l.area_id, l.from_bus)) v.push_back(path + ".from: unknown bus '" + l.area_id + "/" + l.from_bus + "'");
    if (!has_bus(l.area_id, l.to_bus)) v.push_back(path + ".to: unknown bus '" + l.area_id + "/" + l.to_bus + "'");
    if (l.from_bus == l.to_bus) v.push_back(path + ": from and to bus coincide");
    if (!(l.reactance > 0.0)) v.push_back(path + ".reactance: must be > 0 (got " + num(l.reactance) + ")");
    if (!(l.capacity > 0.0)) v.push_back(path + ".capacity: must be > 0 (got " + num(l.capacity) + ")");
  }

  std::set<std::string> tie_ids;
  for (const auto& t : d.tie_lines) {
    const std::string path = "tie_lines[" + t.id + "]";
    if (!tie_ids.insert(t.id).second) v.push_back(path + ": duplicate tie-line id");
    if (!has_bus(t.from_area, t.from_bus))
      v.push_back(path + ".from: unknown bus '" + t.from_area + "/" + t.from_bus + "'");
    if (!has_bus(t.to_area, t.to_bus)) v.push_back(path + ".to: unknown bus '" + t.to_area + "/" + t.to_bus + "'");
    if (t.from_area == t.to_area) v.push_back(path + ": from_area and to_area must differ");
    if (!(t.reactance > 0.0)) v.push_back(path + ".reactance: must be > 0 (got " + num(t.reactance) + ")");
    if (!(t.capacity >= 0.0)) v.push_back(path + ".capacity: must be >= 0 (got " + num(t.capacity) + ")");
    if (!(std::abs(t.t_da) <= t.capacity))
      v.push_back(path + ".t_da: |t_da| must not exceed capacity (got " + num(t.t_da) + ")");
  }

  if (d.slack) {
    if (!has_bus(d.slack->area, d.slack->bus))
      v.push_back("slack: unknown bus '" + d.slack->area + "/" + d.slack->bus + "'");
  } else if (!d.areas.empty()) {
    bool found = false;
    for (const auto& b : d.buses) found = found || b.area_id == d.areas.front().id;
    if (!found) v.push_back("slack: first area has no buses to host the default slack");
  }
  return v;
}

inline std::vector<std::string> Network::warnings() const {
  std::vector<std::string> w;
  for (const auto& a : areas_) {
    if (a.buses.size() <= 1) continue;
    std::map<std::size_t, std::vector<std::size_t>> adj;
    for (auto l : a.lines) {
      const auto f = bus_index(a.id, data_.lines[l].from_bus);
      const auto t = bus_index(a.id, data_.lines[l].to_bus);
      adj[f].push_back(t);
      adj[t].push_back(f);
    }
    std::set<std::size_t> seen{a.buses.front()};
    std::deque<std::size_t> q{a.buses.front()};
    while (!q.empty()) {
      const auto u = q.front();
      q.pop_front();
      for (auto nb : adj[u])
        if (seen.insert(nb).second) q.push_back(nb);
    }
    if (seen.size() != a.buses.size())
      w.push_back("areas[" + a.id + "]: internal network is disconnected (" + std::to_string(seen.size()) + " of " +
                  std::to_string(a.buses.size()) + " buses reachable)");
  }
  return w;
}

// ---------------------------------------------------------------------------
// Case files
// ---------------------------------------------------------------------------

namespace detail {

inline const nlohmann::json& require(const nlohmann::json& j, const char* key, const std::string& path) {
  if (!j.is_object() || !j.contains(key)) throw ParseError(path + ": missing key '" + key + "'");
  return j.at(key);
}

inline double number(const nlohmann::json& j, const char* key, const std::string& path) {
  const auto& v = require(j, key, path);
  if (!v.is_number()) throw ParseError(path + "." + key + ": expected a number");
  return v.get<double>();
}

inline double number_or(const nlohmann::json& j, const char* key, double fallback, const std::string& path) {
  if (!j.contains(key)) return fallback;
  return number(j, key, path);
}

inline std::string text(const nlohmann::json& j, const char* key, const std::string& path) {
  const auto& v = require(j, key, path);
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  throw ParseError(path + "." + key + ": expected a string");
}

inline const nlohmann::json& array(const nlohmann::json& j, const char* key) {
  const auto& v = require(j, key, "case");
  if (!v.is_array()) throw ParseError(std::string("case.") + key + ": expected an array");
  return v;
}

}  // namespace detail

/// Parses a case document without validating it.
inline NetworkData parse_case(const std::string& document) {
  using detail::number;
  using detail::text;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(document);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("case: ") + e.what());
  }
  if (!j.is_object()) throw ParseError("case: top-level value must be an object");

  NetworkData d;
  d.name = j.value("name", std::string{});

  const auto& conf = detail::require(j, "confidence", "case");
  if (!conf.is_object()) throw ParseError("case.confidence: expected an object keyed by area id");
  for (const auto& a : detail::array(j, "areas")) {
    AreaSpec spec;
    spec.id = a.is_string() ? a.get<std::string>() : text(a, "id", "areas[]");
    if (!conf.contains(spec.id)) throw ParseError("case.confidence: missing t_a for area '" + spec.id + "'");
    if (!conf.at(spec.id).is_number()) throw ParseError("case.confidence." + spec.id + ": expected a number");
    spec.confidence_tail = conf.at(spec.id).get<double>();
    d.areas.push_back(std::move(spec));
  }

  for (const auto& b : detail::array(j, "buses")) {
    Bus bus;
    bus.area_id = text(b, "area", "buses[]");
    bus.id = text(b, "id", "buses[" + bus.area_id + "]");
    d.buses.push_back(std::move(bus));
  }

  const auto& dem = detail::require(j, "demand", "case");
  if (!dem.is_object()) throw ParseError("case.demand: expected an object");
  std::optional<double> cov;
  if (dem.contains("cov")) cov = number(dem, "cov", "case.demand");
  if (dem.contains("buses")) {
    if (!dem.at("buses").is_array()) throw ParseError("case.demand.buses: expected an array");
    for (const auto& e : dem.at("buses")) {
      const auto area = text(e, "area", "demand.buses[]");
      const auto id = text(e, "bus", "demand.buses[]");
      const std::string path = "demand.buses[" + area + "/" + id + "]";
      auto it = std::find_if(d.buses.begin(), d.buses.end(),
                             [&](const Bus& b) { return b.area_id == area && b.id == id; });
      if (it == d.buses.end()) throw ParseError(path + ": unknown bus");
      it->mean_net_demand = number(e, "mean", path);
      if (e.contains("std")) {
        it->demand_std = number(e, "std", path);
      } else if (cov) {
        it->demand_std = *cov * std::abs(it->mean_net_demand);
      } else {
        throw ParseError(path + ": needs 'std' or a global demand.cov");
      }
    }
  }

  for (const auto& g : detail::array(j, "generators")) {
    Generator gen;
    gen.id = text(g, "id", "generators[]");
    const std::string path = "generators[" + gen.id + "]";
    gen.area_id = text(g, "area", path);
    gen.bus_id = text(g, "bus", path);
    gen.cost_quadratic = number(g, "cost_quadratic", path);
    gen.cost_linear = detail::number_or(g, "cost_linear", 0.0, path);
    gen.cost_constant = detail::number_or(g, "cost_constant", 0.0, path);
    gen.p_min = number(g, "p_min", path);
    gen.p_max = number(g, "p_max", path);
    gen.ramp_down = number(g, "ramp_down", path);
    gen.ramp_up = number(g, "ramp_up", path);
    gen.p_da = number(g, "p_da", path);
    d.generators.push_back(std::move(gen));
  }

  for (const auto& l : detail::array(j, "lines")) {
    InternalLine line;
    line.area_id = text(l, "area", "lines[]");
    line.from_bus = text(l, "from", "lines[]");
    line.to_bus = text(l, "to", "lines[]");
    line.reactance = number(l, "reactance", "lines[]");
    line.capacity = number(l, "capacity", "lines[]");
    d.lines.push_back(std::move(line));
  }

  for (const auto& t : detail::array(j, "tie_lines")) {
    TieLine tie;
    tie.id = text(t, "id", "tie_lines[]");
    const std::string path = "tie_lines[" + tie.id + "]";
    tie.from_area = text(t, "from_area", path);
    tie.from_bus = text(t, "from_bus", path);
    tie.to_area = text(t, "to_area", path);
    tie.to_bus = text(t, "to_bus", path);
    tie.reactance = number(t, "reactance", path);
    tie.capacity = number(t, "capacity", path);
    tie.t_da = detail::number_or(t, "t_da", 0.0, path);
    d.tie_lines.push_back(std::move(tie));
  }

  if (j.contains("slack")) d.slack = SlackBus{text(j.at("slack"), "area", "slack"), text(j.at("slack"), "bus", "slack")};
  return d;
}

/// Parses and validates a case document.
inline Network load_case(const std::string& text) { return Network(parse_case(text)); }

/// Serializes a network; load_case(save_case(n)) == n field for field.
inline std::string save_case(const Network& net) {
  const auto& d = net.data();
  nlohmann::ordered_json j;
  if (!d.name.empty()) j["name"] = d.name;
  j["areas"] = nlohmann::ordered_json::array();
  for (const auto& a : d.areas) j["areas"].push_back({{"id", a.id}});
  j["buses"] = nlohmann::ordered_json::array();
  for (const auto& b : d.buses) j["buses"].push_back({{"area", b.area_id}, {"id", b.id}});
  j["generators"] = nlohmann::ordered_json::array();
  for (const auto& g : d.generators)
    j["generators"].push_back({{"id", g.id},
                               {"area", g.area_id},
                               {"bus", g.bus_id},
                               {"cost_quadratic", g.cost_quadratic},
                               {"cost_linear", g.cost_linear},
                               {"cost_constant", g.cost_constant},
                               {"p_min", g.p_min},
                               {"p_max", g.p_max},
                               {"ramp_down", g.ramp_down},
                               {"ramp_up", g.ramp_up},
                               {"p_da", g.p_da}});
  j["lines"] = nlohmann::ordered_json::array();
  for (const auto& l : d.lines)
    j["lines"].push_back({{"area", l.area_id},
                          {"from", l.from_bus},
                          {"to", l.to_bus},
                          {"reactance", l.reactance},
                          {"capacity", l.capacity}});
  j["tie_lines"] = nlohmann::ordered_json::array();
  for (const auto& t : d.tie_lines)
    j["tie_lines"].push_back({{"id", t.id},
                              {"from_area", t.from_area},
                              {"from_bus", t.from_bus},
                              {"to_area", t.to_area},
                              {"to_bus", t.to_bus},
                              {"reactance", t.reactance},
                              {"capacity", t.capacity},
                              {"t_da", t.t_da}});
  nlohmann::ordered_json dem;
  dem["buses"] = nlohmann::ordered_json::array();
  for (const auto& b : d.buses)
    dem["buses"].push_back({{"area", b.area_id}, {"bus", b.id}, {"mean", b.mean_net_demand}, {"std", b.demand_std}});
  j["demand"] = dem;
  nlohmann::ordered_json conf = nlohmann::ordered_json::object();
  for (const auto& a : d.areas) conf[a.id] = a.confidence_tail;
  j["confidence"] = conf;
  j["slack"] = {{"area", net.slack().area}, {"bus", net.slack().bus}};
  return j.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Scenario modifiers
// ---------------------------------------------------------------------------

struct ScenarioModifiers {
  double generator_capacity_scale = 1.0;
  double ramp_scale = 1.0;
  std::map<std::string, double> tie_capacity_overrides;  // tie id -> MW
  std::optional<double> demand_cov_override;

  std::vector<std::string> violations() const {
    std::vector<std::string> v;
    if (!(generator_capacity_scale > 0.0)) v.push_back("generator_capacity_scale must be > 0");
    if (!(ramp_scale > 0.0)) v.push_back("ramp_scale must be > 0");
    for (const auto& [id, cap] : tie_capacity_overrides)
      if (!(cap >= 0.0)) v.push_back("tie override '" + id + "' must be >= 0");
    if (demand_cov_override && !(*demand_cov_override >= 0.0)) v.push_back("demand_cov_override must be >= 0");
    return v;
  }

  bool operator==(const ScenarioModifiers&) const = default;
};

/// Returns a modified copy. Cost coefficients are kept, so the cost curve is
/// extrapolated over any extended capacity range.
inline Network apply_scenario(const Network& net, const ScenarioModifiers& mods) {
  if (auto v = mods.violations(); !v.empty()) throw ValidationError(std::move(v));
  NetworkData d = net.data();
  for (auto& g : d.generators) {
    g.p_max *= mods.generator_capacity_scale;
    g.ramp_down *= mods.ramp_scale;
    g.ramp_up *= mods.ramp_scale;
  }
  for (const auto& [id, cap] : mods.tie_capacity_overrides) {
    auto it = std::find_if(d.tie_lines.begin(), d.tie_lines.end(), [&](const TieLine& t) { return t.id == id; });
    if (it == d.tie_lines.end()) throw ValidationError({"tie_capacity_overrides: unknown tie-line '" + id + "'"});
    it->capacity = cap;
  }
  if (mods.demand_cov_override)
    for (auto& b : d.buses) b.demand_std = *mods.demand_cov_override * std::abs(b.mean_net_demand);
  return Network(std::move(d));
}

}  // namespace flex
