#pragma once

// Bundled case fixtures.
//
// toy2            two single-bus areas, cheap supply in A1, demand in A2
// toy2-congested  the same with a 5 MW tie-line
// tri3            three areas, five tie-lines. A1 hosts an inflexible
//                 baseload whose surplus is partly stranded behind two
//                 internal lines, so A exports from A2/A3 at nodal prices
//                 while B and C import.

#include <array>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>

#include "flex/grid.hpp"

namespace flex::cases {

inline constexpr std::string_view toy2 = R"({
  "name": "toy2",
  "areas": [{"id": "A1"}, {"id": "A2"}],
  "buses": [{"area": "A1", "id": "b1"}, {"area": "A2", "id": "b2"}],
  "generators": [
    {"id": "g1", "area": "A1", "bus": "b1", "cost_quadratic": 0.5, "cost_linear": 0, "cost_constant": 0,
     "p_min": 0, "p_max": 100, "ramp_down": -50, "ramp_up": 50, "p_da": 0},
    {"id": "g2", "area": "A2", "bus": "b2", "cost_quadratic": 2.0, "cost_linear": 0, "cost_constant": 0,
     "p_min": 0, "p_max": 100, "ramp_down": -50, "ramp_up": 50, "p_da": 0}
  ],
  "lines": [],
  "tie_lines": [
    {"id": "T12", "from_area": "A1", "from_bus": "b1", "to_area": "A2", "to_bus": "b2",
     "reactance": 0.1, "capacity": 100, "t_da": 0}
  ],
  "demand": {"cov": 0.06, "buses": [
    {"area": "A1", "bus": "b1", "mean": 0},
    {"area": "A2", "bus": "b2", "mean": 10}
  ]},
  "confidence": {"A1": 0.5, "A2": 0.5},
  "slack": {"area": "A1", "bus": "b1"}
})";

inline constexpr std::string_view toy2_congested = R"({
  "name": "toy2-congested",
  "areas": [{"id": "A1"}, {"id": "A2"}],
  "buses": [{"area": "A1", "id": "b1"}, {"area": "A2", "id": "b2"}],
  "generators": [
    {"id": "g1", "area": "A1", "bus": "b1", "cost_quadratic": 0.5, "cost_linear": 0, "cost_constant": 0,
     "p_min": 0, "p_max": 100, "ramp_down": -50, "ramp_up": 50, "p_da": 0},
    {"id": "g2", "area": "A2", "bus": "b2", "cost_quadratic": 2.0, "cost_linear": 0, "cost_constant": 0,
     "p_min": 0, "p_max": 100, "ramp_down": -50, "ramp_up": 50, "p_da": 0}
  ],
  "lines": [],
  "tie_lines": [
    {"id": "T12", "from_area": "A1", "from_bus": "b1", "to_area": "A2", "to_bus": "b2",
     "reactance": 0.1, "capacity": 5, "t_da": 0}
  ],
  "demand": {"cov": 0.06, "buses": [
    {"area": "A1", "bus": "b1", "mean": 0},
    {"area": "A2", "bus": "b2", "mean": 10}
  ]},
  "confidence": {"A1": 0.5, "A2": 0.5},
  "slack": {"area": "A1", "bus": "b1"}
})";

inline constexpr std::string_view tri3 = R"({
  "name": "tri3",
  "areas": [{"id": "A"}, {"id": "B"}, {"id": "C"}],
  "buses": [
    {"area": "A", "id": "1"}, {"area": "A", "id": "2"}, {"area": "A", "id": "3"},
    {"area": "B", "id": "1"}, {"area": "B", "id": "2"},
    {"area": "C", "id": "1"}, {"area": "C", "id": "2"}
  ],
  "generators": [
    {"id": "A1-base", "area": "A", "bus": "1", "cost_quadratic": 0.01, "cost_linear": 10,
     "p_min": 50, "p_max": 200, "ramp_down": 0, "ramp_up": 10, "p_da": 150},
    {"id": "A2-ccgt", "area": "A", "bus": "2", "cost_quadratic": 0.05, "cost_linear": 15,
     "p_min": 0, "p_max": 150, "ramp_down": -40, "ramp_up": 100, "p_da": 60},
    {"id": "A3-ccgt", "area": "A", "bus": "3", "cost_quadratic": 0.08, "cost_linear": 18,
     "p_min": 0, "p_max": 100, "ramp_down": -30, "ramp_up": 60, "p_da": 40},
    {"id": "B1-ct", "area": "B", "bus": "1", "cost_quadratic": 0.1, "cost_linear": 25,
     "p_min": 20, "p_max": 140, "ramp_down": -30, "ramp_up": 30, "p_da": 80},
    {"id": "B2-ct", "area": "B", "bus": "2", "cost_quadratic": 0.15, "cost_linear": 30,
     "p_min": 0, "p_max": 90, "ramp_down": -20, "ramp_up": 20, "p_da": 50},
    {"id": "C1-ct", "area": "C", "bus": "1", "cost_quadratic": 0.12, "cost_linear": 22,
     "p_min": 10, "p_max": 110, "ramp_down": -25, "ramp_up": 25, "p_da": 70},
    {"id": "C2-ct", "area": "C", "bus": "2", "cost_quadratic": 0.2, "cost_linear": 28,
     "p_min": 0, "p_max": 80, "ramp_down": -20, "ramp_up": 20, "p_da": 40}
  ],
  "lines": [
    {"area": "A", "from": "1", "to": "2", "reactance": 0.1, "capacity": 40},
    {"area": "A", "from": "1", "to": "3", "reactance": 0.1, "capacity": 40},
    {"area": "A", "from": "2", "to": "3", "reactance": 0.1, "capacity": 100},
    {"area": "B", "from": "1", "to": "2", "reactance": 0.1, "capacity": 100},
    {"area": "C", "from": "1", "to": "2", "reactance": 0.1, "capacity": 100}
  ],
  "tie_lines": [
    {"id": "AB1", "from_area": "A", "from_bus": "2", "to_area": "B", "to_bus": "1",
     "reactance": 0.2, "capacity": 100, "t_da": 10},
    {"id": "AB2", "from_area": "A", "from_bus": "3", "to_area": "B", "to_bus": "2",
     "reactance": 0.25, "capacity": 100, "t_da": 10},
    {"id": "AC1", "from_area": "A", "from_bus": "2", "to_area": "C", "to_bus": "1",
     "reactance": 0.2, "capacity": 100, "t_da": 10},
    {"id": "AC2", "from_area": "A", "from_bus": "3", "to_area": "C", "to_bus": "2",
     "reactance": 0.25, "capacity": 100, "t_da": 10},
    {"id": "BC", "from_area": "B", "from_bus": "1", "to_area": "C", "to_bus": "1",
     "reactance": 0.3, "capacity": 100, "t_da": 0}
  ],
  "demand": {"cov": 0.06, "buses": [
    {"area": "A", "bus": "1", "mean": 50},
    {"area": "A", "bus": "2", "mean": 80},
    {"area": "A", "bus": "3", "mean": 70},
    {"area": "B", "bus": "1", "mean": 70},
    {"area": "B", "bus": "2", "mean": 80},
    {"area": "C", "bus": "1", "mean": 60},
    {"area": "C", "bus": "2", "mean": 70}
  ]},
  "confidence": {"A": 0.05, "B": 0.05, "C": 0.05},
  "slack": {"area": "A", "bus": "1"}
})";

inline constexpr std::array<std::string_view, 3> names = {"toy2", "toy2-congested", "tri3"};

/// Case text for a bundled name, or std::nullopt-like empty view when unknown.
inline std::string_view text(std::string_view name) {
  if (name == "toy2") return toy2;
  if (name == "toy2-congested") return toy2_congested;
  if (name == "tri3") return tri3;
  return {};
}

inline bool is_bundled(std::string_view name) { return !text(name).empty(); }

/// Bundled name or path to a case file.
inline Network load(const std::string& source) {
  if (auto t = text(source); !t.empty()) return load_case(std::string(t));
  std::ifstream in(source);
  if (!in) throw ParseError("cannot open case file '" + source + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return load_case(ss.str());
}

}  // namespace flex::cases
