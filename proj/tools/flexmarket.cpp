// flexmarket: command-line front end for the intraday coupling mechanism.
//
// Exit codes: 0 success, 2 configuration or input error, 3 infeasible model,
// 4 convergence or check failure. Errors are written to stderr as one JSON
// object.

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "flex/benchmark.hpp"
#include "flex/cases.hpp"
#include "flex/coupling.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kConfig = 2;
constexpr int kInfeasible = 3;
constexpr int kFailed = 4;

struct Options {
  std::string case_source;
  std::string mode = "decentralized";
  std::vector<std::string> scenario;
  double capacity_scale = 1.0;
  double ramp_scale = 1.0;
  std::vector<std::string> tie_override;
  std::string trace_path;
  std::string report_path;
  flex::MechanismConfig mech;
};

int fail(int code, const std::string& kind, const std::string& message,
         const std::vector<std::string>& details = {}) {
  nlohmann::json j{{"error", kind}, {"message", message}, {"exit_code", code}};
  if (!details.empty()) j["violations"] = details;
  std::cerr << j.dump() << '\n';
  return code;
}

std::pair<std::string, double> key_value(const std::string& kv, const char* what) {
  const auto eq = kv.find('=');
  if (eq == std::string::npos || eq == 0) throw flex::ConfigError(std::string(what) + " '" + kv + "' is not key=value");
  const std::string value = kv.substr(eq + 1);
  char* end = nullptr;
  const double v = std::strtod(value.c_str(), &end);
  if (value.empty() || *end != '\0') throw flex::ConfigError(std::string(what) + " '" + kv + "' has a non-numeric value");
  return {kv.substr(0, eq), v};
}

flex::ScenarioModifiers modifiers(const Options& o) {
  flex::ScenarioModifiers m;
  m.generator_capacity_scale = o.capacity_scale;
  m.ramp_scale = o.ramp_scale;
  for (const auto& kv : o.tie_override) {
    const auto [id, mw] = key_value(kv, "tie override");
    m.tie_capacity_overrides[id] = mw;
  }
  for (const auto& kv : o.scenario) {
    const auto [key, v] = key_value(kv, "scenario");
    if (key == "generator_capacity_scale") {
      m.generator_capacity_scale = v;
    } else if (key == "ramp_scale") {
      m.ramp_scale = v;
    } else if (key == "demand_cov_override") {
      m.demand_cov_override = v;
    } else if (key.rfind("tie_capacity.", 0) == 0) {
      m.tie_capacity_overrides[key.substr(13)] = v;
    } else {
      throw flex::ConfigError("unknown scenario key '" + key + "'");
    }
  }
  return m;
}

nlohmann::json area_summary(const flex::Network& net, const std::vector<flex::ClearingResult>& last) {
  nlohmann::json j = nlohmann::json::object();
  for (std::size_t a = 0; a < net.areas().size(); ++a)
    j[net.areas()[a].id] = {{"gamma", last[a].duals.gamma},
                            {"objective", last[a].objective},
                            {"generation_cost", last[a].generation_cost}};
  return j;
}

nlohmann::json tie_summary(const flex::Network& net, const flex::TraceRecord& r) {
  nlohmann::json j = nlohmann::json::object();
  for (std::size_t t = 0; t < net.ties().size(); ++t)
    j[net.ties()[t].id] = {{"flow_from", r.flow_from[t]}, {"flow_to", r.flow_to[t]}, {"mu", r.mu[t]}};
  return j;
}

void write_json(const std::string& path, const nlohmann::json& j) {
  if (path.empty()) {
    std::cout << j.dump(2) << '\n';
    return;
  }
  std::ofstream out(path);
  if (!out) throw flex::ConfigError("cannot write '" + path + "'");
  out << j.dump(2) << '\n';
}

flex::RunResult decentralized(const flex::Network& net, const Options& o) {
  const auto t0 = std::chrono::steady_clock::now();
  auto res = flex::run(net, o.mech, [](const flex::TraceRecord& r) {
    if (r.k % 100 == 0)
      spdlog::debug("round {}: dx {:.3e}, consensus {:.3e}, slackness {:.3e}", r.k, r.dx_inf, r.consensus, r.slackness);
  });
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  spdlog::info("mechanism {} after {} rounds in {:.2f} s", res.converged ? "converged" : "stopped",
               res.trace.empty() ? 0 : res.trace.back().k, secs);
  if (!o.trace_path.empty()) {
    std::ofstream out(o.trace_path, std::ios::binary);
    if (!out) throw flex::ConfigError("cannot write '" + o.trace_path + "'");
    flex::write_trace_csv(out, net, res.trace);
  }
  return res;
}

int cmd_run(const Options& o) {
  o.mech.check();
  const auto net = flex::apply_scenario(flex::cases::load(o.case_source), modifiers(o));
  for (const auto& w : net.warnings()) spdlog::warn("{}", w);
  if (auto v = flex::validate(net); !v.empty()) throw flex::ValidationError(v);

  if (o.mode == "centralized") {
    const auto c = flex::solve_centralized(net, o.mech.solver);
    nlohmann::json j{{"objective", c.objective}};
    for (std::size_t t = 0; t < net.ties().size(); ++t)
      j["ties"][net.ties()[t].id] = {{"flow", c.flow[t]}, {"eta_bar", c.eta_bar[t]}, {"kappa_bar", c.kappa_bar[t]}};
    for (std::size_t a = 0; a < net.areas().size(); ++a) j["areas"][net.areas()[a].id]["gamma"] = c.duals[a].gamma;
    write_json(o.report_path, j);
    return kOk;
  }

  const auto res = decentralized(net, o);
  const int rounds = res.trace.empty() ? 0 : res.trace.back().k;
  if (o.mode == "decentralized") {
    nlohmann::json j{{"converged", res.converged}, {"rounds", rounds}};
    if (!res.trace.empty()) {
      j["ties"] = tie_summary(net, res.trace.back());
      j["consensus"] = res.trace.back().consensus;
      j["slackness"] = res.trace.back().slackness;
    }
    j["areas"] = area_summary(net, res.state.last);
    write_json(o.report_path, j);
    return res.converged ? kOk : kFailed;
  }

  const auto c = flex::solve_centralized(net, o.mech.solver);
  const flex::ChanceConstrainedClearing clearing(net, o.mech.solver);
  const auto gap = flex::efficiency_gap(net, res.state, c);
  const auto kkt = flex::verify_kkt_equivalence(res.state, net, c);
  const auto feas = flex::check_limit_feasibility(res.state, net);
  const auto nash = flex::verify_nash(net, res.state, clearing, 1e-4);
  auto j = flex::comparison_report(net, gap, kkt, feas, nash);
  j["converged"] = res.converged;
  j["rounds"] = rounds;
  j["areas"] = area_summary(net, res.state.last);
  write_json(o.report_path, j);

  const bool ok = res.converged && std::abs(gap.objective_gap) <= 1e-3 && gap.flow_deviation <= 1e-2 && kkt.passed &&
                  feas.passed && nash.passed;
  if (!ok) spdlog::error("comparison checks failed");
  return ok ? kOk : kFailed;
}

void cmd_scenarios() {
  std::cout << "--capacity-scale <factor>    scale every generator's p_max (scenario key generator_capacity_scale)\n"
               "--ramp-scale <factor>        scale every generator's ramp limits (scenario key ramp_scale)\n"
               "--tie-override <id>=<mw>     replace one tie-line capacity (scenario key tie_capacity.<id>)\n";
}

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("flexmarket");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::warn);
  if (const char* lvl = std::getenv("FLEX_LOG_LEVEL")) {
    const std::string s(lvl);
    if (s == "error") spdlog::set_level(spdlog::level::err);
    else if (s == "info") spdlog::set_level(spdlog::level::info);
    else if (s == "debug") spdlog::set_level(spdlog::level::debug);
    else spdlog::warn("FLEX_LOG_LEVEL '{}' not recognized; expected error, info or debug", s);
  }
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"Decentralized intraday flexibility market coupling"};
  app.require_subcommand(1);
  Options o;
  // Faster-decaying step than the library's harmonic default; see README.
  o.mech.schedule = {1.0, 0.0, 0.6};

  auto* run = app.add_subcommand("run", "Run the mechanism, the centralized benchmark, or both");
  run->add_option("--case", o.case_source, "Bundled case (toy2, toy2-congested, tri3) or path to a case file")
      ->required();
  run->add_option("--mode", o.mode, "decentralized, centralized or compare")
      ->check(CLI::IsMember({"decentralized", "centralized", "compare"}));
  run->add_option("--scenario", o.scenario, "Scenario modifier key=value (repeatable)");
  run->add_option("--capacity-scale", o.capacity_scale, "Generator capacity scale");
  run->add_option("--ramp-scale", o.ramp_scale, "Ramp limit scale");
  run->add_option("--tie-override", o.tie_override, "Tie-line capacity override id=MW (repeatable)");
  run->add_option("--trace", o.trace_path, "Write the per-round trace CSV here");
  run->add_option("--report", o.report_path, "Write the summary or comparison JSON here (default stdout)");
  run->add_option("--max-rounds", o.mech.max_rounds, "Round limit")->capture_default_str();
  run->add_option("--rho0", o.mech.schedule.rho0, "Step schedule numerator")->capture_default_str();
  run->add_option("--k0", o.mech.schedule.k0, "Step schedule offset")->capture_default_str();
  run->add_option("--rho-exponent", o.mech.schedule.p, "Step schedule exponent in (0.5, 1]")->capture_default_str();
  run->add_option("--beta", o.mech.beta, "Capacity price step in (0, 1)")->capture_default_str();
  run->add_option("--tolerance", o.mech.tolerance, "Stop when the broadcast moves less than this")->capture_default_str();
  run->add_option("--patience", o.mech.patience, "Consecutive calm rounds required")->capture_default_str();
  run->add_flag("--warm-start", o.mech.warm_start, "One zero-terms clear before the first round");
  bool serial = false;
  run->add_flag("--serial", serial, "Clear areas one after another instead of concurrently");

  auto* scen = app.add_subcommand("scenarios", "List the scenario modifier flags");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail(kConfig, "usage", e.what());
  }
  o.mech.parallel = !serial;

  if (scen->parsed()) {
    cmd_scenarios();
    return kOk;
  }
  try {
    return cmd_run(o);
  } catch (const flex::ValidationError& e) {
    return fail(kConfig, "validation", e.what(), e.violations());
  } catch (const flex::ParseError& e) {
    return fail(kConfig, "parse", e.what());
  } catch (const flex::ConfigError& e) {
    return fail(kConfig, "config", e.what());
  } catch (const flex::SolveError& e) {
    nlohmann::json j{{"error", "solve"}, {"message", e.what()}, {"area", e.area()}, {"round", e.round()},
                     {"status", e.status()}};
    const int code = e.infeasible() ? kInfeasible : kFailed;
    j["exit_code"] = code;
    std::cerr << j.dump() << '\n';
    return code;
  } catch (const std::exception& e) {
    return fail(kFailed, "internal", e.what());
  }
}
