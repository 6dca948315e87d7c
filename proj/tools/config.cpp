// SPDX-License-Identifier: Apache-2.0
#include "config.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "delaytk/error.hpp"

namespace delaytk::app {

using nlohmann::json;

namespace {

[[noreturn]] void invalid(const std::string& msg) { throw Error(ErrorCode::InvalidArgument, msg); }

void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) invalid(where + " must be an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, _] : j.items())
    if (!ok.contains(key)) invalid("unknown key '" + key + "' in " + where);
}

double number(const json& j, const std::string& name) {
  if (!j.is_number()) invalid(name + " must be a number");
  return j.get<double>();
}

std::vector<double> vector_of(const json& j, const std::string& name) {
  if (!j.is_array()) invalid(name + " must be an array of numbers");
  std::vector<double> out;
  for (const auto& v : j) out.push_back(number(v, name));
  return out;
}

Eigen::MatrixXd matrix_of(const json& j, const std::string& name) {
  if (!j.is_array() || j.empty()) invalid(name + " must be a non-empty array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  Eigen::Index cols = -1;
  Eigen::MatrixXd m;
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto row = vector_of(j[r], name);
    if (cols < 0) {
      cols = static_cast<Eigen::Index>(row.size());
      m.resize(rows, cols);
    } else if (static_cast<Eigen::Index>(row.size()) != cols) {
      invalid(name + " has ragged rows");
    }
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row[c];
  }
  return m;
}

json matrix_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

bool is_generator(const std::string& spec) {
  return spec.starts_with("cycle:") || spec.starts_with("path:") || spec.starts_with("random:");
}

std::string resolve_path(const std::string& spec, const std::string& base_dir) {
  if (spec.empty() || is_generator(spec) || base_dir.empty()) return spec;
  const std::filesystem::path p(spec);
  return p.is_absolute() ? spec : (std::filesystem::path(base_dir) / p).lexically_normal().string();
}

template <class T>
T parse_number(const std::string& s, const std::string& spec) {
  T v{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) invalid("bad number '" + s + "' in graph spec " + spec);
  return v;
}

bool finite_positive(double x) { return std::isfinite(x) && x > 0.0; }

}  // namespace

RunConfig config_from_json(const json& j, const std::string& base_dir) {
  check_keys(j, "config", {"graph", "gamma", "tau", "sweep", "sim", "oracle", "system", "compare", "seed", "format"});
  RunConfig cfg;
  if (j.contains("graph")) {
    if (!j["graph"].is_string()) invalid("graph must be a string");
    cfg.graph = resolve_path(j["graph"].get<std::string>(), base_dir);
  }
  if (j.contains("gamma")) cfg.gamma = number(j["gamma"], "gamma");
  if (j.contains("tau")) cfg.tau = number(j["tau"], "tau");
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned()) invalid("seed must be a non-negative integer");
    cfg.seed = j["seed"].get<std::uint64_t>();
  }
  if (j.contains("format")) {
    if (!j["format"].is_string()) invalid("format must be a string");
    cfg.format = j["format"].get<std::string>();
  }
  if (j.contains("sweep")) {
    const auto& s = j["sweep"];
    check_keys(s, "sweep", {"tau_start", "delta_tau", "tau_max", "bisection_tol", "oracle_scan"});
    if (s.contains("tau_start")) cfg.sweep.tau_start = number(s["tau_start"], "sweep.tau_start");
    if (s.contains("delta_tau")) cfg.sweep.delta_tau = number(s["delta_tau"], "sweep.delta_tau");
    if (s.contains("tau_max")) cfg.sweep.tau_max = number(s["tau_max"], "sweep.tau_max");
    if (s.contains("bisection_tol")) cfg.sweep.bisection_tol = number(s["bisection_tol"], "sweep.bisection_tol");
    if (s.contains("oracle_scan")) cfg.sweep.oracle_scan = number(s["oracle_scan"], "sweep.oracle_scan");
  }
  if (j.contains("sim")) {
    const auto& s = j["sim"];
    check_keys(s, "sim", {"t_f", "h", "x0", "v0"});
    if (s.contains("t_f")) cfg.sim.t_f = number(s["t_f"], "sim.t_f");
    if (s.contains("h")) cfg.sim.h = number(s["h"], "sim.h");
    if (s.contains("x0")) cfg.sim.x0 = vector_of(s["x0"], "sim.x0");
    if (s.contains("v0")) cfg.sim.v0 = vector_of(s["v0"], "sim.v0");
  }
  if (j.contains("oracle")) {
    const auto& o = j["oracle"];
    check_keys(o, "oracle", {"re_min", "re_max", "im_max", "grid_step"});
    if (o.contains("re_min")) cfg.oracle.re_min = number(o["re_min"], "oracle.re_min");
    if (o.contains("re_max")) cfg.oracle.re_max = number(o["re_max"], "oracle.re_max");
    if (o.contains("im_max")) cfg.oracle.im_max = number(o["im_max"], "oracle.im_max");
    if (o.contains("grid_step")) cfg.oracle.grid_step = number(o["grid_step"], "oracle.grid_step");
  }
  if (j.contains("system")) {
    const auto& s = j["system"];
    check_keys(s, "system", {"T", "Td"});
    if (!s.contains("T") || !s.contains("Td")) invalid("system needs both T and Td");
    cfg.system = SystemOverride{matrix_of(s["T"], "system.T"), matrix_of(s["Td"], "system.Td")};
  }
  if (j.contains("compare")) {
    const auto& c = j["compare"];
    check_keys(c, "compare", {"graphs", "tau"});
    if (c.contains("graphs")) {
      if (!c["graphs"].is_array() || c["graphs"].empty()) invalid("compare.graphs must be a non-empty array");
      cfg.compare_graphs.clear();
      for (const auto& g : c["graphs"]) {
        if (!g.is_string()) invalid("compare.graphs entries must be strings");
        cfg.compare_graphs.push_back(resolve_path(g.get<std::string>(), base_dir));
      }
    }
    if (c.contains("tau")) cfg.compare_tau = number(c["tau"], "compare.tau");
  }
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) invalid("cannot open config " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::ParseError, path + ": " + e.what());
  }
  return config_from_json(j, std::filesystem::path(path).parent_path().string());
}

void apply_flags(RunConfig& cfg, const FlagOverrides& flags) {
  if (flags.graph) cfg.graph = *flags.graph;
  if (flags.gamma) cfg.gamma = *flags.gamma;
  if (flags.tau) cfg.tau = *flags.tau;
  if (flags.seed) cfg.seed = *flags.seed;
  if (flags.format) cfg.format = *flags.format;
  if (flags.out_dir) cfg.out_dir = *flags.out_dir;
}

Command parse_command(const std::string& name) {
  if (name == "analyze") return Command::analyze;
  if (name == "margin") return Command::margin;
  if (name == "simulate") return Command::simulate;
  if (name == "oracle") return Command::oracle;
  if (name == "compare") return Command::compare;
  invalid("unknown command " + name);
}

const char* command_name(Command c) {
  switch (c) {
    case Command::analyze: return "analyze";
    case Command::margin: return "margin";
    case Command::simulate: return "simulate";
    case Command::oracle: return "oracle";
    case Command::compare: return "compare";
  }
  return "?";
}

Graph resolve_graph(const std::string& spec, std::uint64_t seed) {
  if (spec.empty()) invalid("no graph given (--graph or config 'graph')");
  if (!is_generator(spec)) return load_edge_list(spec);
  std::vector<std::string> parts;
  std::stringstream ss(spec);
  for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
  if (parts.size() < 2) invalid("bad graph spec " + spec);
  const int n = parse_number<int>(parts[1], spec);
  if (parts[0] == "cycle" && parts.size() == 2) return Graph::cycle(n);
  if (parts[0] == "path" && parts.size() == 2) return Graph::path(n);
  if (parts[0] == "random" && parts.size() <= 3) {
    const double p = parts.size() == 3 ? parse_number<double>(parts[2], spec) : 0.5;
    return Graph::random(n, p, seed);
  }
  invalid("bad graph spec " + spec);
}

void validate(const RunConfig& cfg, Command cmd) {
  if (!cfg.format.empty() && cfg.format != "json" && cfg.format != "csv")
    invalid("format must be json or csv");
  if (!std::isfinite(cfg.gamma) || cfg.gamma == 0.0) throw Error(ErrorCode::ZeroGamma, "gamma must be finite and nonzero");
  const bool needs_tau = cmd == Command::analyze || cmd == Command::simulate || cmd == Command::oracle;
  if (needs_tau && !cfg.tau) invalid(std::string(command_name(cmd)) + " needs --tau");
  if (cfg.tau && !finite_positive(*cfg.tau)) invalid("tau must be positive and finite");

  if (cfg.system) {
    if (cmd != Command::oracle) invalid("a generic system is only supported by the oracle command");
    const auto& s = *cfg.system;
    if (s.T.rows() != s.T.cols() || s.Td.rows() != s.Td.cols() || s.T.rows() != s.Td.rows())
      invalid("system.T and system.Td must be square and of equal size");
    if (!s.T.allFinite() || !s.Td.allFinite()) invalid("system matrices must be finite");
  } else if (cmd != Command::compare) {
    (void)resolve_graph(cfg.graph, cfg.seed);
  }

  if (cmd == Command::margin || cmd == Command::compare) {
    const auto& s = cfg.sweep;
    if (!finite_positive(s.tau_start) || !finite_positive(s.delta_tau) || !finite_positive(s.bisection_tol) ||
        !finite_positive(s.oracle_scan))
      invalid("sweep.tau_start, delta_tau, bisection_tol and oracle_scan must be positive");
    if (!(std::isfinite(s.tau_max) && s.tau_max > s.tau_start)) invalid("sweep.tau_max must exceed sweep.tau_start");
  }
  if (cmd == Command::simulate || cmd == Command::compare) {
    if (!finite_positive(cfg.sim.t_f)) invalid("sim.t_f must be positive");
    if (cfg.sim.h && !finite_positive(*cfg.sim.h)) invalid("sim.h must be positive");
    for (double x : cfg.sim.x0)
      if (!std::isfinite(x)) invalid("sim.x0 must be finite");
    for (double v : cfg.sim.v0)
      if (!std::isfinite(v)) invalid("sim.v0 must be finite");
  }
  if (cmd == Command::simulate) {
    const int n = resolve_graph(cfg.graph, cfg.seed).size();
    if (!cfg.sim.x0.empty() && static_cast<int>(cfg.sim.x0.size()) != n) invalid("sim.x0 length must equal n");
    if (!cfg.sim.v0.empty() && static_cast<int>(cfg.sim.v0.size()) != n) invalid("sim.v0 length must equal n");
    const double h = cfg.sim.h.value_or(*cfg.tau / 50.0);
    if (h > *cfg.tau / 20.0 * (1.0 + 1e-12)) throw Error(ErrorCode::StepTooLarge, "sim.h must be at most tau / 20");
  }
  if (cmd == Command::compare) {
    if (!finite_positive(cfg.compare_tau)) invalid("compare.tau must be positive");
    if (cfg.sim.h && *cfg.sim.h > cfg.compare_tau / 20.0 * (1.0 + 1e-12))
      throw Error(ErrorCode::StepTooLarge, "sim.h must be at most compare.tau / 20");
    for (const auto& g : cfg.compare_graphs) {
      const int n = resolve_graph(g, cfg.seed).size();
      if (!cfg.sim.x0.empty() && static_cast<int>(cfg.sim.x0.size()) != n) invalid("sim.x0 length must equal n for " + g);
      if (!cfg.sim.v0.empty() && static_cast<int>(cfg.sim.v0.size()) != n) invalid("sim.v0 length must equal n for " + g);
    }
  }
  if (cmd == Command::oracle) {
    const auto& o = cfg.oracle;
    for (auto v : {o.re_min, o.re_max, o.im_max, o.grid_step})
      if (v && !std::isfinite(*v)) invalid("oracle overrides must be finite");
    if (o.grid_step && *o.grid_step <= 0.0) invalid("oracle.grid_step must be positive");
  }
}

json to_json(const RunConfig& cfg) {
  json j;
  j["graph"] = cfg.graph;
  j["gamma"] = cfg.gamma;
  j["tau"] = cfg.tau ? json(*cfg.tau) : json(nullptr);
  j["seed"] = cfg.seed;
  j["sweep"] = {{"tau_start", cfg.sweep.tau_start},
                {"delta_tau", cfg.sweep.delta_tau},
                {"tau_max", cfg.sweep.tau_max},
                {"bisection_tol", cfg.sweep.bisection_tol},
                {"oracle_scan", cfg.sweep.oracle_scan}};
  j["sim"] = {{"t_f", cfg.sim.t_f},
              {"h", cfg.sim.h ? json(*cfg.sim.h) : json(nullptr)},
              {"x0", cfg.sim.x0},
              {"v0", cfg.sim.v0}};
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  j["oracle"] = {{"re_min", opt(cfg.oracle.re_min)},
                 {"re_max", opt(cfg.oracle.re_max)},
                 {"im_max", opt(cfg.oracle.im_max)},
                 {"grid_step", opt(cfg.oracle.grid_step)}};
  if (cfg.system) j["system"] = {{"T", matrix_json(cfg.system->T)}, {"Td", matrix_json(cfg.system->Td)}};
  j["compare"] = {{"graphs", cfg.compare_graphs}, {"tau", cfg.compare_tau}};
  return j;
}

}  // namespace delaytk::app
