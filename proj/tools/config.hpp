// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "delaytk/graph.hpp"
#include "delaytk/system.hpp"

namespace delaytk::app {

struct SweepConfig {
  double tau_start = 0.001;
  double delta_tau = 0.001;
  double tau_max = 5.0;
  double bisection_tol = 1e-4;
  double oracle_scan = 0.05;  // coarse step before bisecting the first crossing
};

struct SimConfig {
  double t_f = 6.0;
  std::optional<double> h;  // default tau / 50
  std::vector<double> x0, v0;  // default x0 = (1..n)/n centered, v0 = 0
};

struct OracleOverrides {
  std::optional<double> re_min, re_max, im_max, grid_step;
  bool any() const { return re_min || re_max || im_max || grid_step; }
};

// Generic retarded system, only used by the oracle command.
struct SystemOverride {
  Eigen::MatrixXd T, Td;
};

struct RunConfig {
  std::string graph;  // edge-list path or generator: cycle:N, path:N, random:N[:p]
  double gamma = 1.0;
  std::optional<double> tau;
  SweepConfig sweep;
  SimConfig sim;
  OracleOverrides oracle;
  std::optional<SystemOverride> system;
  std::vector<std::string> compare_graphs{"cycle:5", "path:4", "random:6:0.5"};
  double compare_tau = 0.26;
  std::uint64_t seed = 42;
  std::string format;  // json or csv; empty means the command's default
  std::string out_dir;
};

// Values given on the command line; each one wins over the config file.
struct FlagOverrides {
  std::optional<std::string> graph;
  std::optional<double> gamma, tau;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> format, out_dir;
};

// Throws Error(ParseError / InvalidArgument). Relative graph paths resolve
// against the config file's directory.
RunConfig load_config(const std::string& path);
RunConfig config_from_json(const nlohmann::json& j, const std::string& base_dir = {});
void apply_flags(RunConfig& cfg, const FlagOverrides& flags);

enum class Command { analyze, margin, simulate, oracle, compare };
Command parse_command(const std::string& name);
const char* command_name(Command c);

// Checks everything the command will touch; throws InvalidArgument.
void validate(const RunConfig& cfg, Command cmd);

Graph resolve_graph(const std::string& spec, std::uint64_t seed);

nlohmann::json to_json(const RunConfig& cfg);

}  // namespace delaytk::app
