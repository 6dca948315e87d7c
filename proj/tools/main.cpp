// SPDX-License-Identifier: Apache-2.0
#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "commands.hpp"
#include "config.hpp"

using namespace delaytk;
using namespace delaytk::app;

int main(int argc, char** argv) {
  CLI::App app{"Critical delay analysis for double-integrator consensus with communication delay"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  FlagOverrides flags;
  std::string graph, format, out_dir;
  double gamma = 0.0, tau = 0.0;
  std::uint64_t seed = 0;
  auto* o_graph = app.add_option("--graph", graph, "edge-list file, or cycle:N, path:N, random:N[:p]");
  auto* o_gamma = app.add_option("--gamma", gamma, "velocity coupling weight");
  auto* o_tau = app.add_option("--tau", tau, "delay in seconds");
  app.add_option("--config", config_path, "JSON config; flags override it")->check(CLI::ExistingFile);
  auto* o_out = app.add_option("--out", out_dir, "directory for report.json, timing.json and CSV output");
  auto* o_seed = app.add_option("--seed", seed, "seed for the mixing basis and random graphs (default 42)");
  auto* o_format = app.add_option("--format", format, "stdout format")->check(CLI::IsMember({"json", "csv"}));

  for (const char* name : {"analyze", "margin", "simulate", "oracle", "compare"}) app.add_subcommand(name);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : exit_invalid;
  }
  if (*o_graph) flags.graph = graph;
  if (*o_gamma) flags.gamma = gamma;
  if (*o_tau) flags.tau = tau;
  if (*o_seed) flags.seed = seed;
  if (*o_format) flags.format = format;
  if (*o_out) flags.out_dir = out_dir;

  const Command cmd = parse_command(app.get_subcommands().front()->get_name());
  RunConfig cfg;
  try {
    if (!config_path.empty()) cfg = load_config(config_path);
  } catch (const Error& e) {
    std::cerr << "delaytk: " << e.what() << '\n';
    return exit_invalid;
  }
  apply_flags(cfg, flags);

  try {
    const CommandResult r = run(cmd, cfg);
    std::cout << render(r, cmd, cfg);
    write_outputs(r, cfg);
    if (r.report.contains("error")) std::cerr << "delaytk: " << r.report["error"]["code"].get<std::string>() << ": "
                                              << r.report["error"]["message"].get<std::string>() << '\n';
    if (cfg.out_dir.empty() && !r.timing.is_null()) std::cerr << "timing " << r.timing.dump() << '\n';
    return r.exit_code;
  } catch (const std::exception& e) {
    std::cerr << "delaytk: " << e.what() << '\n';
    return exit_nonconvergence;
  }
}
