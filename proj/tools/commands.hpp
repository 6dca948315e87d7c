// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "config.hpp"
#include "delaytk/error.hpp"

namespace delaytk::app {

enum ExitCode : int {
  exit_stable = 0,
  exit_unstable = 1,
  exit_nonconvergence = 2,
  exit_invalid = 3,
  exit_divergence = 4,
  exit_grid = 5,
};

int exit_code_for(ErrorCode code);

struct CommandResult {
  int exit_code = exit_stable;
  nlohmann::json report;  // deterministic payload
  nlohmann::json timing;  // wall-clock seconds per phase, kept out of the payload
  std::string csv;        // bulk output: trajectory, spectrum or sweep trace
  std::string csv_name;   // file name used under --out
};

CommandResult cmd_analyze(const RunConfig& cfg);
CommandResult cmd_margin(const RunConfig& cfg);
CommandResult cmd_simulate(const RunConfig& cfg);
CommandResult cmd_oracle(const RunConfig& cfg);
CommandResult cmd_compare(const RunConfig& cfg);

// Validates, dispatches and converts library errors to an error report.
CommandResult run(Command cmd, const RunConfig& cfg);

// Text printed to stdout for the chosen format.
std::string render(const CommandResult& r, Command cmd, const RunConfig& cfg);

// Writes report.json, timing.json and the CSV (if any) into cfg.out_dir.
void write_outputs(const CommandResult& r, const RunConfig& cfg);

}  // namespace delaytk::app
