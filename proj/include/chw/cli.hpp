#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "chw/config.hpp"

namespace chw {

// Exit codes of the command-line front end.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;  // numeric or validation failure
inline constexpr int kExitUsage = 2;    // bad flags, bad or incomplete config

// Runs one command and writes its outputs plus manifest.json under cfg.out.
// Returns the exit code; validation failures still write their report.
int run_command(const RunConfig& cfg, std::ostream& log);

// Parses argv ("chwalk <command> --config PATH [--seed --out --mode --threads]").
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace chw
