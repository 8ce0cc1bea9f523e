#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "gantry/api.hpp"
#include "gantry/cli.hpp"

namespace gantry {

/// One line of a scenario script:
///
///   @<seconds> [!]<command> <args...>
///
/// <seconds> is simulated time since the script started; the clock is moved
/// forward to it when behind, never back. "!" marks a command expected to
/// fail. <command> is a gnt-* suite or "sim" (the lab controls). Arguments
/// split like a shell: whitespace, single and double quotes, backslash.
/// Blank lines and lines starting with '#' are ignored.
struct ScenarioStep {
  double at = 0;
  bool expect_failure = false;
  std::vector<std::string> argv;
  std::string text;
  int line = 0;
};

/// Throws kParseError naming the offending line.
std::vector<ScenarioStep> parse_scenario(std::istream& in);
std::vector<std::string> split_command_line(const std::string& text);

struct ScenarioResult {
  /// "$ <command>" then its stdout and stderr, for every step.
  std::string transcript;
  std::vector<int> exit_codes;
  /// Steps whose outcome differs from what the script expects.
  int failures = 0;
};

/// Runs each step through the CLI, answering "y" to every prompt.
ScenarioResult run_scenario(const std::vector<ScenarioStep>& steps, ApiClient& client,
                            CliOptions opts = {});

}  // namespace gantry
