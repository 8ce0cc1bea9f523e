#include "gantry/scenario.hpp"

#include <cmath>
#include <istream>
#include <sstream>

#include "gantry/error.hpp"

namespace gantry {

using nlohmann::json;

std::vector<std::string> split_command_line(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  bool in_word = false;
  char quote = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quote != 0) {
      if (c == quote) {
        quote = 0;
      } else if (c == '\\' && quote == '"' && i + 1 < text.size() && (text[i + 1] == '"' || text[i + 1] == '\\')) {
        cur += text[++i];
      } else {
        cur += c;
      }
    } else if (c == '\'' || c == '"') {
      quote = c;
      in_word = true;
    } else if (c == '\\' && i + 1 < text.size()) {
      cur += text[++i];
      in_word = true;
    } else if (c == ' ' || c == '\t') {
      if (in_word) out.push_back(cur);
      cur.clear();
      in_word = false;
    } else {
      cur += c;
      in_word = true;
    }
  }
  if (quote != 0) throw Error(ErrorCode::kParseError, "unterminated quote");
  if (in_word) out.push_back(cur);
  return out;
}

std::vector<ScenarioStep> parse_scenario(std::istream& in) {
  std::vector<ScenarioStep> steps;
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto start = raw.find_first_not_of(" \t\r");
    if (start == std::string::npos || raw[start] == '#') continue;
    std::string text = raw.substr(start);
    while (!text.empty() && (text.back() == '\r' || text.back() == ' ')) text.pop_back();
    auto fail = [&](const std::string& why) {
      return Error(ErrorCode::kParseError, "scenario line " + std::to_string(line) + ": " + why);
    };
    if (text[0] != '@') throw fail("expected '@<seconds> <command>'");
    const auto space = text.find_first_of(" \t");
    if (space == std::string::npos) throw fail("missing command");
    ScenarioStep step;
    step.line = line;
    try {
      std::size_t used = 0;
      step.at = std::stod(text.substr(1, space - 1), &used);
      if (used != space - 1 || step.at < 0 || !std::isfinite(step.at)) throw std::invalid_argument("time");
    } catch (const std::exception&) {
      throw fail("bad time '" + text.substr(1, space - 1) + "'");
    }
    std::string command = text.substr(text.find_first_not_of(" \t", space));
    if (command[0] == '!') {
      step.expect_failure = true;
      command.erase(0, 1);
    }
    try {
      step.argv = split_command_line(command);
    } catch (const Error& e) {
      throw fail(e.what());
    }
    if (step.argv.empty()) throw fail("missing command");
    if (step.argv[0] == "sim") step.argv[0] = "gnt-sim";
    if (step.argv[0].rfind("gnt-", 0) != 0) throw fail("unknown command '" + step.argv[0] + "'");
    step.text = command;
    steps.push_back(std::move(step));
  }
  return steps;
}

namespace {

std::int64_t now_ms(ApiClient& client) {
  ApiResponse r = client.get("/2/info");
  if (!r.ok()) throw Error(ErrorCode::kDaemonUnreachable, "cannot read the simulated clock");
  return r.body.at("now_ms").get<std::int64_t>();
}

void advance_to(ApiClient& client, std::int64_t target_ms) {
  const std::int64_t now = now_ms(client);
  if (target_ms <= now) return;
  ApiResponse r = client.post("/2/sim/advance-clock", {{"seconds", static_cast<double>(target_ms - now) / 1000.0}});
  if (!r.ok()) throw Error(ErrorCode::kInvalidParams, r.body.value("error", std::string("advance failed")));
  const std::string path = "/2/jobs/" + std::to_string(r.body.at("job_id").get<std::int64_t>()) + "/wait";
  for (;;) {
    ApiResponse w = client.get(path, {{"timeout", std::to_string(ApiRouter::kMaxWaitMs)}});
    if (!w.ok()) throw Error(ErrorCode::kUnknownJob, "lost the clock job");
    const std::string status = w.body.at("status").get<std::string>();
    if (status == "success") return;
    if (status == "error") throw Error(ErrorCode::kNegativeDt, w.body.at("error").get<std::string>());
  }
}

}  // namespace

ScenarioResult run_scenario(const std::vector<ScenarioStep>& steps, ApiClient& client, CliOptions opts) {
  ScenarioResult result;
  opts.echo_answer = true;
  const std::int64_t origin = now_ms(client);
  for (const ScenarioStep& step : steps) {
    advance_to(client, origin + std::llround(step.at * 1000.0));
    std::istringstream in("y\n");
    std::ostringstream out;
    std::ostringstream err;
    const int rc = run_cli(step.argv, client, in, out, err, opts);
    result.exit_codes.push_back(rc);
    result.transcript += "$ " + step.text + "\n" + out.str() + err.str();
    if ((rc != 0) != step.expect_failure) {
      ++result.failures;
      result.transcript += "!! line " + std::to_string(step.line) + ": exit " + std::to_string(rc) + "\n";
    }
  }
  return result;
}

}  // namespace gantry
