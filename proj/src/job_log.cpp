#include "gantry/job_log.hpp"

#include "gantry/error.hpp"

namespace gantry {

std::string_view to_string(LogLevel level) {
  switch (level) {
    case LogLevel::kInfo:
      return "INFO";
    case LogLevel::kWarning:
      return "WARNING";
    case LogLevel::kStep:
      return "STEP";
  }
  return "STEP";
}

LogLevel parse_log_level(std::string_view text) {
  if (text == "INFO") return LogLevel::kInfo;
  if (text == "WARNING") return LogLevel::kWarning;
  if (text == "STEP") return LogLevel::kStep;
  throw Error(ErrorCode::kParseError, "unknown log level " + std::string(text));
}

std::string render_log_line(const SimClock& clock, const LogLine& line) {
  std::string out = clock.log_time(line.at);
  switch (line.level) {
    case LogLevel::kInfo:
      out += " - INFO: ";
      break;
    case LogLevel::kWarning:
      out += " - WARNING: ";
      break;
    case LogLevel::kStep:
      out += ' ';
      break;
  }
  return out + line.text;
}

void JobLog::append(LogLevel level, std::string text) {
  lines_.push_back({clock_->now(), level, std::move(text)});
  if (sink_) sink_(lines_.back());
}

}  // namespace gantry
