#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "gantry/sim_clock.hpp"

namespace gantry {

enum class LogLevel { kInfo, kWarning, kStep };

std::string_view to_string(LogLevel level);
LogLevel parse_log_level(std::string_view text);

struct LogLine {
  Millis at{0};
  LogLevel level = LogLevel::kStep;
  std::string text;

  bool operator==(const LogLine&) const = default;
};

/// "Wed Nov 18 16:35:12 2015 - INFO: text" / "... * step text".
std::string render_log_line(const SimClock& clock, const LogLine& line);

/// Timestamped log of one job. Lines are stamped with the simulated clock at
/// the moment they are appended and forwarded to the sink, if any.
class JobLog {
 public:
  using Sink = std::function<void(const LogLine&)>;

  explicit JobLog(const SimClock& clock, Sink sink = {})
      : clock_(&clock), sink_(std::move(sink)) {}

  void info(std::string text) { append(LogLevel::kInfo, std::move(text)); }
  void warning(std::string text) { append(LogLevel::kWarning, std::move(text)); }
  void step(std::string text) { append(LogLevel::kStep, std::move(text)); }
  void append(LogLevel level, std::string text);

  const std::vector<LogLine>& lines() const { return lines_; }
  const SimClock& clock() const { return *clock_; }

 private:
  const SimClock* clock_;
  Sink sink_;
  std::vector<LogLine> lines_;
};

}  // namespace gantry
