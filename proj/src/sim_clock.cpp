#include "gantry/sim_clock.hpp"

#include <ctime>

#include "gantry/error.hpp"

namespace gantry {
namespace {

std::string format_utc(std::int64_t unix_seconds, const char* pattern) {
  std::time_t t = static_cast<std::time_t>(unix_seconds);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[64];
  std::size_t n = std::strftime(buf, sizeof(buf), pattern, &tm);
  return std::string(buf, n);
}

}  // namespace

void SimClock::advance_to(Millis t) {
  if (t < now_) {
    throw Error(ErrorCode::kNegativeDt, "cannot move the simulated clock backwards");
  }
  now_ = t;
}

std::string SimClock::log_time(Millis t) const {
  return format_utc(epoch_unix_ + t.count() / 1000, "%a %b %d %H:%M:%S %Y");
}

std::string SimClock::iso_time(Millis t) const {
  return format_utc(epoch_unix_ + t.count() / 1000, "%Y-%m-%d %H:%M:%S");
}

}  // namespace gantry
