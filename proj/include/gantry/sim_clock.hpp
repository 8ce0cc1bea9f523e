#pragma once

#include <chrono>
#include <cstdint>
#include <string>

namespace gantry {

/// Sizes throughout the model are whole mebibytes.
using MiB = std::int64_t;

/// Simulated time, relative to the clock's epoch.
using Millis = std::chrono::milliseconds;

constexpr Millis seconds_to_millis(double s) {
  return Millis{static_cast<std::int64_t>(s * 1000.0 + (s >= 0 ? 0.5 : -0.5))};
}

constexpr double millis_to_seconds(Millis m) {
  return static_cast<double>(m.count()) / 1000.0;
}

/// Monotonic simulated clock. Wall-clock time is never consulted.
class SimClock {
 public:
  /// Tue Nov 17 17:19:00 2015 UTC
  static constexpr std::int64_t kDefaultEpoch = 1447780740;

  explicit SimClock(std::int64_t epoch_unix = kDefaultEpoch)
      : epoch_unix_(epoch_unix) {}

  Millis now() const { return now_; }
  std::int64_t epoch_unix() const { return epoch_unix_; }

  /// Throws kNegativeDt when `t` lies in the past.
  void advance_to(Millis t);

  /// "Wed Nov 18 16:35:12 2015"
  std::string log_time(Millis t) const;
  /// "2015-11-18 16:35:27"
  std::string iso_time(Millis t) const;

 private:
  std::int64_t epoch_unix_;
  Millis now_{0};
};

}  // namespace gantry
