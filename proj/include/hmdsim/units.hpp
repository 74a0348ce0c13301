#pragma once

#include <cmath>
#include <compare>
#include <cstdint>
#include <limits>

namespace hmdsim {

using Bytes = std::uint64_t;
using PageId = std::uint32_t;

inline constexpr PageId kNoPage = std::numeric_limits<PageId>::max();

// Simulated time with picosecond resolution. Integer ticks keep the
// engine's accounting identity exact regardless of summation order.
class SimTime {
 public:
  constexpr SimTime() = default;

  static constexpr SimTime from_ps(std::int64_t ps) { return SimTime(ps); }
  static SimTime from_ns(double ns) { return SimTime(std::llround(ns * 1e3)); }
  static SimTime from_seconds(double s) { return SimTime(std::llround(s * 1e12)); }
  static constexpr SimTime max() {
    return SimTime(std::numeric_limits<std::int64_t>::max());
  }

  constexpr std::int64_t ps() const { return ps_; }
  constexpr double ns() const { return static_cast<double>(ps_) / 1e3; }
  constexpr double seconds() const { return static_cast<double>(ps_) / 1e12; }

  constexpr SimTime& operator+=(SimTime o) {
    ps_ += o.ps_;
    return *this;
  }
  constexpr SimTime& operator-=(SimTime o) {
    ps_ -= o.ps_;
    return *this;
  }
  friend constexpr SimTime operator+(SimTime a, SimTime b) { return SimTime(a.ps_ + b.ps_); }
  friend constexpr SimTime operator-(SimTime a, SimTime b) { return SimTime(a.ps_ - b.ps_); }
  friend constexpr SimTime operator*(SimTime a, std::int64_t k) { return SimTime(a.ps_ * k); }
  friend constexpr auto operator<=>(SimTime, SimTime) = default;

 private:
  constexpr explicit SimTime(std::int64_t ps) : ps_(ps) {}
  std::int64_t ps_ = 0;
};

inline constexpr Bytes kMiB = 1024 * 1024;

}  // namespace hmdsim
