#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>

#include "hmdsim/error.hpp"
#include "hmdsim/mem_model.hpp"
#include "hmdsim/units.hpp"

namespace hmdsim {

enum class Closeness : std::uint8_t {
  Relative,  // |F_i - F_{i-1}| < delta1 * F_{i-1}
  Absolute,  // |F_i - F_{i-1}| < delta1
};

struct TelemetryConfig {
  SimTime marking_interval = SimTime::from_seconds(1.0);
  double delta1 = 0.2;
  Closeness closeness = Closeness::Relative;
  // Unset means two marking intervals (one missed epoch tolerated).
  std::optional<SimTime> delta2;
  double ewma_alpha = 0.5;

  SimTime effective_delta2() const { return delta2.value_or(marking_interval * 2); }

  void validate() const {
    if (marking_interval.ps() <= 0) throw InvalidArgument("telemetry: marking_interval must be positive");
    if (effective_delta2() < marking_interval) {
      throw InvalidArgument("telemetry: delta2 must be at least the marking interval");
    }
    if (!(delta1 >= 0.0)) throw InvalidArgument("telemetry: delta1 must be non-negative");
    if (!(ewma_alpha > 0.0 && ewma_alpha <= 1.0)) {
      throw InvalidArgument("telemetry: ewma_alpha must be in (0, 1]");
    }
  }
};

struct FaultReport {
  PageId page = 0;
  double rate = 0.0;  // F_i, accesses/second
  std::uint32_t burst_duration = 0;
  double ewma_rate = 0.0;
};

inline double point_rate(double mark_s, double access_s) {
  if (!(access_s > mark_s)) {
    throw TelemetryError("point_rate: access time must follow marking time");
  }
  return 1.0 / (access_s - mark_s);
}

inline double point_rate(SimTime mark, SimTime access) {
  if (access <= mark) throw TelemetryError("point_rate: access time must follow marking time");
  return 1.0 / (access - mark).seconds();
}

inline ClusterState coalesce_step(const ClusterState& cluster, double rate, SimTime mark,
                                  const TelemetryConfig& cfg) {
  ClusterState next;
  bool joins = false;
  if (cluster.cluster_size > 0) {
    double tolerance =
        cfg.closeness == Closeness::Relative ? cfg.delta1 * cluster.prev_rate : cfg.delta1;
    joins = std::abs(rate - cluster.prev_rate) < tolerance &&
            mark - cluster.prev_mark <= cfg.effective_delta2();
  }
  next.cluster_size = joins ? cluster.cluster_size + 1 : 1;
  next.prev_rate = rate;
  next.prev_mark = mark;
  return next;
}

inline double ewma_update(double prev, double rate, double alpha) {
  return alpha * rate + (1.0 - alpha) * prev;
}

// Poisons every page that is not already poisoned. A page marked in an
// earlier interval and not touched since keeps its original M_i.
inline std::size_t mark_pages(MemoryState& mem, SimTime now) {
  std::size_t n = 0;
  for (auto& p : mem.pages()) {
    if (p.marked) continue;
    p.marked = true;
    p.mark_time = now;
    ++n;
  }
  return n;
}

inline FaultReport on_hint_fault(MemoryState& mem, PageId id, SimTime now,
                                 const TelemetryConfig& cfg) {
  auto& p = mem.page(id);
  if (!p.marked) {
    throw TelemetryError("hint fault on unmarked page " + std::to_string(id));
  }
  double rate = point_rate(p.mark_time, now);
  p.access_time = now;
  p.marked = false;
  p.rate = rate;
  p.burst = coalesce_step(p.burst, rate, p.mark_time, cfg);
  p.ewma_rate = p.ewma_valid ? ewma_update(p.ewma_rate, rate, cfg.ewma_alpha) : rate;
  p.ewma_valid = true;
  return FaultReport{id, rate, p.burst.cluster_size, p.ewma_rate};
}

}  // namespace hmdsim
