#pragma once

#include <string>

#include "hmdsim/error.hpp"
#include "hmdsim/units.hpp"

namespace hmdsim {

struct LinkConfig {
  double capacity = 12.5e9;  // bytes/second (100 Gb/s)
  double local_latency_ns = 100.0;
  double remote_base_latency_ns = 900.0;
  Bytes cacheline = 64;

  double delta_latency_ns() const { return remote_base_latency_ns - local_latency_ns; }

  void validate() const {
    if (!(capacity > 0.0)) throw InvalidArgument("link: capacity must be positive");
    if (local_latency_ns < 0.0) throw InvalidArgument("link: local latency must be non-negative");
    if (!(remote_base_latency_ns > local_latency_ns)) {
      throw InvalidArgument("link: remote latency must exceed local latency");
    }
  }
};

struct LinkCounters {
  Bytes migration_bytes = 0;
  Bytes remote_access_bytes = 0;

  Bytes total() const { return migration_bytes + remote_access_bytes; }
};

// Shared interconnect with a stationary background load phi. Effective
// bandwidth is capacity * (1 - phi).
class LinkModel {
 public:
  explicit LinkModel(LinkConfig cfg = {}, double phi = 0.0) : cfg_(cfg) {
    cfg_.validate();
    set_background_fraction(phi);
  }

  const LinkConfig& config() const { return cfg_; }
  const LinkCounters& counters() const { return counters_; }
  double background_fraction() const { return phi_; }

  void set_background_fraction(double phi) {
    if (!(phi >= 0.0 && phi < 1.0)) {
      throw InvalidArgument("link: background fraction must be in [0, 1), got " + std::to_string(phi));
    }
    phi_ = phi;
  }

  double effective_bandwidth() const { return cfg_.capacity * (1.0 - phi_); }

  double remote_access_latency_ns() const {
    return cfg_.remote_base_latency_ns +
           static_cast<double>(cfg_.cacheline) / effective_bandwidth() * 1e9;
  }

  // Latency of one remote cacheline access; charges the traffic counter.
  double remote_access_delay() {
    counters_.remote_access_bytes += cfg_.cacheline;
    return remote_access_latency_ns();
  }

  double page_transfer_delay(Bytes page_size) const {
    if (page_size == 0) throw InvalidArgument("page_transfer_delay: page_size must be positive");
    return static_cast<double>(page_size) / effective_bandwidth() * 1e9;
  }

  void charge_migration(Bytes bytes) { counters_.migration_bytes += bytes; }

 private:
  LinkConfig cfg_;
  double phi_ = 0.0;
  LinkCounters counters_;
};

}  // namespace hmdsim
