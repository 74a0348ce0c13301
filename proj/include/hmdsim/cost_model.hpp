#pragma once

#include "hmdsim/error.hpp"
#include "hmdsim/units.hpp"

namespace hmdsim {

struct CostParams {
  Bytes page_size = 4096;
  double delta_latency_ns = 800.0;
  double bookkeeping_ns = 1000.0;  // per swap
  double lookahead_s = 1.0;

  // Bookkeeping constant expressed in accesses.
  double k() const { return bookkeeping_ns / delta_latency_ns; }
};

// page_size / (bandwidth * delta_latency), in accesses.
inline double transfer_threshold(Bytes page_size, double bandwidth, double delta_latency_ns) {
  if (!(bandwidth > 0.0)) throw InvalidArgument("transfer_threshold: bandwidth must be positive");
  if (!(delta_latency_ns > 0.0)) throw InvalidArgument("transfer_threshold: delta latency must be positive");
  return static_cast<double>(page_size) / (bandwidth * delta_latency_ns * 1e-9);
}

inline double net_benefit(double accesses_p, double accesses_d, const CostParams& params,
                          double bandwidth) {
  return (accesses_p - accesses_d) -
         transfer_threshold(params.page_size, bandwidth, params.delta_latency_ns) - params.k();
}

inline bool should_swap(double accesses_p, double accesses_d, const CostParams& params,
                        double bandwidth) {
  return net_benefit(accesses_p, accesses_d, params, bandwidth) > 0.0;
}

}  // namespace hmdsim
