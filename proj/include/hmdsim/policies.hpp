#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <type_traits>
#include <variant>

#include "hmdsim/cost_model.hpp"
#include "hmdsim/mem_model.hpp"
#include "hmdsim/network_link.hpp"
#include "hmdsim/telemetry.hpp"

namespace hmdsim {

namespace policy {

struct NoMigration {};

// TPP / Nimble style: promote on a single hot measurement.
struct StaticThreshold {
  double rate_cutoff = 0.0;  // accesses/second
};

// HeMem (alpha 0.5) / simplified MEMTIS (alpha 0.9) style.
struct EwmaThreshold {
  double alpha = 0.5;
  double rate_cutoff = 0.0;
};

struct NetworkAdaptive {
  // Bytes. Unset means one page.
  std::optional<double> threshold;
};

struct Bandit {
  std::uint32_t theta_burst = 0;
  double theta_rate = 0.0;  // accesses/second
  bool burst_gate = true;
};

// Clairvoyant matching planner; acts at decision boundaries, not on faults.
struct Oracle {};

}  // namespace policy

using PolicyKind = std::variant<policy::NoMigration, policy::StaticThreshold, policy::EwmaThreshold,
                                policy::NetworkAdaptive, policy::Bandit, policy::Oracle>;

inline std::string policy_name(const PolicyKind& kind) {
  return std::visit(
      [](const auto& p) -> std::string {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, policy::NoMigration>) return "none";
        else if constexpr (std::is_same_v<T, policy::StaticThreshold>) return "static";
        else if constexpr (std::is_same_v<T, policy::EwmaThreshold>) return "ewma";
        else if constexpr (std::is_same_v<T, policy::NetworkAdaptive>) return "adaptive";
        else if constexpr (std::is_same_v<T, policy::Bandit>) return "bandit";
        else return "oracle";
      },
      kind);
}

inline bool policy_migrates(const PolicyKind& kind) {
  return !std::holds_alternative<policy::NoMigration>(kind);
}

enum class Action : std::uint8_t { Stay, Promote };

struct Decision {
  Action action = Action::Stay;
  std::optional<PageId> victim;  // set when the local node is full

  bool promote() const { return action == Action::Promote; }
};

struct DecisionInputs {
  const LinkModel& link;
  const MemoryState& mem;
  const CostParams& cost;
  SimTime marking_interval = SimTime::from_seconds(1.0);
};

// ewma_rate of the page demotion would pick next; stale by nature.
inline double est_demote_rate(const MemoryState& mem) {
  if (mem.local_pages() == 0) return 0.0;
  auto c = mem.demotion_candidates(mem.page_size());
  return c.empty() ? 0.0 : mem.page(c.front()).ewma_rate;
}

namespace detail {

inline bool wants_promotion(const policy::NoMigration&, const FaultReport&, const PageRecord&,
                            const DecisionInputs&) {
  return false;
}

inline bool wants_promotion(const policy::StaticThreshold& p, const FaultReport& f,
                            const PageRecord&, const DecisionInputs&) {
  return f.rate > p.rate_cutoff;
}

inline bool wants_promotion(const policy::EwmaThreshold& p, const FaultReport&,
                            const PageRecord& page, const DecisionInputs&) {
  return page.ewma_rate > p.rate_cutoff;
}

// (F_p - F_d) * dT * B * dLatency > threshold, with dT the marking interval.
inline bool wants_promotion(const policy::NetworkAdaptive& p, const FaultReport& f,
                            const PageRecord&, const DecisionInputs& in) {
  double threshold = p.threshold.value_or(static_cast<double>(in.mem.page_size()));
  double gain = (f.rate - est_demote_rate(in.mem)) * in.marking_interval.seconds() *
                in.link.effective_bandwidth() * in.cost.delta_latency_ns * 1e-9;
  return gain > threshold;
}

inline bool wants_promotion(const policy::Bandit& p, const FaultReport& f, const PageRecord&,
                            const DecisionInputs&) {
  bool burst_ok = !p.burst_gate || f.burst_duration >= p.theta_burst;
  return burst_ok && f.rate >= p.theta_rate;
}

inline bool wants_promotion(const policy::Oracle&, const FaultReport&, const PageRecord&,
                            const DecisionInputs&) {
  return false;
}

}  // namespace detail

inline Decision decide(const PolicyKind& kind, const FaultReport& fault, const PageRecord& page,
                       const DecisionInputs& in) {
  if (page.location != Location::Remote) return {};
  bool wants = std::visit(
      [&](const auto& p) { return detail::wants_promotion(p, fault, page, in); }, kind);
  if (!wants) return {};
  if (in.mem.local_has_room()) return {Action::Promote, std::nullopt};
  auto victims = in.mem.demotion_candidates(in.mem.page_size());
  if (victims.empty()) return {};
  return {Action::Promote, victims.front()};
}

}  // namespace hmdsim
