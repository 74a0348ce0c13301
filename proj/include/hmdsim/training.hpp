#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "hmdsim/bandit.hpp"
#include "hmdsim/engine.hpp"
#include "hmdsim/error.hpp"

namespace hmdsim {

struct CurriculumOptions {
  std::vector<double> allocations{0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3, 0.2, 0.1};
  ContextMask mask;
  bool burst_gate = true;
};

struct AllocationLog {
  double allocation = 0.0;
  Context context;
  std::vector<std::uint32_t> arms;
  std::size_t hits = 0;
  std::size_t misses = 0;
  std::uint32_t final_arm = 0;
  double final_loss = 0.0;

  double hit_rate() const {
    auto n = hits + misses;
    return n == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(n);
  }
};

struct TrainingLog {
  std::string workload;
  double baseline_s = 0.0;
  std::size_t max_train = 0;
  std::size_t probe_runs = 0;
  std::vector<AllocationLog> allocations;

  std::size_t episodes() const {
    std::size_t n = 0;
    for (const auto& a : allocations) n += a.hits + a.misses;
    return n;
  }
  std::size_t simulations() const {
    std::size_t n = 0;
    for (const auto& a : allocations) n += a.misses;
    return n;
  }
  double hit_rate() const {
    auto e = episodes();
    return e == 0 ? 0.0 : 1.0 - static_cast<double>(simulations()) / static_cast<double>(e);
  }
};

// The bandit's single tenant at a given allocation and policy.
inline SimConfig with_tenant_policy(SimConfig cfg, double allocation, PolicyKind kind) {
  if (cfg.tenants.empty()) throw InvalidArgument("training: config has no tenant");
  cfg.tenants.resize(1);
  cfg.tenants.front().local_alloc_fraction = allocation;
  cfg.tenants.front().policy = std::move(kind);
  return cfg;
}

// Context observed by a migration-free probe run at this allocation.
inline Context probe_context(const SimConfig& base, double allocation, ContextMask mask = {}) {
  auto result = run(with_tenant_policy(base, allocation, policy::NoMigration{}));
  return Context::from(result.front().context, mask);
}

inline double full_local_baseline(const SimConfig& base) {
  SimConfig cfg = base;
  cfg.tenants.resize(1);
  return run(full_local_config(cfg)).front().completion_seconds();
}

inline policy::Bandit arm_policy(const BanditAgent& agent, std::uint32_t arm, const SimConfig& base,
                                 bool burst_gate = true) {
  auto p = agent.grid().to_policy(arm, base.telemetry.marking_interval);
  p.burst_gate = burst_gate;
  return p;
}

// Curriculum over decreasing allocations. Each episode picks an arm for
// the allocation's context, reuses a cached reward when present, and
// otherwise simulates once; one replay minibatch update follows.
inline TrainingLog train_curriculum(BanditAgent& agent, const SimConfig& base, std::size_t max_train,
                                    RewardCache& cache, const CurriculumOptions& opts = {}) {
  if (max_train < 1) throw InvalidArgument("train_curriculum: max_train must be at least 1");
  if (base.tenants.empty() || !base.tenants.front().trace || base.tenants.front().trace->empty()) {
    throw InvalidArgument("train_curriculum: workload trace is empty");
  }
  TrainingLog log;
  log.workload = base.tenants.front().trace->meta.generator + ":" + base.tenants.front().trace->meta.params;
  log.max_train = max_train;
  log.baseline_s = full_local_baseline(base);
  for (double alloc : opts.allocations) {
    AllocationLog a;
    a.allocation = alloc;
    a.context = probe_context(base, alloc, opts.mask);
    ++log.probe_runs;
    a.arms.reserve(max_train);
    for (std::size_t e = 0; e < max_train; ++e) {
      std::uint32_t arm = agent.select_action(a.context, agent.epsilon_at(e, max_train));
      a.arms.push_back(arm);
      double reward;
      if (auto hit = cache.find(a.context, arm)) {
        reward = hit->reward;
        ++a.hits;
      } else {
        auto r = run(with_tenant_policy(base, alloc, arm_policy(agent, arm, base, opts.burst_gate)));
        reward = episode_reward(r.front(), log.baseline_s);
        cache.insert(a.context, arm, {reward, r.front().completion_seconds()});
        ++a.misses;
      }
      agent.remember({a.context, arm, reward});
      auto batch = agent.sample_batch();
      a.final_loss = agent.update(batch);
    }
    a.final_arm = agent.greedy(a.context);
    log.allocations.push_back(std::move(a));
  }
  return log;
}

struct EvalResult {
  Context context;
  std::uint32_t arm = 0;
  SimResult result;
};

// Greedy arm for the workload's probe context, then one run.
inline EvalResult evaluate_agent(const BanditAgent& agent, const SimConfig& base, double allocation,
                                 const CurriculumOptions& opts = {}) {
  EvalResult out;
  out.context = probe_context(base, allocation, opts.mask);
  out.arm = agent.greedy(out.context);
  out.result = run(with_tenant_policy(base, allocation, arm_policy(agent, out.arm, base, opts.burst_gate)));
  return out;
}

// Line-oriented records: one "alloc" line per allocation, one "arms" line
// with the arm trajectory, and a closing "summary" line.
inline void write_training_log(const TrainingLog& log, std::ostream& os) {
  os << "# hmdsim-training v1\n";
  os << "workload " << log.workload << "\n";
  os << "reward_normalization full_local_baseline_s=" << detail::format_double(log.baseline_s) << "\n";
  for (const auto& a : log.allocations) {
    os << "alloc allocation=" << detail::format_double(a.allocation);
    for (std::size_t i = 0; i < 4; ++i) os << " ctx" << i << "=" << detail::format_double(a.context.features[i]);
    os << " episodes=" << a.hits + a.misses << " simulations=" << a.misses << " hits=" << a.hits
       << " hit_rate=" << detail::format_double(a.hit_rate()) << " final_arm=" << a.final_arm
       << " final_loss=" << detail::format_double(a.final_loss) << "\n";
    os << "arms allocation=" << detail::format_double(a.allocation) << " ";
    for (std::size_t i = 0; i < a.arms.size(); ++i) os << (i ? "," : "") << a.arms[i];
    os << "\n";
  }
  os << "summary episodes=" << log.episodes() << " simulations=" << log.simulations()
     << " probe_runs=" << log.probe_runs << " hit_rate=" << detail::format_double(log.hit_rate()) << "\n";
}

}  // namespace hmdsim
