#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "hmdsim/cost_model.hpp"
#include "hmdsim/error.hpp"
#include "hmdsim/mem_model.hpp"
#include "hmdsim/network_link.hpp"
#include "hmdsim/oracle.hpp"
#include "hmdsim/policies.hpp"
#include "hmdsim/telemetry.hpp"
#include "hmdsim/units.hpp"
#include "hmdsim/workload.hpp"

namespace hmdsim {

struct ContentionStep {
  SimTime at;
  double phi = 0.0;
};

struct TenantSpec {
  std::string name = "app";
  std::shared_ptr<const Trace> trace;
  PolicyKind policy = policy::NoMigration{};
  double local_alloc_fraction = 0.1;  // of the working set
};

enum class OracleSolver { Auto, Hungarian, Sorted };

inline std::string to_string(OracleSolver s) {
  switch (s) {
    case OracleSolver::Hungarian: return "hungarian";
    case OracleSolver::Sorted: return "sorted";
    default: return "auto";
  }
}

struct OracleConfig {
  std::optional<SimTime> interval;   // decision cadence; default marking interval
  std::optional<SimTime> lookahead;  // default one decision interval
  // Auto: Hungarian up to hungarian_max_left left vertices, sorted above.
  OracleSolver solver = OracleSolver::Auto;
  std::size_t hungarian_max_left = 64;
  bool record_plan = false;
};

struct SimConfig {
  TelemetryConfig telemetry;
  LinkConfig link;
  double background_phi = 0.0;
  std::vector<ContentionStep> schedule;
  double bookkeeping_ns = 1000.0;
  Bytes page_size = 4096;
  Bytes slack = 10 * kMiB;
  Placement placement = Placement::AllRemote;
  std::optional<SimTime> recency_bucket;  // default marking interval
  std::optional<SimTime> contention_window;  // default marking interval
  OracleConfig oracle;
  std::vector<TenantSpec> tenants;
  std::uint64_t seed = 1;

  CostParams cost_params() const {
    CostParams c;
    c.page_size = page_size;
    c.delta_latency_ns = link.delta_latency_ns();
    c.bookkeeping_ns = bookkeeping_ns;
    c.lookahead_s = oracle_lookahead().seconds();
    return c;
  }
  SimTime oracle_interval() const { return oracle.interval.value_or(telemetry.marking_interval); }
  SimTime oracle_lookahead() const { return oracle.lookahead.value_or(oracle_interval()); }

  void validate() const {
    telemetry.validate();
    link.validate();
    if (page_size == 0) throw InvalidArgument("config: page_size must be positive");
    if (!(background_phi >= 0.0 && background_phi < 1.0)) {
      throw InvalidArgument("config: contention must be in [0, 1)");
    }
    if (bookkeeping_ns < 0.0) throw InvalidArgument("config: bookkeeping time must be non-negative");
    for (std::size_t i = 0; i < schedule.size(); ++i) {
      if (!(schedule[i].phi >= 0.0 && schedule[i].phi < 1.0)) {
        throw InvalidArgument("config: scheduled contention must be in [0, 1)");
      }
      if (i > 0 && schedule[i].at < schedule[i - 1].at) {
        throw InvalidArgument("config: contention schedule must be sorted by time");
      }
    }
    if (tenants.empty()) throw InvalidArgument("config: at least one tenant is required");
    for (const auto& t : tenants) {
      if (!t.trace) throw InvalidArgument("config: tenant '" + t.name + "' has no trace");
      if (t.trace->meta.n_pages == 0) throw InvalidArgument("config: tenant '" + t.name + "' has no pages");
      if (!(t.local_alloc_fraction >= 0.0 && t.local_alloc_fraction <= 1.0)) {
        throw InvalidArgument("config: tenant '" + t.name + "' local allocation must be in [0, 1]");
      }
      if (!(t.trace->meta.compute_ns_per_access >= 0.0)) {
        throw InvalidArgument("config: tenant '" + t.name + "' compute time must be non-negative");
      }
    }
    if (oracle_interval().ps() <= 0 || oracle_lookahead().ps() <= 0) {
      throw InvalidArgument("config: oracle interval and lookahead must be positive");
    }
  }
};

// The four bandit context features, in bytes, plus their normalizers.
struct PolicyContext {
  double local_alloc = 0.0;
  double local_usage_peak = 0.0;
  double remote_usage_peak = 0.0;
  double network_traffic = 0.0;
  double working_set = 0.0;
  double traffic_capacity = 0.0;  // capacity * run duration
};

struct SwapEvent {
  SimTime at;
  PageId promote = kNoPage;
  PageId demote = kNoPage;
  double benefit = 0.0;
};

struct TenantResult {
  std::string name;
  std::string policy;
  SimTime completion;
  std::uint64_t accesses = 0;
  std::uint64_t local_accesses = 0;
  std::uint64_t remote_accesses = 0;
  std::uint64_t faults = 0;
  std::uint64_t promotions = 0;
  std::uint64_t demotions = 0;
  Bytes migration_bytes = 0;
  Bytes remote_access_bytes = 0;
  Bytes local_alloc = 0;
  Bytes working_set = 0;
  Bytes peak_local = 0;
  Bytes peak_remote = 0;
  SimTime compute_time;
  SimTime access_time;
  SimTime transfer_time;
  SimTime bookkeeping_time;
  double background_bytes = 0.0;
  PolicyContext context;
  std::vector<SwapEvent> plan;

  double completion_seconds() const { return completion.seconds(); }
  Bytes link_bytes() const { return migration_bytes + remote_access_bytes; }
};

struct SimResult {
  std::vector<TenantResult> tenants;
  LinkCounters link;

  const TenantResult& front() const { return tenants.front(); }
};

// Mutable per-tenant simulation state. Exposed so the oracle step can be
// driven directly.
class Tenant {
 public:
  Tenant(const SimConfig& cfg, const TenantSpec& spec)
      : spec_(spec),
        mem_(MemoryState::init(spec.trace->meta.n_pages, memory_config(cfg, spec))),
        telemetry_(cfg.telemetry),
        cost_(cfg.cost_params()),
        compute_(SimTime::from_ns(spec.trace->meta.compute_ns_per_access)),
        phi_(cfg.background_phi),
        schedule_(cfg.schedule),
        window_(cfg.contention_window.value_or(cfg.telemetry.marking_interval)),
        oracle_interval_(cfg.oracle_interval()),
        oracle_lookahead_(cfg.oracle_lookahead()),
        solver_(cfg.oracle.solver),
        hungarian_max_left_(cfg.oracle.hungarian_max_left),
        record_plan_(cfg.oracle.record_plan) {
    if (auto* e = std::get_if<policy::EwmaThreshold>(&spec_.policy)) telemetry_.ewma_alpha = e->alpha;
    is_oracle_ = std::holds_alternative<policy::Oracle>(spec_.policy);
    result_.name = spec_.name;
    result_.policy = policy_name(spec_.policy);
    result_.local_alloc = mem_.local_alloc();
    result_.working_set = mem_.working_set();
    track_peaks();
  }

  static MemoryConfig memory_config(const SimConfig& cfg, const TenantSpec& spec) {
    MemoryConfig m;
    m.page_size = cfg.page_size;
    auto pages = static_cast<Bytes>(std::floor(spec.local_alloc_fraction *
                                               static_cast<double>(spec.trace->meta.n_pages) + 1e-9));
    m.local_alloc = pages * cfg.page_size;
    m.slack = cfg.slack;
    m.placement = cfg.placement;
    m.recency_bucket = cfg.recency_bucket.value_or(cfg.telemetry.marking_interval);
    return m;
  }

  bool done() const { return cursor_ >= spec_.trace->accesses.size(); }
  SimTime clock() const { return clock_; }
  std::size_t cursor() const { return cursor_; }
  const MemoryState& memory() const { return mem_; }
  MemoryState& memory() { return mem_; }
  const TenantSpec& spec() const { return spec_; }
  const TenantResult& stats() const { return result_; }

  // Background fraction from the contention schedule at the tenant's clock.
  double scheduled_phi() {
    while (schedule_pos_ < schedule_.size() && schedule_[schedule_pos_].at <= clock_) {
      phi_ = schedule_[schedule_pos_].phi;
      ++schedule_pos_;
    }
    return phi_;
  }

  // Link bytes per second during the last completed contention window.
  double traffic_rate() const { return window_rate_; }

  // Replays one access of the trace.
  void step(LinkModel& link, double phi) {
    link.set_background_fraction(phi);
    const SimTime start = clock_;
    clock_ += compute_;
    result_.compute_time += compute_;
    while (next_mark_ < clock_) {
      mark_pages(mem_, next_mark_);
      next_mark_ += telemetry_.marking_interval;
    }
    if (is_oracle_) {
      while (next_oracle_ < clock_) {
        oracle_step(link, oracle_lookahead_);
        next_oracle_ += oracle_interval_;
      }
    }
    const PageId id = spec_.trace->accesses[cursor_++];
    const SimTime issue = clock_;
    if (mem_.page(id).marked) {
      ++result_.faults;
      FaultReport fault = on_hint_fault(mem_, id, issue, telemetry_);
      const auto& page = mem_.page(id);
      if (page.location == Location::Remote && policy_migrates(spec_.policy) && !is_oracle_) {
        DecisionInputs in{link, mem_, cost_, telemetry_.marking_interval};
        Decision d = decide(spec_.policy, fault, page, in);
        if (d.promote()) promote(link, id, d.victim);
      }
    }
    SimTime latency;
    if (mem_.page(id).location == Location::Local) {
      latency = SimTime::from_ns(link.config().local_latency_ns);
      ++result_.local_accesses;
    } else {
      latency = SimTime::from_ns(link.remote_access_delay());
      result_.remote_access_bytes += link.config().cacheline;
      add_window_bytes(link.config().cacheline);
      ++result_.remote_accesses;
    }
    clock_ += latency;
    result_.access_time += latency;
    ++result_.accesses;
    mem_.record_access(id, issue);
    run_demotion_daemon(link);
    track_peaks();
    result_.background_bytes += phi * link.config().capacity * (clock_ - start).seconds();
    roll_window();
  }

  // One clairvoyant planning step: counts future accesses over the
  // lookahead, solves the swap matching and applies every positive pair.
  std::vector<SwapPair> oracle_step(LinkModel& link, SimTime lookahead) {
    const auto& acc = spec_.trace->accesses;
    if (cursor_ >= acc.size()) return {};
    const double per_access_ns = spec_.trace->meta.compute_ns_per_access + link.config().local_latency_ns;
    auto horizon = static_cast<std::size_t>(std::ceil(lookahead.ns() / std::max(per_access_ns, 1e-3)));
    const std::size_t end = std::min(acc.size(), cursor_ + std::max<std::size_t>(horizon, 1));

    counts_.resize(mem_.n_pages(), 0);
    touched_.clear();
    for (std::size_t i = cursor_; i < end; ++i) {
      if (counts_[acc[i]]++ == 0) touched_.push_back(acc[i]);
    }
    const double bw = link.effective_bandwidth();
    const double cut = transfer_threshold(mem_.page_size(), bw, cost_.delta_latency_ns) + cost_.k();

    // Only remote pages with count above the swap cost can carry a
    // positive edge; only the coldest locals can be their best partners.
    std::vector<PageId> remote;
    for (PageId p : touched_) {
      if (mem_.page(p).location == Location::Remote && counts_[p] > cut) remote.push_back(p);
    }
    std::sort(remote.begin(), remote.end(), [&](PageId a, PageId b) {
      return counts_[a] != counts_[b] ? counts_[a] > counts_[b] : a < b;
    });
    const std::size_t free_frames = (mem_.low_watermark() - std::min(mem_.low_watermark(), mem_.local_used())) /
                                    mem_.page_size();
    const std::size_t slots = free_frames + mem_.local_pages();
    if (remote.size() > slots) remote.resize(slots);
    std::vector<PageId> local;
    std::size_t use_free = std::min(free_frames, remote.size());
    if (remote.size() > use_free) {
      local = mem_.lru_order();
      std::sort(local.begin(), local.end(), [&](PageId a, PageId b) {
        return counts_[a] != counts_[b] ? counts_[a] < counts_[b] : a < b;
      });
      local.resize(std::min(local.size(), remote.size() - use_free));
    }
    std::vector<SwapPair> swaps;
    if (!remote.empty()) {
      bool hungarian = solver_ == OracleSolver::Hungarian ||
                       (solver_ == OracleSolver::Auto && local.size() + use_free <= hungarian_max_left_);
      if (hungarian) {
        SwapGraph g = build_graph(local, remote, counts_, cost_, bw, use_free);
        swaps = max_weight_matching(g).swaps(g);
      } else {
        swaps = sorted_swaps(local, remote, counts_, cost_, bw, use_free);
      }
    }
    for (PageId p : touched_) counts_[p] = 0;

    for (const auto& s : swaps) {
      std::optional<PageId> victim;
      if (s.demote != kNoPage) victim = s.demote;
      promote(link, s.promote, victim);
      if (record_plan_) result_.plan.push_back({clock_, s.promote, s.demote, s.benefit});
    }
    return swaps;
  }

  TenantResult finish(const LinkConfig& link_cfg) {
    result_.completion = clock_;
    auto& c = result_.context;
    c.local_alloc = static_cast<double>(mem_.local_alloc());
    c.local_usage_peak = static_cast<double>(result_.peak_local);
    c.remote_usage_peak = static_cast<double>(result_.peak_remote);
    c.network_traffic = static_cast<double>(result_.link_bytes()) + result_.background_bytes;
    c.working_set = static_cast<double>(mem_.working_set());
    c.traffic_capacity = link_cfg.capacity * clock_.seconds();
    return result_;
  }

 private:
  void promote(LinkModel& link, PageId id, std::optional<PageId> victim) {
    const Bytes ps = mem_.page_size();
    const SimTime one = SimTime::from_ns(link.page_transfer_delay(ps));
    SimTime transfer = victim ? one + one : one;
    Bytes moved = victim ? 2 * ps : ps;
    mem_.apply_swap(id, victim);
    link.charge_migration(moved);
    result_.migration_bytes += moved;
    add_window_bytes(moved);
    const SimTime k = SimTime::from_ns(cost_.bookkeeping_ns);
    clock_ += transfer + k;
    result_.transfer_time += transfer;
    result_.bookkeeping_time += k;
    ++result_.promotions;
    if (victim) ++result_.demotions;
    track_peaks();
  }

  // Demotes LRU-tail pages once usage crosses HIGH, until below LOW.
  void run_demotion_daemon(LinkModel& link) {
    if (mem_.local_used() <= mem_.high_watermark()) return;
    const Bytes ps = mem_.page_size();
    auto victims = mem_.demotion_candidates(mem_.local_used() - mem_.low_watermark() + ps);
    for (PageId v : victims) {
      if (mem_.local_used() < mem_.low_watermark()) break;
      mem_.demote(v);
      const SimTime t = SimTime::from_ns(link.page_transfer_delay(ps));
      link.charge_migration(ps);
      result_.migration_bytes += ps;
      add_window_bytes(ps);
      clock_ += t;
      result_.transfer_time += t;
      ++result_.demotions;
    }
  }

  void track_peaks() {
    result_.peak_local = std::max(result_.peak_local, mem_.local_used());
    result_.peak_remote = std::max(result_.peak_remote, mem_.remote_used());
  }

  void add_window_bytes(Bytes b) { window_bytes_ += b; }

  void roll_window() {
    if (clock_ - window_start_ < window_) return;
    window_rate_ = static_cast<double>(window_bytes_) / (clock_ - window_start_).seconds();
    window_bytes_ = 0;
    window_start_ = clock_;
  }

  TenantSpec spec_;
  MemoryState mem_;
  TelemetryConfig telemetry_;
  CostParams cost_;
  SimTime compute_;
  double phi_;
  std::vector<ContentionStep> schedule_;
  std::size_t schedule_pos_ = 0;
  SimTime window_;
  SimTime window_start_;
  Bytes window_bytes_ = 0;
  double window_rate_ = 0.0;
  SimTime oracle_interval_;
  SimTime oracle_lookahead_;
  OracleSolver solver_;
  std::size_t hungarian_max_left_;
  bool record_plan_ = false;
  bool is_oracle_ = false;
  SimTime next_oracle_;
  SimTime clock_;
  SimTime next_mark_;
  std::size_t cursor_ = 0;
  TenantResult result_;
  std::vector<std::uint32_t> counts_;
  std::vector<PageId> touched_;
};

inline constexpr double kMaxInducedPhi = 0.95;

// Tenants advance round-robin, one access each per round. Contention seen
// by a tenant is its scheduled background plus the other tenants' traffic
// rate, sampled at the start of the round so that tenant order within a
// round has no effect.
inline SimResult run_multi(const SimConfig& cfg) {
  cfg.validate();
  LinkModel link(cfg.link, cfg.background_phi);
  std::vector<Tenant> tenants;
  tenants.reserve(cfg.tenants.size());
  for (const auto& spec : cfg.tenants) tenants.emplace_back(cfg, spec);

  std::vector<double> rates(tenants.size(), 0.0);
  const double cap = cfg.link.capacity;
  bool any = true;
  while (any) {
    any = false;
    double total_rate = 0.0;
    for (std::size_t i = 0; i < tenants.size(); ++i) {
      rates[i] = tenants[i].traffic_rate();
      total_rate += rates[i];
    }
    for (std::size_t i = 0; i < tenants.size(); ++i) {
      auto& t = tenants[i];
      if (t.done()) continue;
      any = true;
      double phi = t.scheduled_phi();
      if (tenants.size() > 1) phi = std::min(phi + (total_rate - rates[i]) / cap, kMaxInducedPhi);
      t.step(link, phi);
    }
  }
  SimResult out;
  for (auto& t : tenants) out.tenants.push_back(t.finish(cfg.link));
  out.link = link.counters();
  return out;
}

inline SimResult run(const SimConfig& cfg) { return run_multi(cfg); }

// Same workload with every tenant fully local and migration off.
inline SimConfig full_local_config(SimConfig cfg) {
  cfg.placement = Placement::FillLocalThenRemote;
  cfg.schedule.clear();
  for (auto& t : cfg.tenants) {
    t.local_alloc_fraction = 1.0;
    t.policy = policy::NoMigration{};
  }
  return cfg;
}

// Runs fn(0..n-1) on up to `workers` threads (0: hardware concurrency).
// The first exception is rethrown after all threads finish.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t workers, Fn&& fn) {
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, n);
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mu);
        if (!error) error = std::current_exception();
      }
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  if (error) std::rethrow_exception(error);
}

struct SweepCell {
  double allocation = 0.0;
  double phi = 0.0;
  SimResult result;
};

// Cartesian product of allocations x contentions, row-major by allocation.
// Cells run on a bounded pool; output order is the grid order.
inline std::vector<SweepCell> sweep(const SimConfig& base, const std::vector<double>& allocations,
                                    const std::vector<double>& contentions, std::size_t workers = 0) {
  if (allocations.empty() || contentions.empty()) {
    throw InvalidArgument("sweep: allocation and contention lists must be non-empty");
  }
  std::vector<SweepCell> cells;
  for (double a : allocations) {
    for (double phi : contentions) cells.push_back({a, phi, {}});
  }
  std::vector<SimConfig> configs;
  for (const auto& c : cells) {
    SimConfig cfg = base;
    cfg.background_phi = c.phi;
    cfg.schedule.clear();
    for (auto& t : cfg.tenants) t.local_alloc_fraction = c.allocation;
    cfg.validate();
    configs.push_back(std::move(cfg));
  }
  parallel_for(cells.size(), workers, [&](std::size_t i) { cells[i].result = run(configs[i]); });
  return cells;
}

// Oracle horizons to try, in marking intervals.
inline const std::vector<double> kOracleLookaheads{0.05, 0.1, 0.25, 1.0, 4.0, 16.0};

struct OracleBound {
  SimTime lookahead;
  SimTime interval;
  SimResult result;
};

inline SimTime makespan(const SimResult& r) {
  SimTime m;
  for (const auto& t : r.tenants) m = std::max(m, t.completion);
  return m;
}

// Oracle runs over a set of horizons, keeping the smallest makespan; the
// earliest candidate wins ties. The cadence is a quarter marking interval
// or half the horizon, whichever is shorter.
inline OracleBound oracle_bound(SimConfig cfg, const std::vector<double>& lookaheads = kOracleLookaheads) {
  if (lookaheads.empty()) throw InvalidArgument("oracle_bound: no lookahead candidates");
  for (auto& t : cfg.tenants) t.policy = policy::Oracle{};
  const SimTime mi = cfg.telemetry.marking_interval;
  std::optional<OracleBound> best;
  for (double f : lookaheads) {
    if (!(f > 0.0)) throw InvalidArgument("oracle_bound: lookahead must be positive");
    SimTime look = SimTime::from_ps(std::max<std::int64_t>(1, std::llround(static_cast<double>(mi.ps()) * f)));
    SimTime every = std::min(SimTime::from_ps(std::max<std::int64_t>(1, mi.ps() / 4)),
                             SimTime::from_ps(std::max<std::int64_t>(1, look.ps() / 2)));
    cfg.oracle.lookahead = look;
    cfg.oracle.interval = every;
    auto r = run(cfg);
    if (!best || makespan(r) < makespan(best->result)) best = OracleBound{look, every, std::move(r)};
  }
  return *best;
}

// Every field, full precision; equal strings mean identical results.
inline std::string serialize(const TenantResult& r) {
  std::ostringstream os;
  os << "name=" << r.name << ";policy=" << r.policy << ";completion_ps=" << r.completion.ps()
     << ";accesses=" << r.accesses << ";local=" << r.local_accesses << ";remote=" << r.remote_accesses
     << ";faults=" << r.faults << ";promotions=" << r.promotions << ";demotions=" << r.demotions
     << ";migration_bytes=" << r.migration_bytes << ";remote_access_bytes=" << r.remote_access_bytes
     << ";local_alloc=" << r.local_alloc << ";peak_local=" << r.peak_local
     << ";peak_remote=" << r.peak_remote << ";compute_ps=" << r.compute_time.ps()
     << ";access_ps=" << r.access_time.ps() << ";transfer_ps=" << r.transfer_time.ps()
     << ";bookkeeping_ps=" << r.bookkeeping_time.ps()
     << ";background_bytes=" << detail::format_double(r.background_bytes)
     << ";traffic=" << detail::format_double(r.context.network_traffic);
  return os.str();
}

inline std::string serialize(const SimResult& r) {
  std::string out;
  for (const auto& t : r.tenants) out += serialize(t) + "\n";
  return out;
}

}  // namespace hmdsim
