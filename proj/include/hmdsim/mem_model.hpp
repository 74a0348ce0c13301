#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hmdsim/error.hpp"
#include "hmdsim/units.hpp"

namespace hmdsim {

enum class Location : std::uint8_t { Local, Remote };

enum class Placement : std::uint8_t { AllRemote, FillLocalThenRemote };

inline const char* to_string(Placement p) {
  return p == Placement::AllRemote ? "all_remote" : "fill_local";
}

// Burst-duration cluster of one page (the running state of the coalescer).
struct ClusterState {
  std::uint32_t cluster_size = 0;
  double prev_rate = 0.0;
  SimTime prev_mark;
};

struct PageRecord {
  PageId id = 0;
  Location location = Location::Remote;
  bool marked = false;
  SimTime mark_time;    // M_i, most recent marking
  SimTime access_time;  // A_i, most recent post-marking access
  ClusterState burst;
  double rate = 0.0;       // F_i, accesses/second
  double ewma_rate = 0.0;  // baseline estimator state
  bool ewma_valid = false;
  SimTime last_access;
  bool ever_accessed = false;
};

struct MemoryConfig {
  Bytes page_size = 4096;
  Bytes local_alloc = 0;
  Bytes slack = 10 * kMiB;
  Placement placement = Placement::AllRemote;
  // Width of the recency buckets used by demotion ranking; pages whose
  // last access falls in the same bucket are ordered by ewma_rate.
  // Zero means exact timestamp equality.
  SimTime recency_bucket;
};

// Two-tier memory: a capped local node and a remote pool, with an
// intrusive LRU list over the local pages (head = most recent).
class MemoryState {
 public:
  static MemoryState init(std::size_t n_pages, const MemoryConfig& cfg) {
    if (cfg.page_size == 0) throw InvalidArgument("init_memory: page_size must be positive");
    if (cfg.placement == Placement::FillLocalThenRemote && cfg.local_alloc < cfg.page_size) {
      throw InvalidArgument("init_memory: local_alloc smaller than one page with fill_local placement");
    }
    MemoryState s;
    s.cfg_ = cfg;
    s.low_watermark_ = cfg.local_alloc;
    s.high_watermark_ = cfg.local_alloc + cfg.slack;
    s.pages_.resize(n_pages);
    s.prev_.assign(n_pages, kNoPage);
    s.next_.assign(n_pages, kNoPage);
    std::size_t local_slots = static_cast<std::size_t>(cfg.local_alloc / cfg.page_size);
    for (std::size_t i = 0; i < n_pages; ++i) {
      auto& p = s.pages_[i];
      p.id = static_cast<PageId>(i);
      if (cfg.placement == Placement::FillLocalThenRemote && i < local_slots) {
        p.location = Location::Local;
        s.local_used_ += cfg.page_size;
        s.lru_push_front(p.id);
      } else {
        s.remote_used_ += cfg.page_size;
      }
    }
    return s;
  }

  static MemoryState init(std::size_t n_pages, Bytes page_size, Bytes local_alloc,
                          Placement placement) {
    MemoryConfig cfg;
    cfg.page_size = page_size;
    cfg.local_alloc = local_alloc;
    cfg.placement = placement;
    return init(n_pages, cfg);
  }

  std::size_t n_pages() const { return pages_.size(); }
  Bytes page_size() const { return cfg_.page_size; }
  Bytes local_alloc() const { return cfg_.local_alloc; }
  Bytes local_used() const { return local_used_; }
  Bytes remote_used() const { return remote_used_; }
  Bytes low_watermark() const { return low_watermark_; }
  Bytes high_watermark() const { return high_watermark_; }
  Bytes working_set() const { return pages_.size() * cfg_.page_size; }
  std::size_t local_pages() const { return local_used_ / cfg_.page_size; }
  bool local_has_room() const { return local_used_ + cfg_.page_size <= low_watermark_; }
  const MemoryConfig& config() const { return cfg_; }

  const PageRecord& page(PageId id) const { return pages_.at(id); }
  PageRecord& page(PageId id) { return pages_.at(id); }
  const std::vector<PageRecord>& pages() const { return pages_; }
  std::vector<PageRecord>& pages() { return pages_; }

  void record_access(PageId id, SimTime now) {
    auto& p = page(id);
    p.last_access = now;
    p.ever_accessed = true;
    if (p.location == Location::Local) {
      lru_unlink(id);
      lru_push_front(id);
    }
  }

  // Local pages in LRU order, most recent first.
  std::vector<PageId> lru_order() const {
    std::vector<PageId> out;
    for (PageId id = head_; id != kNoPage; id = next_[id]) out.push_back(id);
    return out;
  }

  // Walks the LRU from the tail. Contiguous runs that share a recency
  // bucket are ordered by ascending ewma_rate before being emitted.
  std::vector<PageId> demotion_candidates(Bytes bytes_needed) const {
    std::vector<PageId> out;
    Bytes gathered = 0;
    PageId cur = tail_;
    std::vector<PageId> group;
    while (cur != kNoPage && gathered < bytes_needed) {
      group.clear();
      auto bucket = bucket_of(pages_[cur].last_access);
      while (cur != kNoPage && bucket_of(pages_[cur].last_access) == bucket) {
        group.push_back(cur);
        cur = prev_[cur];
      }
      std::stable_sort(group.begin(), group.end(), [&](PageId a, PageId b) {
        return pages_[a].ewma_rate < pages_[b].ewma_rate;
      });
      for (PageId id : group) {
        if (gathered >= bytes_needed) break;
        out.push_back(id);
        gathered += cfg_.page_size;
      }
    }
    return out;
  }

  void apply_swap(PageId promote_id, std::optional<PageId> demote_id) {
    auto& p = page(promote_id);
    if (p.location != Location::Remote) {
      throw InvalidArgument("apply_swap: page " + std::to_string(promote_id) + " is not remote");
    }
    if (demote_id) {
      if (*demote_id == promote_id) throw InvalidArgument("apply_swap: same page promoted and demoted");
      if (page(*demote_id).location != Location::Local) {
        throw InvalidArgument("apply_swap: page " + std::to_string(*demote_id) + " is not local");
      }
    } else if (!local_has_room()) {
      throw WatermarkViolation("apply_swap: promoting page " + std::to_string(promote_id) +
                               " would exceed the local allocation");
    }
    if (demote_id) demote(*demote_id);
    p.location = Location::Local;
    local_used_ += cfg_.page_size;
    remote_used_ -= cfg_.page_size;
    lru_push_front(promote_id);
  }

  void demote(PageId id) {
    auto& d = page(id);
    if (d.location != Location::Local) {
      throw InvalidArgument("demote: page " + std::to_string(id) + " is not local");
    }
    lru_unlink(id);
    d.location = Location::Remote;
    local_used_ -= cfg_.page_size;
    remote_used_ += cfg_.page_size;
  }

 private:
  MemoryState() = default;

  std::int64_t bucket_of(SimTime t) const {
    auto w = cfg_.recency_bucket.ps();
    return w > 0 ? t.ps() / w : t.ps();
  }

  void lru_push_front(PageId id) {
    prev_[id] = kNoPage;
    next_[id] = head_;
    if (head_ != kNoPage) prev_[head_] = id;
    head_ = id;
    if (tail_ == kNoPage) tail_ = id;
  }

  void lru_unlink(PageId id) {
    if (prev_[id] != kNoPage) next_[prev_[id]] = next_[id];
    else head_ = next_[id];
    if (next_[id] != kNoPage) prev_[next_[id]] = prev_[id];
    else tail_ = prev_[id];
    prev_[id] = next_[id] = kNoPage;
  }

  MemoryConfig cfg_;
  Bytes local_used_ = 0;
  Bytes remote_used_ = 0;
  Bytes low_watermark_ = 0;
  Bytes high_watermark_ = 0;
  std::vector<PageRecord> pages_;
  std::vector<PageId> prev_;
  std::vector<PageId> next_;
  PageId head_ = kNoPage;
  PageId tail_ = kNoPage;
};

}  // namespace hmdsim
