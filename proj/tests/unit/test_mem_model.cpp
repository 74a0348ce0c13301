#include <gtest/gtest.h>

#include <random>

#include "hmdsim/mem_model.hpp"

using namespace hmdsim;

namespace {

std::size_t count_local(const MemoryState& m) {
  std::size_t n = 0;
  for (const auto& p : m.pages()) n += p.location == Location::Local;
  return n;
}

}  // namespace

TEST(InitMemory, FillLocalPlacesFirstPages) {
  auto m = MemoryState::init(4, 4096, 8192, Placement::FillLocalThenRemote);
  EXPECT_EQ(count_local(m), 2u);
  EXPECT_EQ(m.local_used(), 8192u);
  EXPECT_EQ(m.remote_used(), 8192u);
  EXPECT_EQ(m.page(0).location, Location::Local);
  EXPECT_EQ(m.page(1).location, Location::Local);
  EXPECT_EQ(m.page(2).location, Location::Remote);
}

TEST(InitMemory, AllRemoteLeavesLocalEmpty) {
  auto m = MemoryState::init(4, 4096, 8192, Placement::AllRemote);
  EXPECT_EQ(count_local(m), 0u);
  EXPECT_EQ(m.local_used(), 0u);
  EXPECT_TRUE(m.lru_order().empty());
}

TEST(InitMemory, TenPercentAllocation) {
  auto m = MemoryState::init(100, 4096, 40960, Placement::FillLocalThenRemote);
  EXPECT_EQ(count_local(m), 10u);
  EXPECT_EQ(m.pages().size() - count_local(m), 90u);
}

TEST(InitMemory, Watermarks) {
  MemoryConfig cfg;
  cfg.local_alloc = 40960;
  auto m = MemoryState::init(100, cfg);
  EXPECT_EQ(m.low_watermark(), 40960u);
  EXPECT_EQ(m.high_watermark(), 40960u + 10u * 1024 * 1024);
  EXPECT_LE(m.low_watermark(), m.local_alloc());
}

TEST(InitMemory, Errors) {
  EXPECT_THROW(MemoryState::init(4, 0, 8192, Placement::AllRemote), InvalidArgument);
  EXPECT_THROW(MemoryState::init(4, 4096, 100, Placement::FillLocalThenRemote), InvalidArgument);
  EXPECT_NO_THROW(MemoryState::init(4, 4096, 0, Placement::AllRemote));
}

TEST(RecordAccess, MovesPageToHead) {
  auto m = MemoryState::init(10, 4096, 10 * 4096, Placement::FillLocalThenRemote);
  m.record_access(7, SimTime::from_seconds(5));
  EXPECT_EQ(m.lru_order().front(), 7u);
  EXPECT_EQ(m.page(7).last_access, SimTime::from_seconds(5));
}

TEST(RecordAccess, Ordering) {
  auto m = MemoryState::init(10, 4096, 10 * 4096, Placement::FillLocalThenRemote);
  m.record_access(3, SimTime::from_seconds(1));
  m.record_access(9, SimTime::from_seconds(2));
  auto order = m.lru_order();
  ASSERT_GE(order.size(), 2u);
  EXPECT_EQ(order[0], 9u);
  EXPECT_EQ(order[1], 3u);
}

TEST(RecordAccess, RemotePageStaysOutOfLru) {
  auto m = MemoryState::init(4, 4096, 8192, Placement::FillLocalThenRemote);
  m.record_access(3, SimTime::from_seconds(1));
  EXPECT_EQ(m.page(3).last_access, SimTime::from_seconds(1));
  auto order = m.lru_order();
  EXPECT_EQ(order.size(), 2u);
  EXPECT_EQ(std::count(order.begin(), order.end(), 3u), 0);
  EXPECT_THROW(m.record_access(4, SimTime{}), std::out_of_range);
}

TEST(DemotionCandidates, TailWithFrequencyTieBreak) {
  auto m = MemoryState::init(5, 4096, 2 * 4096, Placement::AllRemote);
  m.apply_swap(2, std::nullopt);
  m.apply_swap(4, std::nullopt);
  m.page(4).ewma_rate = 0.1;
  m.page(2).ewma_rate = 3.0;
  // Same recency bucket for both (exact timestamps with bucket width 0).
  m.record_access(2, SimTime::from_seconds(1));
  m.record_access(4, SimTime::from_seconds(1));
  EXPECT_EQ(m.demotion_candidates(4096), (std::vector<PageId>{4}));
  EXPECT_EQ(m.demotion_candidates(8192), (std::vector<PageId>{4, 2}));
  EXPECT_EQ(m.demotion_candidates(100 * 4096).size(), 2u);
}

TEST(DemotionCandidates, RecencyBeatsFrequencyAcrossBuckets) {
  MemoryConfig cfg;
  cfg.local_alloc = 2 * 4096;
  cfg.recency_bucket = SimTime::from_seconds(1);
  auto m = MemoryState::init(4, cfg);
  m.apply_swap(0, std::nullopt);
  m.apply_swap(1, std::nullopt);
  m.page(0).ewma_rate = 100.0;
  m.page(1).ewma_rate = 0.1;
  m.record_access(0, SimTime::from_seconds(0.5));
  m.record_access(1, SimTime::from_seconds(3.5));
  EXPECT_EQ(m.demotion_candidates(4096), (std::vector<PageId>{0}));
}

TEST(DemotionCandidates, EmptyLocal) {
  auto m = MemoryState::init(4, 4096, 8192, Placement::AllRemote);
  EXPECT_TRUE(m.demotion_candidates(4096).empty());
}

TEST(ApplySwap, ExchangesLocations) {
  auto m = MemoryState::init(4, 4096, 8192, Placement::FillLocalThenRemote);
  auto used = m.local_used();
  m.apply_swap(2, PageId{1});
  EXPECT_EQ(m.page(2).location, Location::Local);
  EXPECT_EQ(m.page(1).location, Location::Remote);
  EXPECT_EQ(m.local_used(), used);
  auto order = m.lru_order();
  EXPECT_EQ(order.front(), 2u);
  EXPECT_EQ(std::count(order.begin(), order.end(), 1u), 0);
}

TEST(ApplySwap, PromoteIntoFreeSpace) {
  auto m = MemoryState::init(4, 4096, 8192, Placement::AllRemote);
  m.apply_swap(1, std::nullopt);
  EXPECT_EQ(m.local_used(), 4096u);
  EXPECT_EQ(m.remote_used(), 3u * 4096);
}

TEST(ApplySwap, Errors) {
  auto m = MemoryState::init(4, 4096, 8192, Placement::FillLocalThenRemote);
  EXPECT_THROW(m.apply_swap(2, std::nullopt), WatermarkViolation);
  EXPECT_THROW(m.apply_swap(2, PageId{2}), InvalidArgument);
  EXPECT_THROW(m.apply_swap(0, PageId{1}), InvalidArgument);  // promote not remote
  EXPECT_THROW(m.apply_swap(2, PageId{3}), InvalidArgument);  // demote not local
  EXPECT_EQ(m.local_used(), 8192u);
}

// Random event sequences: conservation, the hard cap, and candidate locality.
TEST(MemoryProperties, RandomEvents) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    std::size_t n = 2 + rng() % 40;
    Bytes page = 4096;
    Bytes alloc = page * (rng() % (n + 1));
    MemoryConfig cfg;
    cfg.local_alloc = alloc;
    cfg.recency_bucket = SimTime::from_ps(static_cast<std::int64_t>(rng() % 3) * 1000);
    auto m = MemoryState::init(n, cfg);
    for (int step = 0; step < 400; ++step) {
      PageId p = static_cast<PageId>(rng() % n);
      SimTime now = SimTime::from_ps(step * 700);
      switch (rng() % 4) {
        case 0:
          m.record_access(p, now);
          break;
        case 1:
          if (m.page(p).location == Location::Remote) {
            if (m.local_has_room()) {
              m.apply_swap(p, std::nullopt);
            } else {
              auto c = m.demotion_candidates(page);
              if (!c.empty()) m.apply_swap(p, c.front());
            }
          }
          break;
        case 2:
          if (m.page(p).location == Location::Local) m.demote(p);
          break;
        default:
          m.page(p).ewma_rate = static_cast<double>(rng() % 100);
      }
      ASSERT_EQ(m.local_used() + m.remote_used(), n * page);
      ASSERT_LE(m.local_used(), m.local_alloc());
      ASSERT_EQ(m.lru_order().size(), m.local_pages());
      for (PageId c : m.demotion_candidates(m.local_used() + page)) {
        ASSERT_EQ(m.page(c).location, Location::Local);
      }
    }
  }
}
