#include <gtest/gtest.h>

#include <random>

#include "hmdsim/policies.hpp"

using namespace hmdsim;

namespace {

struct Fixture {
  LinkModel link;
  MemoryState mem = MemoryState::init(8, 4096, 4 * 4096, Placement::AllRemote);
  CostParams cost;
  SimTime interval = SimTime::from_seconds(0.001);

  DecisionInputs inputs() const { return {link, mem, cost, interval}; }
};

FaultReport fault(double rate, std::uint32_t burst = 1) {
  FaultReport f;
  f.rate = rate;
  f.burst_duration = burst;
  return f;
}

}  // namespace

TEST(Decide, StaticThresholdPromotesIntoFreeSpace) {
  Fixture fx;
  auto d = decide(policy::StaticThreshold{2.0}, fault(3.0), fx.mem.page(5), fx.inputs());
  EXPECT_TRUE(d.promote());
  EXPECT_FALSE(d.victim.has_value());
  EXPECT_FALSE(decide(policy::StaticThreshold{2.0}, fault(2.0), fx.mem.page(5), fx.inputs()).promote());
}

TEST(Decide, StaticThresholdPicksVictimWhenFull) {
  Fixture fx;
  for (PageId p = 0; p < 4; ++p) fx.mem.apply_swap(p, std::nullopt);
  fx.mem.record_access(2, SimTime::from_seconds(0));
  for (PageId p : {0u, 1u, 3u}) fx.mem.record_access(p, SimTime::from_seconds(5));
  auto d = decide(policy::StaticThreshold{2.0}, fault(3.0), fx.mem.page(6), fx.inputs());
  ASSERT_TRUE(d.promote());
  EXPECT_EQ(d.victim, std::optional<PageId>(2));
}

TEST(Decide, NoMigrationAndOracleStay) {
  Fixture fx;
  EXPECT_FALSE(decide(policy::NoMigration{}, fault(1e9), fx.mem.page(0), fx.inputs()).promote());
  EXPECT_FALSE(decide(policy::Oracle{}, fault(1e9), fx.mem.page(0), fx.inputs()).promote());
}

TEST(Decide, LocalPageNeverPromoted) {
  Fixture fx;
  fx.mem.apply_swap(0, std::nullopt);
  EXPECT_FALSE(decide(policy::StaticThreshold{0.0}, fault(10.0), fx.mem.page(0), fx.inputs()).promote());
}

TEST(Decide, EwmaUsesSmoothedRate) {
  Fixture fx;
  fx.mem.page(3).ewma_rate = 1.0;
  EXPECT_FALSE(decide(policy::EwmaThreshold{0.5, 2.0}, fault(100.0), fx.mem.page(3), fx.inputs()).promote());
  fx.mem.page(3).ewma_rate = 2.5;
  EXPECT_TRUE(decide(policy::EwmaThreshold{0.5, 2.0}, fault(0.0), fx.mem.page(3), fx.inputs()).promote());
}

TEST(Decide, BanditBurstGate) {
  Fixture fx;
  policy::Bandit b{4, 1.0, true};
  EXPECT_FALSE(decide(b, fault(1e6, 2), fx.mem.page(1), fx.inputs()).promote());
  EXPECT_TRUE(decide(b, fault(1.0, 4), fx.mem.page(1), fx.inputs()).promote());
  EXPECT_FALSE(decide(b, fault(0.5, 9), fx.mem.page(1), fx.inputs()).promote());
  b.burst_gate = false;
  EXPECT_TRUE(decide(b, fault(1e6, 2), fx.mem.page(1), fx.inputs()).promote());
}

TEST(Decide, NetworkAdaptiveRearrangedInequality) {
  Fixture fx;
  // gain = F * dT * B * dLat must exceed one page.
  double cutoff = 4096.0 / (0.001 * 12.5e9 * 800e-9);
  EXPECT_FALSE(decide(policy::NetworkAdaptive{}, fault(cutoff * 0.99), fx.mem.page(1), fx.inputs()).promote());
  EXPECT_TRUE(decide(policy::NetworkAdaptive{}, fault(cutoff * 1.01), fx.mem.page(1), fx.inputs()).promote());
}

TEST(Decide, NetworkAdaptiveFewerPromotionsUnderContention) {
  std::mt19937_64 rng(9);
  std::exponential_distribution<double> rates(1.0 / 500.0);
  std::vector<double> stream(5000);
  for (auto& r : stream) r = rates(rng);
  auto count = [&](double phi) {
    Fixture fx;
    fx.link.set_background_fraction(phi);
    int n = 0;
    for (double r : stream) n += decide(policy::NetworkAdaptive{}, fault(r), fx.mem.page(7), fx.inputs()).promote();
    return n;
  };
  int calm = count(0.0), busy = count(0.5);
  EXPECT_GT(calm, 0);
  EXPECT_LE(busy, calm);
  EXPECT_LT(busy, calm);
}

TEST(EstDemoteRate, Examples) {
  auto mem = MemoryState::init(8, 4096, 2 * 4096, Placement::AllRemote);
  EXPECT_EQ(est_demote_rate(mem), 0.0);
  mem.apply_swap(4, std::nullopt);
  mem.apply_swap(5, std::nullopt);
  mem.page(4).ewma_rate = 0.1;
  mem.page(5).ewma_rate = 0.5;
  mem.record_access(4, SimTime::from_seconds(1));
  mem.record_access(5, SimTime::from_seconds(1));
  EXPECT_DOUBLE_EQ(est_demote_rate(mem), 0.1);
  mem.demote(4);
  EXPECT_DOUBLE_EQ(est_demote_rate(mem), 0.5);
}

TEST(PolicyName, Labels) {
  EXPECT_EQ(policy_name(policy::NoMigration{}), "none");
  EXPECT_EQ(policy_name(policy::NetworkAdaptive{}), "adaptive");
  EXPECT_FALSE(policy_migrates(policy::NoMigration{}));
  EXPECT_TRUE(policy_migrates(policy::Bandit{}));
}
