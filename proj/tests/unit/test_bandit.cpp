#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "hmdsim/bandit.hpp"
#include "hmdsim/training.hpp"

using namespace hmdsim;

namespace {

// Single linear layer: Q is exactly the bias vector.
BanditAgent fixed_q(const std::vector<double>& q) {
  DenseLayer l;
  l.in = 4;
  l.out = q.size();
  l.w.assign(4 * q.size(), 0.0);
  l.b = q;
  return BanditAgent(AgentConfig{}, ActionGrid{}, QNet({l}));
}

Context ctx(double a, double b, double c, double d) {
  Context x;
  x.features = {a, b, c, d};
  return x;
}

SimConfig small_workload(std::uint64_t seed = 1) {
  SimConfig cfg;
  cfg.telemetry.marking_interval = SimTime::from_seconds(2e-4);
  auto t = std::make_shared<Trace>(gen_shifting(300, 30, 400, 6000, seed));
  cfg.tenants.push_back({"app", t, policy::NoMigration{}, 0.1});
  return cfg;
}

}  // namespace

TEST(SelectAction, GreedyArgmax) {
  std::vector<double> q(42, 0.0);
  q[17] = 1.0;
  auto agent = fixed_q(q);
  EXPECT_EQ(agent.select_action(ctx(0.1, 0.1, 0.9, 0.2), 0.0), 17u);
}

TEST(SelectAction, TieGoesToLowestIndex) {
  std::vector<double> q(42, -1.0);
  q[3] = 2.0;
  q[9] = 2.0;
  EXPECT_EQ(fixed_q(q).select_action(ctx(0, 0, 0, 0), 0.0), 3u);
}

TEST(SelectAction, FullExplorationIsSeededUniform) {
  AgentConfig cfg;
  cfg.seed = 99;
  BanditAgent a(cfg), b(cfg);
  std::vector<int> seen(42, 0);
  for (int i = 0; i < 4200; ++i) {
    auto x = a.select_action(ctx(0.5, 0.5, 0.5, 0.5), 1.0);
    ASSERT_EQ(x, b.select_action(ctx(0.5, 0.5, 0.5, 0.5), 1.0));
    ASSERT_LT(x, 42u);
    ++seen[x];
  }
  for (int c : seen) EXPECT_GT(c, 50);
  EXPECT_THROW(a.select_action(ctx(0, 0, 0, 0), 1.5), InvalidArgument);
}

TEST(Update, ConvergesOnFixedTransition) {
  BanditAgent agent;
  Transition t{ctx(0.3, 0.3, 0.7, 0.05), 11, -1.2};
  std::vector<Transition> batch{t};
  double first = agent.update(batch), last = first;
  for (int i = 1; i < 500; ++i) last = agent.update(batch);
  EXPECT_LT(last, first);
  EXPECT_LT(std::abs(agent.q_values(t.context)[11] - t.reward), 1e-2);
}

TEST(Update, ZeroErrorLeavesWeights) {
  BanditAgent agent;
  auto c = ctx(0.2, 0.2, 0.8, 0.1);
  Transition t{c, 5, agent.q_values(c)[5]};
  auto before = agent.net().layers();
  EXPECT_NEAR(agent.update(std::vector<Transition>{t}), 0.0, 1e-24);
  const auto& after = agent.net().layers();
  for (std::size_t l = 0; l < before.size(); ++l) {
    for (std::size_t i = 0; i < before[l].w.size(); ++i) ASSERT_NEAR(before[l].w[i], after[l].w[i], 1e-15);
    for (std::size_t i = 0; i < before[l].b.size(); ++i) ASSERT_NEAR(before[l].b[i], after[l].b[i], 1e-15);
  }
}

TEST(Update, RandomBatchFinite) {
  BanditAgent agent;
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Transition> batch;
  for (int i = 0; i < 32; ++i) {
    batch.push_back({ctx(u(rng), u(rng), u(rng), u(rng)), static_cast<std::uint32_t>(rng() % 42), -1.0 - u(rng)});
  }
  EXPECT_TRUE(std::isfinite(agent.update(batch)));
  EXPECT_THROW(agent.update(std::vector<Transition>{}), InvalidArgument);
  batch[0].arm = 42;
  EXPECT_THROW(agent.update(batch), InvalidArgument);
}

TEST(Bandit, TwoArmSyntheticLearnsBetterArm) {
  ActionGrid grid;
  grid.burst = {0};
  grid.rate = {1, 2};
  AgentConfig cfg;
  cfg.learning_rate = 0.005;
  BanditAgent agent(cfg, grid);
  auto c = ctx(0.4, 0.4, 0.6, 0.1);
  const double reward[2] = {-1.1, -1.6};
  for (std::size_t e = 0; e < 400; ++e) {
    auto arm = agent.select_action(c, agent.epsilon_at(e, 400));
    agent.remember({c, arm, reward[arm]});
    agent.update(agent.sample_batch());
  }
  EXPECT_EQ(agent.greedy(c), 0u);
}

TEST(Epsilon, LinearDecay) {
  BanditAgent agent;
  EXPECT_DOUBLE_EQ(agent.epsilon_at(0, 1000), 1.0);
  EXPECT_DOUBLE_EQ(agent.epsilon_at(50, 1000), 1.0 + 0.5 * (0.05 - 1.0));
  EXPECT_NEAR(agent.epsilon_at(100, 1000), 0.05, 1e-12);
  EXPECT_NEAR(agent.epsilon_at(900, 1000), 0.05, 1e-12);
}

TEST(ActionGrid, ArmsAndRates) {
  ActionGrid g;
  EXPECT_EQ(g.size(), 42u);
  EXPECT_EQ(g.arm(0).theta_burst, 0u);
  EXPECT_EQ(g.arm(41).theta_burst, 16u);
  EXPECT_EQ(g.arm(41).theta_rate, 8.0);
  EXPECT_EQ(g.arm(8).theta_rate, 0.25);
  EXPECT_DOUBLE_EQ(g.to_policy(8, SimTime::from_seconds(1e-3)).theta_rate, 250.0);
  EXPECT_THROW(g.arm(42), InvalidArgument);
}

TEST(Reward, Examples) {
  EXPECT_DOUBLE_EQ(episode_reward(3.0, 3.0), -1.0);
  EXPECT_DOUBLE_EQ(episode_reward(6.0, 3.0), -2.0);
  EXPECT_DOUBLE_EQ(episode_reward_throughput(50.0, 100.0), -2.0);
  EXPECT_THROW(episode_reward(1.0, 0.0), InvalidArgument);
}

TEST(Context, Normalization) {
  PolicyContext pc;
  pc.working_set = 1000;
  pc.local_alloc = 100;
  pc.local_usage_peak = 100;
  pc.remote_usage_peak = 1000;
  pc.network_traffic = 50;
  pc.traffic_capacity = 500;
  auto c = Context::from(pc);
  EXPECT_DOUBLE_EQ(c.features[0], 0.1);
  EXPECT_DOUBLE_EQ(c.features[2], 1.0);
  EXPECT_DOUBLE_EQ(c.features[3], 0.1);
  auto m = Context::from(pc, {false, false});
  EXPECT_EQ(m.features[0], 0.0);
  EXPECT_EQ(m.features[3], 0.0);
}

TEST(RewardCache, QuantizedKeys) {
  RewardCache cache;
  cache.insert(ctx(0.101, 0.2, 0.3, 0.4), 3, {-1.5, 2.0});
  auto hit = cache.find(ctx(0.099, 0.2, 0.3, 0.4), 3);
  ASSERT_TRUE(hit);
  EXPECT_EQ(hit->reward, -1.5);
  EXPECT_FALSE(cache.find(ctx(0.12, 0.2, 0.3, 0.4), 3));
  EXPECT_FALSE(cache.find(ctx(0.1, 0.2, 0.3, 0.4), 4));
  EXPECT_EQ(cache.size(), 1u);
}

TEST(AgentIo, RoundTripAndTruncation) {
  BanditAgent agent;
  agent.update(std::vector<Transition>{{ctx(0.1, 0.1, 0.9, 0.3), 7, -1.3}});
  std::stringstream ss;
  write_agent(agent, ss);
  std::string bytes = ss.str();
  std::istringstream in(bytes);
  auto back = read_agent(in);
  for (double a : {0.1, 0.5, 0.9}) {
    auto c = ctx(a, a, 1 - a, 0.2);
    EXPECT_EQ(back.greedy(c), agent.greedy(c));
    EXPECT_EQ(back.q_values(c), agent.q_values(c));
  }
  std::istringstream cut(bytes.substr(0, bytes.size() - 5));
  EXPECT_THROW(read_agent(cut), FormatError);
  std::istringstream junk("not an agent");
  EXPECT_THROW(read_agent(junk), FormatError);
  auto path = std::string(HMDSIM_TEST_TMP) + "/agent.bin";
  save_agent(agent, path);
  EXPECT_EQ(load_agent(path).q_values(ctx(0, 0, 0, 0)), agent.q_values(ctx(0, 0, 0, 0)));
}

TEST(Training, OneAllocationCacheBound) {
  BanditAgent agent;
  RewardCache cache;
  CurriculumOptions opts;
  opts.allocations = {0.2};
  auto log = train_curriculum(agent, small_workload(), 100, cache, opts);
  ASSERT_EQ(log.allocations.size(), 1u);
  EXPECT_EQ(log.episodes(), 100u);
  EXPECT_LE(log.simulations(), 42u);
  EXPECT_EQ(log.simulations(), cache.size());
  EXPECT_GT(log.hit_rate(), 0.5);
}

TEST(Training, CachedRewardsMatchFreshRuns) {
  BanditAgent agent;
  RewardCache cache;
  CurriculumOptions opts;
  opts.allocations = {0.3, 0.1};
  auto base = small_workload();
  auto log = train_curriculum(agent, base, 30, cache, opts);
  ASSERT_EQ(log.allocations.size(), 2u);
  for (const auto& a : log.allocations) {
    std::uint32_t arm = a.arms.back();
    auto hit = cache.find(a.context, arm);
    ASSERT_TRUE(hit);
    auto r = run(with_tenant_policy(base, a.allocation, arm_policy(agent, arm, base)));
    EXPECT_DOUBLE_EQ(hit->reward, episode_reward(r.front(), log.baseline_s));
  }
}

TEST(Training, EvaluateTransfersWithoutRetraining) {
  BanditAgent agent;
  RewardCache cache;
  CurriculumOptions opts;
  opts.allocations = {0.1};
  train_curriculum(agent, small_workload(1), 20, cache, opts);
  auto other = small_workload(2);
  auto e = evaluate_agent(agent, other, 0.1);
  EXPECT_EQ(e.arm, agent.greedy(probe_context(other, 0.1)));
  EXPECT_GT(e.result.front().accesses, 0u);
}

TEST(Training, Errors) {
  BanditAgent agent;
  RewardCache cache;
  EXPECT_THROW(train_curriculum(agent, small_workload(), 0, cache), InvalidArgument);
  auto empty = small_workload();
  empty.tenants.front().trace = std::make_shared<Trace>();
  EXPECT_THROW(train_curriculum(agent, empty, 5, cache), InvalidArgument);
}
