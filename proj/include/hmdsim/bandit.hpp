#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <deque>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <shared_mutex>
#include <span>
#include <string>
#include <vector>

#include "hmdsim/engine.hpp"
#include "hmdsim/error.hpp"

namespace hmdsim {

// Discretized threshold actions. Rates are in accesses per marking
// interval, i.e. accesses/second at the default one-second interval.
struct ActionGrid {
  std::vector<double> burst{0, 1, 2, 4, 8, 16};
  std::vector<double> rate{0.125, 0.25, 0.5, 1, 2, 4, 8};

  std::size_t size() const { return burst.size() * rate.size(); }

  struct Arm {
    std::uint32_t theta_burst = 0;
    double theta_rate = 0.0;
  };

  // Row-major: arm = burst_index * |rate| + rate_index.
  Arm arm(std::size_t index) const {
    if (index >= size()) throw InvalidArgument("arm index out of range");
    return {static_cast<std::uint32_t>(burst[index / rate.size()]), rate[index % rate.size()]};
  }

  policy::Bandit to_policy(std::size_t index, SimTime marking_interval) const {
    auto a = arm(index);
    return {a.theta_burst, a.theta_rate / marking_interval.seconds(), true};
  }

  friend bool operator==(const ActionGrid&, const ActionGrid&) = default;
};

struct ContextMask {
  bool local_alloc = true;
  bool network_traffic = true;
};

// Normalized bandit context: allocation, local peak and remote peak over
// the working set; traffic over capacity * duration.
struct Context {
  std::array<double, 4> features{};

  static Context from(const PolicyContext& pc, ContextMask mask = {}) {
    Context c;
    double ws = pc.working_set > 0 ? pc.working_set : 1.0;
    c.features[0] = mask.local_alloc ? pc.local_alloc / ws : 0.0;
    c.features[1] = pc.local_usage_peak / ws;
    c.features[2] = pc.remote_usage_peak / ws;
    c.features[3] = mask.network_traffic && pc.traffic_capacity > 0
                        ? pc.network_traffic / pc.traffic_capacity
                        : 0.0;
    return c;
  }

  friend bool operator==(const Context&, const Context&) = default;
};

struct Transition {
  Context context;
  std::uint32_t arm = 0;
  double reward = 0.0;
};

struct AgentConfig {
  std::vector<std::size_t> hidden{64, 64};
  double learning_rate = 0.0005;
  std::size_t batch_size = 32;
  double exploration_fraction = 0.1;
  double final_epsilon = 0.05;
  std::size_t replay_capacity = 10000;
  std::uint64_t seed = 7;
};

struct DenseLayer {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<double> w;  // out x in, row-major
  std::vector<double> b;
};

// Fully connected ReLU network trained with Adam on a squared error that
// touches only the chosen arm's output.
class QNet {
 public:
  QNet() = default;

  QNet(std::size_t inputs, const std::vector<std::size_t>& hidden, std::size_t outputs,
       std::mt19937_64& rng) {
    std::size_t prev = inputs;
    std::vector<std::size_t> sizes(hidden);
    sizes.push_back(outputs);
    for (std::size_t width : sizes) {
      DenseLayer l;
      l.in = prev;
      l.out = width;
      double bound = 1.0 / std::sqrt(static_cast<double>(prev));
      std::uniform_real_distribution<double> u(-bound, bound);
      l.w.resize(width * prev);
      for (auto& x : l.w) x = u(rng);
      l.b.resize(width);
      for (auto& x : l.b) x = u(rng);
      layers_.push_back(std::move(l));
      prev = width;
    }
    reset_optimizer();
  }

  explicit QNet(std::vector<DenseLayer> layers) : layers_(std::move(layers)) { reset_optimizer(); }

  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::size_t inputs() const { return layers_.empty() ? 0 : layers_.front().in; }
  std::size_t outputs() const { return layers_.empty() ? 0 : layers_.back().out; }

  std::vector<double> forward(std::span<const double> x) const {
    std::vector<double> cur(x.begin(), x.end()), next;
    for (std::size_t li = 0; li < layers_.size(); ++li) {
      const auto& l = layers_[li];
      next.assign(l.out, 0.0);
      for (std::size_t o = 0; o < l.out; ++o) {
        double s = l.b[o];
        const double* row = &l.w[o * l.in];
        for (std::size_t i = 0; i < l.in; ++i) s += row[i] * cur[i];
        next[o] = (li + 1 < layers_.size() && s < 0.0) ? 0.0 : s;
      }
      cur.swap(next);
    }
    return cur;
  }

  // One Adam step on mean((Q(x)[a] - r)^2); returns the pre-step loss.
  double train_step(std::span<const Transition> batch, double lr) {
    const std::size_t L = layers_.size();
    std::vector<std::vector<double>> gw(L), gb(L);
    for (std::size_t li = 0; li < L; ++li) {
      gw[li].assign(layers_[li].w.size(), 0.0);
      gb[li].assign(layers_[li].b.size(), 0.0);
    }
    double loss = 0.0;
    const double scale = 1.0 / static_cast<double>(batch.size());
    std::vector<std::vector<double>> acts(L + 1);
    for (const auto& t : batch) {
      acts[0].assign(t.context.features.begin(), t.context.features.end());
      for (std::size_t li = 0; li < L; ++li) {
        const auto& l = layers_[li];
        auto& out = acts[li + 1];
        out.assign(l.out, 0.0);
        for (std::size_t o = 0; o < l.out; ++o) {
          double s = l.b[o];
          const double* row = &l.w[o * l.in];
          for (std::size_t i = 0; i < l.in; ++i) s += row[i] * acts[li][i];
          out[o] = (li + 1 < L && s < 0.0) ? 0.0 : s;
        }
      }
      const double err = acts[L][t.arm] - t.reward;
      loss += err * err * scale;
      std::vector<double> delta(layers_.back().out, 0.0), prev_delta;
      delta[t.arm] = 2.0 * err * scale;
      for (std::size_t li = L; li-- > 0;) {
        const auto& l = layers_[li];
        const auto& input = acts[li];
        prev_delta.assign(l.in, 0.0);
        for (std::size_t o = 0; o < l.out; ++o) {
          const double d = delta[o];
          if (d == 0.0) continue;
          gb[li][o] += d;
          double* grow = &gw[li][o * l.in];
          const double* wrow = &l.w[o * l.in];
          for (std::size_t i = 0; i < l.in; ++i) {
            grow[i] += d * input[i];
            prev_delta[i] += d * wrow[i];
          }
        }
        if (li > 0) {
          for (std::size_t i = 0; i < l.in; ++i) {
            if (input[i] <= 0.0) prev_delta[i] = 0.0;
          }
        }
        delta.swap(prev_delta);
      }
    }
    ++step_;
    const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(step_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(step_));
    auto adam = [&](std::vector<double>& p, const std::vector<double>& g, std::vector<double>& m,
                    std::vector<double>& v) {
      for (std::size_t i = 0; i < p.size(); ++i) {
        m[i] = b1 * m[i] + (1 - b1) * g[i];
        v[i] = b2 * v[i] + (1 - b2) * g[i] * g[i];
        p[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
      }
    };
    for (std::size_t li = 0; li < L; ++li) {
      adam(layers_[li].w, gw[li], mw_[li], vw_[li]);
      adam(layers_[li].b, gb[li], mb_[li], vb_[li]);
    }
    return loss;
  }

 private:
  void reset_optimizer() {
    step_ = 0;
    mw_.clear(); vw_.clear(); mb_.clear(); vb_.clear();
    for (const auto& l : layers_) {
      mw_.emplace_back(l.w.size(), 0.0);
      vw_.emplace_back(l.w.size(), 0.0);
      mb_.emplace_back(l.b.size(), 0.0);
      vb_.emplace_back(l.b.size(), 0.0);
    }
  }

  std::vector<DenseLayer> layers_;
  std::vector<std::vector<double>> mw_, vw_, mb_, vb_;
  std::uint64_t step_ = 0;
};

// DQN with zero discount: a contextual bandit over the threshold grid.
class BanditAgent {
 public:
  explicit BanditAgent(AgentConfig cfg = {}, ActionGrid grid = {})
      : cfg_(std::move(cfg)), grid_(std::move(grid)), rng_(cfg_.seed) {
    net_ = QNet(4, cfg_.hidden, grid_.size(), rng_);
  }

  BanditAgent(AgentConfig cfg, ActionGrid grid, QNet net)
      : cfg_(std::move(cfg)), grid_(std::move(grid)), net_(std::move(net)), rng_(cfg_.seed) {
    if (net_.inputs() != 4 || net_.outputs() != grid_.size()) {
      throw FormatError("agent network shape does not match the action grid");
    }
  }

  const AgentConfig& config() const { return cfg_; }
  const ActionGrid& grid() const { return grid_; }
  const QNet& net() const { return net_; }
  std::size_t arms() const { return grid_.size(); }
  std::size_t replay_size() const { return replay_.size(); }

  std::vector<double> q_values(const Context& ctx) const { return net_.forward(ctx.features); }

  std::uint32_t select_action(const Context& ctx, double epsilon) {
    if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw InvalidArgument("select_action: epsilon must be in [0, 1]");
    if (epsilon > 0.0) {
      std::uniform_real_distribution<double> coin(0.0, 1.0);
      if (coin(rng_) < epsilon) {
        std::uniform_int_distribution<std::uint32_t> pick(0, static_cast<std::uint32_t>(arms() - 1));
        return pick(rng_);
      }
    }
    return greedy(ctx);
  }

  // Lowest index wins ties.
  std::uint32_t greedy(const Context& ctx) const {
    auto q = q_values(ctx);
    std::uint32_t best = 0;
    for (std::uint32_t a = 1; a < q.size(); ++a) {
      if (q[a] > q[best]) best = a;
    }
    return best;
  }

  double update(std::span<const Transition> batch) {
    if (batch.empty()) throw InvalidArgument("update: empty batch");
    for (const auto& t : batch) {
      if (!std::isfinite(t.reward)) throw InvalidArgument("update: non-finite reward");
      if (t.arm >= arms()) throw InvalidArgument("update: arm index out of range");
    }
    return net_.train_step(batch, cfg_.learning_rate);
  }

  void remember(const Transition& t) {
    replay_.push_back(t);
    if (replay_.size() > cfg_.replay_capacity) replay_.pop_front();
  }

  // Uniform sample with replacement from the replay buffer.
  std::vector<Transition> sample_batch() {
    std::vector<Transition> out;
    if (replay_.empty()) return out;
    std::size_t n = std::min(cfg_.batch_size, replay_.size());
    std::uniform_int_distribution<std::size_t> pick(0, replay_.size() - 1);
    for (std::size_t i = 0; i < n; ++i) out.push_back(replay_[pick(rng_)]);
    return out;
  }

  // Linear decay from 1 to final_epsilon over the first
  // exploration_fraction of an episode budget.
  double epsilon_at(std::size_t episode, std::size_t budget) const {
    double span = cfg_.exploration_fraction * static_cast<double>(budget);
    if (span <= 0.0) return cfg_.final_epsilon;
    double frac = std::min(1.0, static_cast<double>(episode) / span);
    return 1.0 + frac * (cfg_.final_epsilon - 1.0);
  }

 private:
  AgentConfig cfg_;
  ActionGrid grid_;
  QNet net_;
  std::mt19937_64 rng_;
  std::deque<Transition> replay_;
};

// Normalized reward: completion relative to the full-local runtime.
inline double episode_reward(double completion_s, double baseline_s) {
  if (!(baseline_s > 0.0)) throw InvalidArgument("episode_reward: baseline time must be positive");
  return -(completion_s / baseline_s);
}

inline double episode_reward(const TenantResult& result, double baseline_s) {
  return episode_reward(result.completion_seconds(), baseline_s);
}

// Request-serving workloads: the mock completion time is 1 / throughput.
inline double episode_reward_throughput(double requests_per_s, double baseline_requests_per_s) {
  if (!(requests_per_s > 0.0) || !(baseline_requests_per_s > 0.0)) {
    throw InvalidArgument("episode_reward_throughput: throughputs must be positive");
  }
  return episode_reward(1.0 / requests_per_s, 1.0 / baseline_requests_per_s);
}

struct CacheKey {
  std::array<std::int32_t, 4> context{};
  std::uint32_t arm = 0;

  friend auto operator<=>(const CacheKey&, const CacheKey&) = default;
};

inline std::array<std::int32_t, 4> quantize(const Context& c) {
  std::array<std::int32_t, 4> q{};
  for (std::size_t i = 0; i < 4; ++i) q[i] = static_cast<std::int32_t>(std::lround(c.features[i] * 100.0));
  return q;
}

struct CachedRun {
  double reward = 0.0;
  double completion_s = 0.0;
};

// (quantized context, arm) -> reward. Many readers, one writer.
class RewardCache {
 public:
  std::optional<CachedRun> find(const Context& ctx, std::uint32_t arm) const {
    std::shared_lock lock(mu_);
    auto it = map_.find({quantize(ctx), arm});
    if (it == map_.end()) return std::nullopt;
    return it->second;
  }

  void insert(const Context& ctx, std::uint32_t arm, CachedRun run) {
    std::unique_lock lock(mu_);
    map_.emplace(CacheKey{quantize(ctx), arm}, run);
  }

  std::size_t size() const {
    std::shared_lock lock(mu_);
    return map_.size();
  }

  std::vector<std::pair<CacheKey, CachedRun>> entries() const {
    std::shared_lock lock(mu_);
    return {map_.begin(), map_.end()};
  }

 private:
  mutable std::shared_mutex mu_;
  std::map<CacheKey, CachedRun> map_;
};

// Agent file: magic, version, grid, layer shapes, then little-endian f64
// weights (each layer's w row-major, then b) in layer order.
inline constexpr char kAgentMagic[8] = {'H', 'M', 'D', 'Q', 'N', 'E', 'T', '\0'};
inline constexpr std::uint32_t kAgentVersion = 1;

namespace detail {

template <typename T>
void put_le(std::ostream& os, T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
  os.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
T get_le(std::istream& is) {
  unsigned char buf[sizeof(T)];
  if (!is.read(reinterpret_cast<char*>(buf), sizeof(T))) throw FormatError("agent file truncated");
  if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
  T v;
  std::memcpy(&v, buf, sizeof(T));
  return v;
}

}  // namespace detail

inline void write_agent(const BanditAgent& agent, std::ostream& os) {
  os.write(kAgentMagic, sizeof(kAgentMagic));
  detail::put_le<std::uint32_t>(os, kAgentVersion);
  const auto& g = agent.grid();
  detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(g.burst.size()));
  for (double x : g.burst) detail::put_le<double>(os, x);
  detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(g.rate.size()));
  for (double x : g.rate) detail::put_le<double>(os, x);
  const auto& layers = agent.net().layers();
  detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(layers.size()));
  for (const auto& l : layers) {
    detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(l.in));
    detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(l.out));
  }
  for (const auto& l : layers) {
    for (double x : l.w) detail::put_le<double>(os, x);
    for (double x : l.b) detail::put_le<double>(os, x);
  }
}

inline BanditAgent read_agent(std::istream& is, AgentConfig cfg = {}) {
  char magic[sizeof(kAgentMagic)];
  if (!is.read(magic, sizeof(magic))) throw FormatError("agent file truncated");
  if (std::memcmp(magic, kAgentMagic, sizeof(magic)) != 0) throw FormatError("not an agent file (bad magic)");
  auto version = detail::get_le<std::uint32_t>(is);
  if (version != kAgentVersion) throw FormatError("unsupported agent file version " + std::to_string(version));
  constexpr std::uint32_t kMaxDim = 1u << 16;
  ActionGrid grid;
  auto read_grid = [&](std::vector<double>& out) {
    auto n = detail::get_le<std::uint32_t>(is);
    if (n == 0 || n > kMaxDim) throw FormatError("agent file: bad grid size");
    out.resize(n);
    for (auto& x : out) x = detail::get_le<double>(is);
  };
  read_grid(grid.burst);
  read_grid(grid.rate);
  auto n_layers = detail::get_le<std::uint32_t>(is);
  if (n_layers == 0 || n_layers > 64) throw FormatError("agent file: bad layer count");
  std::vector<DenseLayer> layers(n_layers);
  std::size_t prev = 0;
  for (std::size_t i = 0; i < n_layers; ++i) {
    layers[i].in = detail::get_le<std::uint32_t>(is);
    layers[i].out = detail::get_le<std::uint32_t>(is);
    if (layers[i].in == 0 || layers[i].out == 0 || layers[i].in > kMaxDim || layers[i].out > kMaxDim) {
      throw FormatError("agent file: bad layer shape");
    }
    if (i > 0 && layers[i].in != prev) throw FormatError("agent file: inconsistent layer shapes");
    prev = layers[i].out;
  }
  cfg.hidden.clear();
  for (std::size_t i = 0; i + 1 < n_layers; ++i) cfg.hidden.push_back(layers[i].out);
  for (auto& l : layers) {
    l.w.resize(l.in * l.out);
    l.b.resize(l.out);
    for (auto& x : l.w) x = detail::get_le<double>(is);
    for (auto& x : l.b) x = detail::get_le<double>(is);
  }
  if (is.peek() != std::char_traits<char>::eof()) throw FormatError("agent file: trailing bytes");
  return BanditAgent(std::move(cfg), std::move(grid), QNet(std::move(layers)));
}

inline void save_agent(const BanditAgent& agent, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open agent file for writing: " + path);
  write_agent(agent, os);
  if (!os) throw Error("failed writing agent file: " + path);
}

inline BanditAgent load_agent(const std::string& path, AgentConfig cfg = {}) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open agent file: " + path);
  return read_agent(is, std::move(cfg));
}

}  // namespace hmdsim
