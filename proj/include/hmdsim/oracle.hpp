#pragma once

#include <algorithm>
#include <cstddef>
#include <limits>
#include <map>
#include <numeric>
#include <string>
#include <unordered_map>
#include <vector>

#include "hmdsim/cost_model.hpp"
#include "hmdsim/error.hpp"
#include "hmdsim/units.hpp"

namespace hmdsim {

// Bipartite swap graph. Left vertices are local pages (or free local
// frames, stored as kNoPage). The right side lists every left vertex again
// as its own self-partner, followed by the remote pages. Edges exist only
// for self-pairs (weight 0) and local/remote pairs (weight = net benefit).
class SwapGraph {
 public:
  static constexpr double kNoEdge = -std::numeric_limits<double>::infinity();

  SwapGraph() = default;
  SwapGraph(std::vector<PageId> left, std::vector<PageId> remote)
      : left_(std::move(left)), remote_(std::move(remote)) {
    weights_.assign(left_.size() * n_right(), kNoEdge);
    for (std::size_t i = 0; i < left_.size(); ++i) at(i, i) = 0.0;
  }

  // Explicit cross weights: rows = local, cols = remote. Used for tests.
  static SwapGraph from_cross_weights(const std::vector<std::vector<double>>& cross) {
    std::size_t n_remote = cross.empty() ? 0 : cross.front().size();
    std::vector<PageId> left(cross.size()), remote(n_remote);
    std::iota(left.begin(), left.end(), PageId{0});
    std::iota(remote.begin(), remote.end(), static_cast<PageId>(cross.size()));
    SwapGraph g(std::move(left), std::move(remote));
    for (std::size_t i = 0; i < cross.size(); ++i) {
      if (cross[i].size() != n_remote) throw InvalidArgument("from_cross_weights: ragged matrix");
      for (std::size_t r = 0; r < n_remote; ++r) g.set_cross(i, r, cross[i][r]);
    }
    return g;
  }

  std::size_t n_left() const { return left_.size(); }
  std::size_t n_remote() const { return remote_.size(); }
  std::size_t n_right() const { return left_.size() + remote_.size(); }
  const std::vector<PageId>& left() const { return left_; }
  const std::vector<PageId>& remote() const { return remote_; }

  // Page of right vertex j (kNoPage for a free frame's self vertex).
  PageId right_page(std::size_t j) const { return j < left_.size() ? left_[j] : remote_[j - left_.size()]; }
  bool is_self(std::size_t i, std::size_t j) const { return i == j; }

  double weight(std::size_t i, std::size_t j) const { return weights_[i * n_right() + j]; }
  bool has_edge(std::size_t i, std::size_t j) const { return weight(i, j) != kNoEdge; }

  void set_cross(std::size_t i, std::size_t remote_index, double w) {
    at(i, left_.size() + remote_index) = w;
  }

 private:
  double& at(std::size_t i, std::size_t j) { return weights_[i * n_right() + j]; }

  std::vector<PageId> left_;
  std::vector<PageId> remote_;
  std::vector<double> weights_;
};

struct SwapPair {
  PageId promote = kNoPage;
  PageId demote = kNoPage;  // kNoPage: promotion into a free frame
  double benefit = 0.0;

  friend bool operator==(const SwapPair&, const SwapPair&) = default;
};

struct Matching {
  std::vector<std::size_t> right_of_left;
  double total = 0.0;

  // Cross pairs of the matching, in left-vertex order.
  std::vector<SwapPair> swaps(const SwapGraph& g) const {
    std::vector<SwapPair> out;
    for (std::size_t i = 0; i < right_of_left.size(); ++i) {
      std::size_t j = right_of_left[i];
      if (g.is_self(i, j)) continue;
      out.push_back({g.right_page(j), g.left()[i], g.weight(i, j)});
    }
    return out;
  }
};

// Sum of matched edge weights in left-vertex order.
inline double matching_weight(const SwapGraph& g, const std::vector<std::size_t>& right_of_left) {
  double total = 0.0;
  for (std::size_t i = 0; i < right_of_left.size(); ++i) total += g.weight(i, right_of_left[i]);
  return total;
}

namespace detail {

inline double lookup_count(const std::unordered_map<PageId, double>& counts, PageId p) {
  auto it = counts.find(p);
  if (it == counts.end()) throw InvalidArgument("build_graph: missing count for page " + std::to_string(p));
  return it->second;
}

inline double lookup_count(const std::map<PageId, double>& counts, PageId p) {
  auto it = counts.find(p);
  if (it == counts.end()) throw InvalidArgument("build_graph: missing count for page " + std::to_string(p));
  return it->second;
}

template <typename T>
double lookup_count(const std::vector<T>& counts, PageId p) {
  if (p >= counts.size()) throw InvalidArgument("build_graph: missing count for page " + std::to_string(p));
  return static_cast<double>(counts[p]);
}

}  // namespace detail

// Free frames enter as extra left vertices with zero future accesses.
template <typename Counts>
SwapGraph build_graph(const std::vector<PageId>& local, const std::vector<PageId>& remote,
                      const Counts& future_counts, const CostParams& params, double bandwidth,
                      std::size_t free_frames = 0) {
  std::vector<PageId> left(local);
  left.insert(left.end(), free_frames, kNoPage);
  SwapGraph g(std::move(left), remote);
  std::vector<double> remote_counts;
  remote_counts.reserve(remote.size());
  for (PageId p : remote) remote_counts.push_back(detail::lookup_count(future_counts, p));
  for (std::size_t i = 0; i < g.n_left(); ++i) {
    PageId d = g.left()[i];
    double accesses_d = d == kNoPage ? 0.0 : detail::lookup_count(future_counts, d);
    for (std::size_t r = 0; r < remote.size(); ++r) {
      g.set_cross(i, r, net_benefit(remote_counts[r], accesses_d, params, bandwidth));
    }
  }
  return g;
}

// Kuhn-Munkres with row/column potentials, O(n_left^2 * n_right). Every
// left vertex owns a private self column, so a finite perfect matching on
// the left side always exists.
inline Matching max_weight_matching(const SwapGraph& g) {
  const std::size_t n = g.n_left();
  const std::size_t m = g.n_right();
  Matching out;
  out.right_of_left.assign(n, 0);
  if (n == 0) return out;
  constexpr double inf = std::numeric_limits<double>::infinity();
  auto cost = [&](std::size_t i, std::size_t j) {
    double w = g.weight(i - 1, j - 1);
    return w == SwapGraph::kNoEdge ? inf : -w;
  };
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<std::size_t> row_of_col(m + 1, 0), way(m + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    row_of_col[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(m + 1, inf);
    std::vector<char> used(m + 1, 0);
    do {
      used[j0] = 1;
      std::size_t i0 = row_of_col[j0], j1 = 0;
      double delta = inf;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j]) continue;
        double cur = cost(i0, j) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= m; ++j) {
        if (used[j]) {
          u[row_of_col[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (row_of_col[j0] != 0);
    do {
      std::size_t j1 = way[j0];
      row_of_col[j0] = row_of_col[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  for (std::size_t j = 1; j <= m; ++j) {
    if (row_of_col[j] != 0) out.right_of_left[row_of_col[j] - 1] = j - 1;
  }
  // Zero-weight cross pairs resolve to the self edge.
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t j = out.right_of_left[i];
    if (!g.is_self(i, j) && !(g.weight(i, j) > 0.0)) out.right_of_left[i] = i;
  }
  out.total = matching_weight(g, out.right_of_left);
  return out;
}

// Exact when every cross weight has the form a_p - a_d - c: the i-th
// hottest remote page pairs with the i-th coldest left vertex (free frames
// first) while the pair still gains.
template <typename Counts>
std::vector<SwapPair> sorted_swaps(std::vector<PageId> local, std::vector<PageId> remote,
                                   const Counts& future_counts, const CostParams& params,
                                   double bandwidth, std::size_t free_frames = 0) {
  auto count = [&](PageId p) { return detail::lookup_count(future_counts, p); };
  std::sort(remote.begin(), remote.end(), [&](PageId a, PageId b) {
    double ca = count(a), cb = count(b);
    return ca != cb ? ca > cb : a < b;
  });
  std::sort(local.begin(), local.end(), [&](PageId a, PageId b) {
    double ca = count(a), cb = count(b);
    return ca != cb ? ca < cb : a < b;
  });
  std::vector<SwapPair> out;
  std::size_t n_left = free_frames + local.size();
  for (std::size_t i = 0; i < std::min(n_left, remote.size()); ++i) {
    PageId d = i < free_frames ? kNoPage : local[i - free_frames];
    double w = net_benefit(count(remote[i]), d == kNoPage ? 0.0 : count(d), params, bandwidth);
    if (!(w > 0.0)) break;
    out.push_back({remote[i], d, w});
  }
  return out;
}

inline constexpr std::size_t kBruteForceMaxLeft = 8;

// Exhaustive search over injective left-to-right assignments.
inline Matching brute_force_matching(const SwapGraph& g) {
  const std::size_t n = g.n_left();
  if (n > kBruteForceMaxLeft) {
    throw InvalidArgument("brute_force_matching: instance too large (" + std::to_string(n) +
                          " left vertices, limit " + std::to_string(kBruteForceMaxLeft) + ")");
  }
  std::vector<std::size_t> cur(n, 0), best(n, 0);
  for (std::size_t i = 0; i < n; ++i) best[i] = i;
  std::vector<char> taken(g.n_right(), 0);
  double best_total = matching_weight(g, best);
  auto rec = [&](auto&& self, std::size_t i, double acc) -> void {
    if (i == n) {
      if (acc > best_total) {
        best_total = acc;
        best = cur;
      }
      return;
    }
    for (std::size_t j = 0; j < g.n_right(); ++j) {
      if (taken[j] || !g.has_edge(i, j)) continue;
      taken[j] = 1;
      cur[i] = j;
      self(self, i + 1, acc + g.weight(i, j));
      taken[j] = 0;
    }
  };
  rec(rec, 0, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (!g.is_self(i, best[i]) && !(g.weight(i, best[i]) > 0.0)) best[i] = i;
  }
  Matching out;
  out.right_of_left = best;
  out.total = matching_weight(g, best);
  return out;
}

}  // namespace hmdsim
