#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "hmdsim/error.hpp"
#include "hmdsim/units.hpp"

namespace hmdsim {

struct TraceMeta {
  std::uint64_t n_pages = 0;
  std::uint64_t seed = 0;
  std::string generator;
  std::string params;
  double compute_ns_per_access = 100.0;

  friend bool operator==(const TraceMeta&, const TraceMeta&) = default;
};

struct Trace {
  TraceMeta meta;
  std::vector<PageId> accesses;

  std::size_t size() const { return accesses.size(); }
  bool empty() const { return accesses.empty(); }

  friend bool operator==(const Trace&, const Trace&) = default;
};

namespace detail {

inline std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

inline void check_sizes(std::uint64_t n_pages, const char* who) {
  if (n_pages == 0) throw InvalidArgument(std::string(who) + ": n_pages must be positive");
  if (n_pages >= kNoPage) throw InvalidArgument(std::string(who) + ": n_pages too large");
}

}  // namespace detail

inline Trace gen_stationary(std::uint64_t n_pages, double hot_fraction, double hot_prob,
                            std::uint64_t length, std::uint64_t seed,
                            double compute_ns_per_access = 100.0) {
  detail::check_sizes(n_pages, "gen_stationary");
  if (!(hot_fraction > 0.0 && hot_fraction < 1.0)) {
    throw InvalidArgument("gen_stationary: hot_fraction must be in (0, 1)");
  }
  if (!(hot_prob >= 0.0 && hot_prob <= 1.0)) {
    throw InvalidArgument("gen_stationary: hot_prob must be in [0, 1]");
  }
  auto hot = static_cast<std::uint64_t>(std::llround(hot_fraction * static_cast<double>(n_pages)));
  if (hot == 0 || hot >= n_pages) {
    throw InvalidArgument("gen_stationary: hot set must hold at least one page and leave one cold page");
  }
  Trace t;
  t.meta = {n_pages, seed, "stationary",
            "hot_fraction=" + detail::format_double(hot_fraction) +
                ",hot_prob=" + detail::format_double(hot_prob) + ",length=" + std::to_string(length),
            compute_ns_per_access};
  t.accesses.reserve(length);
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution pick_hot(hot_prob);
  std::uniform_int_distribution<std::uint64_t> in_hot(0, hot - 1);
  std::uniform_int_distribution<std::uint64_t> in_cold(hot, n_pages - 1);
  for (std::uint64_t i = 0; i < length; ++i) {
    t.accesses.push_back(static_cast<PageId>(pick_hot(rng) ? in_hot(rng) : in_cold(rng)));
  }
  return t;
}

// Uniform accesses inside a contiguous window that jumps by its own width
// every shift_every accesses, wrapping around the page space.
inline Trace gen_shifting(std::uint64_t n_pages, std::uint64_t window_pages,
                          std::uint64_t shift_every, std::uint64_t length, std::uint64_t seed,
                          double compute_ns_per_access = 100.0) {
  detail::check_sizes(n_pages, "gen_shifting");
  if (window_pages == 0 || window_pages > n_pages) {
    throw InvalidArgument("gen_shifting: window_pages must be in [1, n_pages]");
  }
  if (shift_every == 0) throw InvalidArgument("gen_shifting: shift_every must be positive");
  Trace t;
  t.meta = {n_pages, seed, "shifting",
            "window_pages=" + std::to_string(window_pages) +
                ",shift_every=" + std::to_string(shift_every) + ",length=" + std::to_string(length),
            compute_ns_per_access};
  t.accesses.reserve(length);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::uint64_t> offset(0, window_pages - 1);
  std::uint64_t start = 0;
  for (std::uint64_t i = 0; i < length; ++i) {
    if (i > 0 && i % shift_every == 0) start = (start + window_pages) % n_pages;
    t.accesses.push_back(static_cast<PageId>((start + offset(rng)) % n_pages));
  }
  return t;
}

// Rank r (1-based) maps to page r - 1.
inline Trace gen_zipf(std::uint64_t n_pages, double s, std::uint64_t length, std::uint64_t seed,
                      double compute_ns_per_access = 100.0) {
  detail::check_sizes(n_pages, "gen_zipf");
  if (!(s >= 0.0)) throw InvalidArgument("gen_zipf: exponent must be non-negative");
  Trace t;
  t.meta = {n_pages, seed, "zipf",
            "s=" + detail::format_double(s) + ",length=" + std::to_string(length),
            compute_ns_per_access};
  t.accesses.reserve(length);
  std::vector<double> cdf(n_pages);
  double acc = 0.0;
  for (std::uint64_t r = 0; r < n_pages; ++r) {
    acc += 1.0 / std::pow(static_cast<double>(r + 1), s);
    cdf[r] = acc;
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, acc);
  for (std::uint64_t i = 0; i < length; ++i) {
    auto it = std::upper_bound(cdf.begin(), cdf.end(), u(rng));
    auto idx = std::min<std::uint64_t>(static_cast<std::uint64_t>(it - cdf.begin()), n_pages - 1);
    t.accesses.push_back(static_cast<PageId>(idx));
  }
  return t;
}

inline void write_trace(const Trace& trace, std::ostream& os) {
  os << "#n_pages=" << trace.meta.n_pages << '\n'
     << "#seed=" << trace.meta.seed << '\n'
     << "#generator=" << trace.meta.generator << '\n'
     << "#params=" << trace.meta.params << '\n'
     << "#compute_ns_per_access=" << detail::format_double(trace.meta.compute_ns_per_access)
     << '\n';
  std::string buf;
  buf.reserve(trace.accesses.size() * 6);
  char num[16];
  for (PageId id : trace.accesses) {
    auto [end, ec] = std::to_chars(num, num + sizeof(num), id);
    buf.append(num, end);
    buf.push_back('\n');
  }
  os << buf;
}

inline Trace read_trace(std::istream& is, const std::string& origin = "<stream>") {
  Trace t;
  std::map<std::string, std::string> header;
  std::string line;
  std::size_t lineno = 0;
  bool in_body = false;
  auto fail = [&](const std::string& what) {
    throw FormatError(origin + ":" + std::to_string(lineno) + ": " + what);
  };
  auto parse_u64 = [&](std::string_view sv, std::uint64_t& out) {
    auto [ptr, ec] = std::from_chars(sv.data(), sv.data() + sv.size(), out);
    return ec == std::errc() && ptr == sv.data() + sv.size();
  };
  auto finish_header = [&] {
    for (const char* key : {"n_pages", "seed", "generator", "params", "compute_ns_per_access"}) {
      if (!header.count(key)) fail(std::string("missing header key '") + key + "'");
    }
    if (!parse_u64(header["n_pages"], t.meta.n_pages)) fail("bad n_pages");
    if (!parse_u64(header["seed"], t.meta.seed)) fail("bad seed");
    t.meta.generator = header["generator"];
    t.meta.params = header["params"];
    const auto& c = header["compute_ns_per_access"];
    auto [ptr, ec] = std::from_chars(c.data(), c.data() + c.size(), t.meta.compute_ns_per_access);
    if (ec != std::errc() || ptr != c.data() + c.size()) fail("bad compute_ns_per_access");
  };
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!in_body && !line.empty() && line[0] == '#') {
      auto eq = line.find('=');
      if (eq == std::string::npos) fail("header line without '='");
      header[line.substr(1, eq - 1)] = line.substr(eq + 1);
      continue;
    }
    if (!in_body) {
      in_body = true;
      finish_header();
    }
    std::uint64_t id = 0;
    if (!parse_u64(line, id)) fail("malformed page id '" + line + "'");
    if (id >= t.meta.n_pages) {
      fail("page id " + std::to_string(id) + " out of range (n_pages=" +
           std::to_string(t.meta.n_pages) + ")");
    }
    t.accesses.push_back(static_cast<PageId>(id));
  }
  if (!in_body) finish_header();  // header-only file: an empty trace
  return t;
}

inline void save_trace(const Trace& trace, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open trace file for writing: " + path);
  write_trace(trace, os);
  if (!os) throw Error("failed writing trace file: " + path);
}

inline Trace load_trace(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open trace file: " + path);
  return read_trace(is, path);
}

}  // namespace hmdsim
