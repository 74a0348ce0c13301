#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "hmdsim/bandit.hpp"
#include "hmdsim/engine.hpp"
#include "hmdsim/error.hpp"
#include "hmdsim/training.hpp"
#include "hmdsim/workload.hpp"

namespace hmdsim {

struct KeySpec {
  std::string section;
  std::string key;
  std::string default_value;
  std::string doc;
};

// Keys of a [tenant.N] section; the others are fixed sections.
inline const std::vector<KeySpec>& tenant_keys() {
  static const std::vector<KeySpec> keys{
      {"tenant", "name", "", "tenant label (default tenantN)"},
      {"tenant", "trace", "", "trace file; empty means generate from the keys below"},
      {"tenant", "generator", "shifting", "stationary | shifting | zipf"},
      {"tenant", "n_pages", "2000", "pages in the working set"},
      {"tenant", "window_pages", "200", "shifting: window width in pages"},
      {"tenant", "shift_every", "800", "shifting: accesses per phase"},
      {"tenant", "hot_fraction", "0.1", "stationary: hot set share of pages"},
      {"tenant", "hot_prob", "0.9", "stationary: probability an access hits the hot set"},
      {"tenant", "zipf_s", "1.1", "zipf: exponent"},
      {"tenant", "length", "200000", "accesses to generate"},
      {"tenant", "compute_ns", "100", "compute time between accesses"},
      {"tenant", "seed", "", "generator seed (default engine.seed)"},
      {"tenant", "local_alloc", "0.1", "local memory as a fraction of the working set"},
      {"tenant", "policy", "", "policy kind (default policy.kind)"},
  };
  return keys;
}

inline const std::vector<KeySpec>& key_specs() {
  static const std::vector<KeySpec> keys{
      {"telemetry", "marking_interval_s", "1", "page-table poisoning period"},
      {"telemetry", "delta1", "0.2", "rate closeness bound for coalescing"},
      {"telemetry", "closeness", "relative", "relative | absolute comparison of rates"},
      {"telemetry", "delta2_s", "", "mark-time gap bound for coalescing (default two marking intervals)"},
      {"telemetry", "ewma_alpha", "0.5", "weight of the newest sample in the EWMA estimator"},
      {"link", "capacity_bytes_per_s", "12500000000", "link capacity"},
      {"link", "local_latency_ns", "100", "local access latency"},
      {"link", "remote_latency_ns", "900", "remote access base latency"},
      {"link", "cacheline_bytes", "64", "bytes moved per remote access"},
      {"link", "contention", "0", "background traffic fraction of capacity, in [0, 1)"},
      {"link", "schedule", "", "piecewise contention steps as time_s:phi, comma separated"},
      {"link", "window_s", "", "traffic-rate window for multi-tenant contention (default marking interval)"},
      {"cost", "page_size", "4096", "page size in bytes"},
      {"cost", "bookkeeping_ns", "1000", "fixed cost charged per promotion"},
      {"memory", "local_alloc", "0.1", "local memory as a fraction of the working set"},
      {"memory", "slack_bytes", "10485760", "HIGH minus LOW watermark"},
      {"memory", "placement", "all_remote", "all_remote | fill_local"},
      {"memory", "recency_bucket_s", "", "LRU bucket width for demotion (default marking interval)"},
      {"policy", "kind", "none", "none | static | ewma | adaptive | bandit | oracle"},
      {"policy", "rate_cutoff", "0", "static and ewma: accesses per second"},
      {"policy", "alpha", "0.5", "ewma: smoothing weight"},
      {"policy", "threshold_bytes", "", "adaptive: promotion threshold (default page size)"},
      {"policy", "theta_burst", "0", "bandit: burst duration threshold in epochs"},
      {"policy", "theta_rate", "0", "bandit: access rate threshold, accesses per second"},
      {"policy", "burst_gate", "true", "bandit: apply the burst duration test"},
      {"oracle", "lookahead_s", "auto", "planning horizon; auto tries several and keeps the best"},
      {"oracle", "interval_s", "", "planning cadence (default marking interval)"},
      {"oracle", "solver", "auto", "auto | hungarian | sorted"},
      {"oracle", "hungarian_max_left", "64", "auto solver: largest graph handed to the Hungarian solver"},
      {"bandit", "hidden", "64,64", "hidden layer widths"},
      {"bandit", "learning_rate", "0.0005", "optimizer step size"},
      {"bandit", "batch", "32", "minibatch size"},
      {"bandit", "exploration_fraction", "0.1", "share of each allocation's episodes spent decaying epsilon"},
      {"bandit", "final_epsilon", "0.05", "epsilon after the decay"},
      {"bandit", "replay", "10000", "replay buffer capacity"},
      {"bandit", "seed", "7", "agent initialization and sampling seed"},
      {"bandit", "max_train", "2000", "episodes per allocation"},
      {"bandit", "allocations", "0.9,0.8,0.7,0.6,0.5,0.4,0.3,0.2,0.1", "training curriculum"},
      {"bandit", "use_local_alloc", "true", "feed the allocation feature to the agent"},
      {"bandit", "use_network_traffic", "true", "feed the traffic feature to the agent"},
      {"engine", "seed", "1", "workload generation seed"},
      {"engine", "workers", "0", "sweep worker threads (0: hardware concurrency)"},
      {"workload", "name", "app", "tenant label"},
      {"workload", "trace", "", "trace file; empty means generate from the keys below"},
      {"workload", "generator", "shifting", "stationary | shifting | zipf"},
      {"workload", "n_pages", "2000", "pages in the working set"},
      {"workload", "window_pages", "200", "shifting: window width in pages"},
      {"workload", "shift_every", "800", "shifting: accesses per phase"},
      {"workload", "hot_fraction", "0.1", "stationary: hot set share of pages"},
      {"workload", "hot_prob", "0.9", "stationary: probability an access hits the hot set"},
      {"workload", "zipf_s", "1.1", "zipf: exponent"},
      {"workload", "length", "200000", "accesses to generate"},
      {"workload", "compute_ns", "100", "compute time between accesses"},
  };
  return keys;
}

// Markdown reference of every key, generated from the table above.
inline std::string key_reference() {
  auto cell = [](std::string s) {
    for (std::size_t i = 0; (i = s.find('|', i)) != std::string::npos; i += 2) s.insert(i, "\\");
    return s;
  };
  std::ostringstream os;
  os << "| key | default | meaning |\n|---|---|---|\n";
  for (const auto& k : key_specs()) {
    os << "| `" << k.section << "." << k.key << "` | `" << k.default_value << "` | " << cell(k.doc) << " |\n";
  }
  for (const auto& k : tenant_keys()) {
    os << "| `tenant.N." << k.key << "` | `" << k.default_value << "` | " << cell(k.doc) << " |\n";
  }
  return os.str();
}

namespace detail {

inline std::string trim(std::string s) {
  auto ws = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; };
  while (!s.empty() && ws(s.back())) s.pop_back();
  std::size_t i = 0;
  while (i < s.size() && ws(s[i])) ++i;
  return s.substr(i);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  if (trim(s).empty()) return out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) out.push_back(trim(cur));
  return out;
}

inline double parse_number(const std::string& v, const std::string& what) {
  double out = 0.0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc() || ptr != v.data() + v.size()) {
    throw InvalidArgument("config: " + what + ": expected a number, got '" + v + "'");
  }
  return out;
}

inline bool is_tenant_section(const std::string& section) {
  if (section.rfind("tenant.", 0) != 0 || section.size() == 7) return false;
  return std::all_of(section.begin() + 7, section.end(), [](char c) { return c >= '0' && c <= '9'; });
}

// tenant.2 sorts before tenant.10.
struct TenantOrder {
  bool operator()(const std::string& a, const std::string& b) const {
    return a.size() != b.size() ? a.size() < b.size() : a < b;
  }
};

}  // namespace detail

// Flat section.key -> value store over a fixed key table.
class ConfigFile {
 public:
  static ConfigFile parse(std::istream& is, const std::string& origin = "<config>") {
    ConfigFile cfg;
    std::string line, section;
    std::size_t lineno = 0;
    bool report = false;
    while (std::getline(is, line)) {
      ++lineno;
      auto where = origin + ":" + std::to_string(lineno) + ": ";
      if (lineno == 1 && line.rfind("# hmdsim-report", 0) == 0) report = true;
      // Report files carry their config as "#config section.key=value".
      if (line.rfind("#config ", 0) == 0) {
        auto body = line.substr(8);
        auto eq = body.find('=');
        if (eq == std::string::npos) throw FormatError(where + "expected key=value");
        cfg.set_checked(detail::trim(body.substr(0, eq)), detail::trim(body.substr(eq + 1)), where);
        continue;
      }
      if (report) continue;
      auto t = detail::trim(line);
      if (t.empty() || t[0] == '#' || t[0] == ';') continue;
      if (t.front() == '[') {
        if (t.back() != ']') throw FormatError(where + "unterminated section header");
        section = detail::trim(t.substr(1, t.size() - 2));
        if (!known_section(section)) throw FormatError(where + "unknown section [" + section + "]");
        if (detail::is_tenant_section(section)) cfg.tenants_.insert(section);
        continue;
      }
      auto eq = t.find('=');
      if (eq == std::string::npos) throw FormatError(where + "expected key = value");
      if (section.empty()) throw FormatError(where + "key outside of any section");
      cfg.set_checked(section + "." + detail::trim(t.substr(0, eq)), detail::trim(t.substr(eq + 1)), where);
    }
    return cfg;
  }

  static ConfigFile load(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw Error("cannot open config file: " + path);
    return parse(is, path);
  }

  static ConfigFile from_string(const std::string& text, const std::string& origin = "<config>") {
    std::istringstream is(text);
    return parse(is, origin);
  }

  // dotted = section.key; tenant keys are tenant.N.key.
  void set(const std::string& dotted, const std::string& value) { set_checked(dotted, value, "config: "); }

  bool has(const std::string& dotted) const { return values_.count(dotted) != 0; }

  std::string get(const std::string& dotted) const {
    auto it = values_.find(dotted);
    if (it != values_.end()) return it->second;
    const KeySpec* spec = find_spec(dotted);
    if (!spec) throw InvalidArgument("config: unknown key '" + dotted + "'");
    return spec->default_value;
  }

  double get_double(const std::string& dotted) const { return detail::parse_number(get(dotted), dotted); }

  std::optional<double> get_optional_double(const std::string& dotted) const {
    if (get(dotted).empty()) return std::nullopt;
    return get_double(dotted);
  }

  std::uint64_t get_u64(const std::string& dotted) const {
    auto v = get(dotted);
    std::uint64_t out = 0;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (v.empty() || ec != std::errc() || ptr != v.data() + v.size()) {
      throw InvalidArgument("config: " + dotted + ": expected a non-negative integer, got '" + v + "'");
    }
    return out;
  }

  bool get_bool(const std::string& dotted) const {
    auto v = get(dotted);
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw InvalidArgument("config: " + dotted + ": expected a boolean, got '" + v + "'");
  }

  std::vector<double> get_list(const std::string& dotted) const {
    std::vector<double> out;
    for (const auto& item : detail::split(get(dotted), ',')) out.push_back(detail::parse_number(item, dotted));
    return out;
  }

  const std::set<std::string, detail::TenantOrder>& tenant_sections() const { return tenants_; }

  // Every key with its effective value, one "section.key=value" per line,
  // fixed sections in table order then tenant sections.
  std::string canonical() const {
    std::ostringstream os;
    for (const auto& k : key_specs()) {
      auto dotted = k.section + "." + k.key;
      os << dotted << "=" << get(dotted) << "\n";
    }
    for (const auto& t : tenants_) {
      for (const auto& k : tenant_keys()) {
        auto dotted = t + "." + k.key;
        os << dotted << "=" << get(dotted) << "\n";
      }
    }
    return os.str();
  }

 private:
  static bool known_section(const std::string& s) {
    if (detail::is_tenant_section(s)) return true;
    return std::any_of(key_specs().begin(), key_specs().end(), [&](const KeySpec& k) { return k.section == s; });
  }

  static const KeySpec* find_spec(const std::string& dotted) {
    auto dot = dotted.rfind('.');
    if (dot == std::string::npos) return nullptr;
    auto section = dotted.substr(0, dot), key = dotted.substr(dot + 1);
    if (detail::is_tenant_section(section)) {
      for (const auto& k : tenant_keys()) {
        if (k.key == key) return &k;
      }
      return nullptr;
    }
    for (const auto& k : key_specs()) {
      if (k.section == section && k.key == key) return &k;
    }
    return nullptr;
  }

  void set_checked(const std::string& dotted, const std::string& value, const std::string& where) {
    if (!find_spec(dotted)) throw InvalidArgument(where + "unknown key '" + dotted + "'");
    auto section = dotted.substr(0, dotted.rfind('.'));
    if (detail::is_tenant_section(section)) tenants_.insert(section);
    values_[dotted] = value;
  }

  std::map<std::string, std::string> values_;
  std::set<std::string, detail::TenantOrder> tenants_;
};

// Default config path from the environment, if any.
inline std::optional<std::string> env_config_path() {
  const char* p = std::getenv("HMDSIM_CONFIG");
  if (!p || !*p) return std::nullopt;
  return std::string(p);
}

inline PolicyKind parse_policy(const std::string& kind, const ConfigFile& c) {
  if (kind == "none") return policy::NoMigration{};
  if (kind == "static") return policy::StaticThreshold{c.get_double("policy.rate_cutoff")};
  if (kind == "ewma") return policy::EwmaThreshold{c.get_double("policy.alpha"), c.get_double("policy.rate_cutoff")};
  if (kind == "adaptive") return policy::NetworkAdaptive{c.get_optional_double("policy.threshold_bytes")};
  if (kind == "bandit") {
    return policy::Bandit{static_cast<std::uint32_t>(c.get_u64("policy.theta_burst")),
                          c.get_double("policy.theta_rate"), c.get_bool("policy.burst_gate")};
  }
  if (kind == "oracle") return policy::Oracle{};
  throw InvalidArgument("config: unknown policy kind '" + kind + "'");
}

inline void check_policy(const PolicyKind& kind) {
  std::visit(
      [](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, policy::StaticThreshold>) {
          if (!(p.rate_cutoff >= 0.0)) throw InvalidArgument("config: rate_cutoff must be non-negative");
        } else if constexpr (std::is_same_v<T, policy::EwmaThreshold>) {
          if (!(p.rate_cutoff >= 0.0)) throw InvalidArgument("config: rate_cutoff must be non-negative");
          if (!(p.alpha > 0.0 && p.alpha <= 1.0)) throw InvalidArgument("config: alpha must be in (0, 1]");
        } else if constexpr (std::is_same_v<T, policy::NetworkAdaptive>) {
          if (p.threshold && !(*p.threshold >= 0.0)) {
            throw InvalidArgument("config: threshold_bytes must be non-negative");
          }
        } else if constexpr (std::is_same_v<T, policy::Bandit>) {
          if (!(p.theta_rate >= 0.0)) throw InvalidArgument("config: theta_rate must be non-negative");
        }
      },
      kind);
}

// Trace for a workload-like section (workload or tenant.N).
inline std::shared_ptr<const Trace> make_trace(const ConfigFile& c, const std::string& section,
                                               std::uint64_t default_seed) {
  auto path = c.get(section + ".trace");
  if (!path.empty()) return std::make_shared<const Trace>(load_trace(path));
  std::uint64_t seed = default_seed;
  if (section != "workload" && !c.get(section + ".seed").empty()) seed = c.get_u64(section + ".seed");
  auto gen = c.get(section + ".generator");
  auto n = c.get_u64(section + ".n_pages");
  auto len = c.get_u64(section + ".length");
  double compute = c.get_double(section + ".compute_ns");
  if (gen == "stationary") {
    return std::make_shared<const Trace>(gen_stationary(n, c.get_double(section + ".hot_fraction"),
                                                        c.get_double(section + ".hot_prob"), len, seed, compute));
  }
  if (gen == "shifting") {
    return std::make_shared<const Trace>(gen_shifting(n, c.get_u64(section + ".window_pages"),
                                                      c.get_u64(section + ".shift_every"), len, seed, compute));
  }
  if (gen == "zipf") {
    return std::make_shared<const Trace>(gen_zipf(n, c.get_double(section + ".zipf_s"), len, seed, compute));
  }
  throw InvalidArgument("config: " + section + ".generator: unknown generator '" + gen + "'");
}

// Everything a command needs, resolved from one ConfigFile.
struct Setup {
  ConfigFile source;
  SimConfig sim;
  AgentConfig agent;
  CurriculumOptions curriculum;
  std::size_t max_train = 2000;
  std::size_t workers = 0;
  bool oracle_auto = true;
};

inline Setup build_setup(const ConfigFile& c) {
  Setup s;
  s.source = c;
  auto& sim = s.sim;
  sim.telemetry.marking_interval = SimTime::from_seconds(c.get_double("telemetry.marking_interval_s"));
  sim.telemetry.delta1 = c.get_double("telemetry.delta1");
  auto closeness = c.get("telemetry.closeness");
  if (closeness == "relative") sim.telemetry.closeness = Closeness::Relative;
  else if (closeness == "absolute") sim.telemetry.closeness = Closeness::Absolute;
  else throw InvalidArgument("config: telemetry.closeness: expected relative or absolute");
  if (auto d2 = c.get_optional_double("telemetry.delta2_s")) sim.telemetry.delta2 = SimTime::from_seconds(*d2);
  sim.telemetry.ewma_alpha = c.get_double("telemetry.ewma_alpha");

  sim.link.capacity = c.get_double("link.capacity_bytes_per_s");
  sim.link.local_latency_ns = c.get_double("link.local_latency_ns");
  sim.link.remote_base_latency_ns = c.get_double("link.remote_latency_ns");
  sim.link.cacheline = c.get_u64("link.cacheline_bytes");
  sim.background_phi = c.get_double("link.contention");
  for (const auto& step : detail::split(c.get("link.schedule"), ',')) {
    auto colon = step.find(':');
    if (colon == std::string::npos) throw InvalidArgument("config: link.schedule: expected time_s:phi, got '" + step + "'");
    sim.schedule.push_back({SimTime::from_seconds(detail::parse_number(step.substr(0, colon), "link.schedule")),
                            detail::parse_number(step.substr(colon + 1), "link.schedule")});
  }
  if (auto w = c.get_optional_double("link.window_s")) sim.contention_window = SimTime::from_seconds(*w);

  sim.page_size = c.get_u64("cost.page_size");
  sim.bookkeeping_ns = c.get_double("cost.bookkeeping_ns");
  sim.slack = c.get_u64("memory.slack_bytes");
  auto placement = c.get("memory.placement");
  if (placement == "all_remote") sim.placement = Placement::AllRemote;
  else if (placement == "fill_local") sim.placement = Placement::FillLocalThenRemote;
  else throw InvalidArgument("config: memory.placement: expected all_remote or fill_local");
  if (auto b = c.get_optional_double("memory.recency_bucket_s")) sim.recency_bucket = SimTime::from_seconds(*b);

  auto look = c.get("oracle.lookahead_s");
  s.oracle_auto = look == "auto";
  if (!s.oracle_auto) sim.oracle.lookahead = SimTime::from_seconds(c.get_double("oracle.lookahead_s"));
  if (auto i = c.get_optional_double("oracle.interval_s")) sim.oracle.interval = SimTime::from_seconds(*i);
  auto solver = c.get("oracle.solver");
  if (solver == "auto") sim.oracle.solver = OracleSolver::Auto;
  else if (solver == "hungarian") sim.oracle.solver = OracleSolver::Hungarian;
  else if (solver == "sorted") sim.oracle.solver = OracleSolver::Sorted;
  else throw InvalidArgument("config: oracle.solver: expected auto, hungarian or sorted");
  sim.oracle.hungarian_max_left = c.get_u64("oracle.hungarian_max_left");

  sim.seed = c.get_u64("engine.seed");
  s.workers = c.get_u64("engine.workers");

  auto default_kind = c.get("policy.kind");
  if (c.tenant_sections().empty()) {
    TenantSpec t;
    t.name = c.get("workload.name");
    t.trace = make_trace(c, "workload", sim.seed);
    t.policy = parse_policy(default_kind, c);
    t.local_alloc_fraction = c.get_double("memory.local_alloc");
    sim.tenants.push_back(std::move(t));
  } else {
    for (const auto& sec : c.tenant_sections()) {
      TenantSpec t;
      t.name = c.get(sec + ".name").empty() ? "tenant" + sec.substr(7) : c.get(sec + ".name");
      t.trace = make_trace(c, sec, sim.seed);
      auto kind = c.get(sec + ".policy");
      t.policy = parse_policy(kind.empty() ? default_kind : kind, c);
      t.local_alloc_fraction = c.get_double(sec + ".local_alloc");
      sim.tenants.push_back(std::move(t));
    }
  }
  for (const auto& t : sim.tenants) check_policy(t.policy);

  s.agent.hidden.clear();
  for (double h : c.get_list("bandit.hidden")) {
    if (!(h >= 1.0) || h != static_cast<double>(static_cast<std::size_t>(h))) {
      throw InvalidArgument("config: bandit.hidden: widths must be positive integers");
    }
    s.agent.hidden.push_back(static_cast<std::size_t>(h));
  }
  s.agent.learning_rate = c.get_double("bandit.learning_rate");
  s.agent.batch_size = c.get_u64("bandit.batch");
  s.agent.exploration_fraction = c.get_double("bandit.exploration_fraction");
  s.agent.final_epsilon = c.get_double("bandit.final_epsilon");
  s.agent.replay_capacity = c.get_u64("bandit.replay");
  s.agent.seed = c.get_u64("bandit.seed");
  if (s.agent.batch_size == 0 || s.agent.replay_capacity == 0) {
    throw InvalidArgument("config: bandit batch and replay sizes must be positive");
  }
  if (!(s.agent.learning_rate > 0.0)) throw InvalidArgument("config: bandit.learning_rate must be positive");
  if (!(s.agent.final_epsilon >= 0.0 && s.agent.final_epsilon <= 1.0)) {
    throw InvalidArgument("config: bandit.final_epsilon must be in [0, 1]");
  }
  s.max_train = c.get_u64("bandit.max_train");
  s.curriculum.allocations = c.get_list("bandit.allocations");
  if (s.curriculum.allocations.empty()) throw InvalidArgument("config: bandit.allocations is empty");
  s.curriculum.mask.local_alloc = c.get_bool("bandit.use_local_alloc");
  s.curriculum.mask.network_traffic = c.get_bool("bandit.use_network_traffic");
  s.curriculum.burst_gate = c.get_bool("policy.burst_gate");

  sim.validate();
  return s;
}

}  // namespace hmdsim
