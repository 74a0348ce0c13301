#pragma once

#include <cstdio>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "hmdsim/config.hpp"
#include "hmdsim/engine.hpp"

namespace hmdsim {

inline constexpr int kReportVersion = 1;

inline const std::vector<std::string>& report_columns() {
  static const std::vector<std::string> cols{
      "report_version", "tenant", "policy", "local_alloc", "contention", "completion_s",
      "runtime_degradation", "accesses", "local_accesses", "remote_accesses", "faults", "promotions",
      "demotions", "promotion_rate_per_s", "migration_bytes", "remote_access_bytes", "normalized_traffic",
      "peak_local_bytes", "peak_remote_bytes", "local_alloc_bytes"};
  return cols;
}

// Report label; the EWMA baseline names its alpha.
inline std::string policy_label(const PolicyKind& kind) {
  if (auto* e = std::get_if<policy::EwmaThreshold>(&kind)) return "ewma-a" + detail::format_double(e->alpha);
  return policy_name(kind);
}

struct ReportRow {
  std::string policy;
  double local_alloc = 0.0;
  double contention = 0.0;
  TenantResult result;
  double full_local_s = 0.0;
  double full_remote_bytes = 0.0;

  double runtime_degradation() const { return result.completion_seconds() / full_local_s; }
  double promotion_rate() const {
    double t = result.completion_seconds();
    return t > 0.0 ? static_cast<double>(result.promotions) / t : 0.0;
  }
  // Link bytes over those of an all-remote run without migration.
  double normalized_traffic() const {
    return full_remote_bytes > 0.0 ? static_cast<double>(result.link_bytes()) / full_remote_bytes : 0.0;
  }
};

struct RunReport {
  std::string config;                // canonical "section.key=value" lines
  std::vector<std::string> meta;     // extra "#key value" lines
  std::vector<ReportRow> rows;
};

struct Baselines {
  std::vector<double> full_local_s;       // per tenant
  std::vector<double> full_remote_bytes;  // per tenant
};

inline Baselines compute_baselines(const SimConfig& cfg) {
  Baselines b;
  auto local = run(full_local_config(cfg));
  for (std::size_t i = 0; i < cfg.tenants.size(); ++i) {
    b.full_local_s.push_back(local.tenants[i].completion_seconds());
    b.full_remote_bytes.push_back(static_cast<double>(cfg.tenants[i].trace->size()) *
                                  static_cast<double>(cfg.link.cacheline));
  }
  return b;
}

inline std::vector<ReportRow> report_rows(const SimConfig& cfg, const SimResult& result, const Baselines& base) {
  std::vector<ReportRow> rows;
  for (std::size_t i = 0; i < result.tenants.size(); ++i) {
    ReportRow row;
    row.policy = policy_label(cfg.tenants[i].policy);
    row.local_alloc = cfg.tenants[i].local_alloc_fraction;
    row.contention = cfg.background_phi;
    row.result = result.tenants[i];
    row.full_local_s = base.full_local_s.at(i);
    row.full_remote_bytes = base.full_remote_bytes.at(i);
    rows.push_back(std::move(row));
  }
  return rows;
}

inline std::vector<std::string> standard_meta() {
  return {"#note fault handling cost is folded into cost.bookkeeping_ns",
          "#note ewma-a0.9 is a simplified histogram-free stand-in"};
}

inline void write_csv(const RunReport& rep, std::ostream& os) {
  os << "# hmdsim-report v" << kReportVersion << "\n";
  std::istringstream cfg(rep.config);
  for (std::string line; std::getline(cfg, line);) {
    if (!line.empty()) os << "#config " << line << "\n";
  }
  for (const auto& m : rep.meta) os << m << "\n";
  const auto& cols = report_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i];
  os << "\n";
  using detail::format_double;
  for (const auto& r : rep.rows) {
    const auto& t = r.result;
    os << kReportVersion << "," << t.name << "," << r.policy << "," << format_double(r.local_alloc) << ","
       << format_double(r.contention) << "," << format_double(t.completion_seconds()) << ","
       << format_double(r.runtime_degradation()) << "," << t.accesses << "," << t.local_accesses << ","
       << t.remote_accesses << "," << t.faults << "," << t.promotions << "," << t.demotions << ","
       << format_double(r.promotion_rate()) << "," << t.migration_bytes << "," << t.remote_access_bytes << ","
       << format_double(r.normalized_traffic()) << "," << t.peak_local << "," << t.peak_remote << ","
       << t.local_alloc << "\n";
  }
}

inline void write_table(const RunReport& rep, std::ostream& os) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-10s %-10s %6s %5s %12s %8s %10s %10s %10s\n", "tenant", "policy", "alloc",
                "phi", "completion_s", "degrad", "promotions", "prom/s", "traffic");
  os << buf;
  for (const auto& r : rep.rows) {
    std::snprintf(buf, sizeof buf, "%-10s %-10s %6.2f %5.2f %12.6f %8.4f %10llu %10.1f %10.4f\n",
                  r.result.name.c_str(), r.policy.c_str(), r.local_alloc, r.contention,
                  r.result.completion_seconds(), r.runtime_degradation(),
                  static_cast<unsigned long long>(r.result.promotions), r.promotion_rate(), r.normalized_traffic());
    os << buf;
  }
}

}  // namespace hmdsim
