#pragma once

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "hmdsim/bandit.hpp"
#include "hmdsim/config.hpp"
#include "hmdsim/engine.hpp"
#include "hmdsim/report.hpp"
#include "hmdsim/training.hpp"

namespace hmdsim {

struct Simulated {
  SimResult result;
  std::optional<OracleBound> oracle;  // set when the auto horizon search ran
};

// One run; oracle tenants with an automatic horizon go through oracle_bound.
inline Simulated simulate(const Setup& s, SimConfig cfg) {
  bool oracle = std::any_of(cfg.tenants.begin(), cfg.tenants.end(),
                            [](const TenantSpec& t) { return std::holds_alternative<policy::Oracle>(t.policy); });
  if (oracle && s.oracle_auto) {
    auto b = oracle_bound(cfg);
    Simulated out{b.result, b};
    return out;
  }
  return {run(cfg), std::nullopt};
}

inline std::vector<std::string> oracle_meta(const Simulated& sim) {
  if (!sim.oracle) return {};
  return {"#oracle lookahead_s=" + detail::format_double(sim.oracle->lookahead.seconds()) +
          " interval_s=" + detail::format_double(sim.oracle->interval.seconds())};
}

inline void write_plan(const std::vector<SwapEvent>& plan, std::ostream& os) {
  os << "# hmdsim-plan v1\nat_ps,promote,demote,benefit\n";
  for (const auto& e : plan) {
    os << e.at.ps() << "," << e.promote << ",";
    if (e.demote == kNoPage) os << "free";
    else os << e.demote;
    os << "," << detail::format_double(e.benefit) << "\n";
  }
}

namespace detail {

inline void open_out(std::ofstream& f, const std::string& path) {
  f.open(path, std::ios::binary);
  if (!f) throw Error("cannot open output file: " + path);
}

}  // namespace detail

// Entry point of the hmdsim tool. Returns the process exit status.
inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"hmdsim: page migration simulator for disaggregated memory"};
  app.require_subcommand(1);

  std::string config_path, trace_path, out_path, agent_path, policy_kind;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed, max_train;
  std::optional<double> local_alloc, contention;
  bool csv = false;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "config file (default: $HMDSIM_CONFIG)");
    sub->add_option("--set", sets, "override, section.key=value (repeatable)");
    sub->add_option("--seed", seed, "workload seed");
    sub->add_option("--policy", policy_kind, "none | static | ewma | adaptive | bandit | oracle");
    sub->add_option("--local-alloc", local_alloc, "local memory fraction of the working set");
    sub->add_option("--contention", contention, "background link fraction in [0, 1)");
    sub->add_option("--trace", trace_path, "trace file");
    sub->add_option("--out", out_path, "output path");
    sub->add_flag("--csv", csv, "print report rows instead of the table");
  };

  auto* gen = app.add_subcommand("generate", "write a synthetic trace");
  common(gen);
  auto* run_cmd = app.add_subcommand("run", "simulate one configuration");
  common(run_cmd);
  auto* sweep_cmd = app.add_subcommand("sweep", "allocation x contention grid");
  common(sweep_cmd);
  std::vector<double> allocations{0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3, 0.2, 0.1}, contentions{0.0};
  sweep_cmd->add_option("--allocations", allocations, "local fractions")->delimiter(',');
  sweep_cmd->add_option("--contentions", contentions, "background fractions")->delimiter(',');
  auto* train_cmd = app.add_subcommand("train", "train the bandit agent over the allocation curriculum");
  common(train_cmd);
  train_cmd->add_option("--agent", agent_path, "agent weight file to write")->required();
  train_cmd->add_option("--max-train", max_train, "episodes per allocation");
  auto* eval_cmd = app.add_subcommand("eval", "run a trained agent on a workload");
  common(eval_cmd);
  eval_cmd->add_option("--agent", agent_path, "agent weight file")->required();
  auto* oracle_cmd = app.add_subcommand("oracle", "clairvoyant matching bound");
  common(oracle_cmd);
  std::string plan_path;
  oracle_cmd->add_option("--plan", plan_path, "write the swap plan here");
  auto* ablate_cmd = app.add_subcommand("ablate", "disable agent components one at a time");
  common(ablate_cmd);
  ablate_cmd->add_option("--agent", agent_path, "evaluate this agent instead of training one per variant");
  ablate_cmd->add_option("--max-train", max_train, "episodes per allocation when training");
  auto* keys_cmd = app.add_subcommand("keys", "print the config key reference");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (keys_cmd->parsed()) {
      out << key_reference();
      return 0;
    }

    ConfigFile cfg;
    if (config_path.empty()) {
      if (auto env = env_config_path()) config_path = *env;
    }
    if (!config_path.empty()) cfg = ConfigFile::load(config_path);
    for (const auto& kv : sets) {
      auto eq = kv.find('=');
      if (eq == std::string::npos) throw InvalidArgument("--set expects section.key=value, got '" + kv + "'");
      cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (seed) cfg.set("engine.seed", std::to_string(*seed));
    if (!policy_kind.empty()) cfg.set("policy.kind", policy_kind);
    if (contention) cfg.set("link.contention", detail::format_double(*contention));
    if (!trace_path.empty()) cfg.set("workload.trace", trace_path);
    if (max_train) cfg.set("bandit.max_train", std::to_string(*max_train));
    if (local_alloc) {
      cfg.set("memory.local_alloc", detail::format_double(*local_alloc));
      for (const auto& t : cfg.tenant_sections()) cfg.set(t + ".local_alloc", detail::format_double(*local_alloc));
    }
    if (oracle_cmd->parsed()) cfg.set("policy.kind", "oracle");

    if (gen->parsed()) {
      if (out_path.empty()) throw InvalidArgument("generate: --out is required");
      cfg.set("workload.trace", "");
      auto trace = make_trace(cfg, "workload", cfg.get_u64("engine.seed"));
      save_trace(*trace, out_path);
      out << "wrote " << trace->size() << " accesses over " << trace->meta.n_pages << " pages to " << out_path << "\n";
      return 0;
    }

    Setup setup = build_setup(cfg);
    RunReport report;
    report.config = cfg.canonical();
    report.meta = standard_meta();

    auto emit = [&] {
      if (!out_path.empty()) {
        std::ofstream f;
        detail::open_out(f, out_path);
        write_csv(report, f);
      }
      if (csv) write_csv(report, out);
      else write_table(report, out);
    };

    if (run_cmd->parsed() || oracle_cmd->parsed()) {
      SimConfig sim = setup.sim;
      sim.oracle.record_plan = !plan_path.empty();
      auto r = simulate(setup, sim);
      auto base = compute_baselines(sim);
      report.rows = report_rows(sim, r.result, base);
      for (auto& m : oracle_meta(r)) report.meta.push_back(m);
      if (!plan_path.empty()) {
        std::ofstream f;
        detail::open_out(f, plan_path);
        write_plan(r.result.front().plan, f);
      }
      emit();
      return 0;
    }

    if (sweep_cmd->parsed()) {
      if (allocations.empty() || contentions.empty()) throw InvalidArgument("sweep: empty grid");
      std::vector<SimConfig> cells;
      for (double a : allocations) {
        for (double phi : contentions) {
          SimConfig c = setup.sim;
          c.background_phi = phi;
          c.schedule.clear();
          for (auto& t : c.tenants) t.local_alloc_fraction = a;
          c.validate();
          cells.push_back(std::move(c));
        }
      }
      std::vector<Simulated> results(cells.size());
      parallel_for(cells.size(), setup.workers, [&](std::size_t i) { results[i] = simulate(setup, cells[i]); });
      auto base = compute_baselines(setup.sim);
      std::string grid = "#grid allocations=";
      for (std::size_t i = 0; i < allocations.size(); ++i) grid += (i ? "," : "") + detail::format_double(allocations[i]);
      grid += " contentions=";
      for (std::size_t i = 0; i < contentions.size(); ++i) grid += (i ? "," : "") + detail::format_double(contentions[i]);
      report.meta.push_back(grid);
      for (std::size_t i = 0; i < cells.size(); ++i) {
        for (auto& row : report_rows(cells[i], results[i].result, base)) report.rows.push_back(std::move(row));
      }
      emit();
      return 0;
    }

    if (train_cmd->parsed()) {
      BanditAgent agent(setup.agent);
      RewardCache cache;
      auto log = train_curriculum(agent, setup.sim, setup.max_train, cache, setup.curriculum);
      save_agent(agent, agent_path);
      if (!out_path.empty()) {
        std::ofstream f;
        detail::open_out(f, out_path);
        write_training_log(log, f);
      }
      write_training_log(log, out);
      return 0;
    }

    if (eval_cmd->parsed()) {
      auto agent = load_agent(agent_path, setup.agent);
      double alloc = setup.sim.tenants.front().local_alloc_fraction;
      auto e = evaluate_agent(agent, setup.sim, alloc, setup.curriculum);
      auto sim = with_tenant_policy(setup.sim, alloc, arm_policy(agent, e.arm, setup.sim, setup.curriculum.burst_gate));
      auto base = compute_baselines(sim);
      report.meta.push_back("#agent arm=" + std::to_string(e.arm));
      report.rows = report_rows(sim, e.result, base);
      emit();
      return 0;
    }

    if (ablate_cmd->parsed()) {
      struct Variant {
        std::string name;
        CurriculumOptions opts;
      };
      std::vector<Variant> variants{{"full", setup.curriculum},
                                    {"no-burst", setup.curriculum},
                                    {"no-network", setup.curriculum},
                                    {"no-alloc", setup.curriculum}};
      variants[1].opts.burst_gate = false;
      variants[2].opts.mask.network_traffic = false;
      variants[3].opts.mask.local_alloc = false;
      std::optional<BanditAgent> loaded;
      if (!agent_path.empty()) loaded = load_agent(agent_path, setup.agent);
      double alloc = setup.sim.tenants.front().local_alloc_fraction;
      std::vector<EvalResult> evals(variants.size());
      std::vector<SimConfig> sims(variants.size());
      parallel_for(variants.size(), setup.workers, [&](std::size_t i) {
        BanditAgent agent = loaded ? *loaded : BanditAgent(setup.agent);
        if (!loaded) {
          RewardCache cache;
          train_curriculum(agent, setup.sim, setup.max_train, cache, variants[i].opts);
        }
        evals[i] = evaluate_agent(agent, setup.sim, alloc, variants[i].opts);
        sims[i] = with_tenant_policy(setup.sim, alloc,
                                     arm_policy(agent, evals[i].arm, setup.sim, variants[i].opts.burst_gate));
      });
      auto base = compute_baselines(sims.front());
      for (std::size_t i = 0; i < variants.size(); ++i) {
        report.meta.push_back("#variant " + variants[i].name + " arm=" + std::to_string(evals[i].arm));
        for (auto& row : report_rows(sims[i], evals[i].result, base)) {
          row.policy = "bandit/" + variants[i].name;
          report.rows.push_back(std::move(row));
        }
      }
      emit();
      return 0;
    }
  } catch (const std::exception& e) {
    err << "hmdsim: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace hmdsim
