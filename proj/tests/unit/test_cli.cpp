#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "hmdsim/cli.hpp"

using namespace hmdsim;

namespace {

struct Outcome {
  int status;
  std::string out;
  std::string err;
};

Outcome cli(std::vector<std::string> args) {
  args.insert(args.begin(), "hmdsim");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  int status = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {status, out.str(), err.str()};
}

std::string tmp(const std::string& name) { return std::string(HMDSIM_TEST_TMP) + "/" + name; }

// Small workload shared by every command below.
std::vector<std::string> small(std::vector<std::string> args) {
  for (const char* s : {"telemetry.marking_interval_s=0.0002", "workload.n_pages=200", "workload.length=4000",
                        "workload.window_pages=20", "workload.shift_every=500", "engine.workers=1"}) {
    args.push_back("--set");
    args.push_back(s);
  }
  return args;
}

std::vector<std::vector<std::string>> csv_rows(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream is(text);
  bool body = false;
  for (std::string line; std::getline(is, line);) {
    if (line.rfind("report_version,", 0) == 0) {
      body = true;
      continue;
    }
    if (!body || line.empty()) continue;
    std::vector<std::string> cells;
    std::istringstream ls(line);
    for (std::string c; std::getline(ls, c, ',');) cells.push_back(c);
    rows.push_back(cells);
  }
  return rows;
}

std::size_t column(const std::string& name) {
  const auto& cols = report_columns();
  return static_cast<std::size_t>(std::find(cols.begin(), cols.end(), name) - cols.begin());
}

}  // namespace

TEST(Cli, MissingTraceNamesPath) {
  auto r = cli({"run", "--trace", tmp("no-such.trace")});
  EXPECT_NE(r.status, 0);
  EXPECT_NE(r.err.find(tmp("no-such.trace")), std::string::npos) << r.err;
}

TEST(Cli, UnknownKeyAndBadSet) {
  EXPECT_NE(cli({"run", "--set", "link.nope=1"}).status, 0);
  EXPECT_NE(cli({"run", "--set", "link.contention"}).status, 0);
  EXPECT_NE(cli({}).status, 0);
}

TEST(Cli, GenerateThenRun) {
  auto path = tmp("cli.trace");
  auto g = cli(small({"generate", "--out", path}));
  ASSERT_EQ(g.status, 0) << g.err;
  EXPECT_EQ(load_trace(path).size(), 4000u);
  auto r = cli(small({"run", "--trace", path, "--policy", "adaptive", "--csv"}));
  ASSERT_EQ(r.status, 0) << r.err;
  auto rows = csv_rows(r.out);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0][column("policy")], "adaptive");
  EXPECT_EQ(rows[0][column("accesses")], "4000");
}

TEST(Cli, ReportReplaysItself) {
  auto report = tmp("cli-report.csv");
  auto first = cli(small({"run", "--policy", "static", "--local-alloc", "0.3", "--out", report, "--csv"}));
  ASSERT_EQ(first.status, 0) << first.err;
  auto again = cli({"run", "--config", report, "--csv"});
  ASSERT_EQ(again.status, 0) << again.err;
  EXPECT_EQ(again.out, first.out);
}

TEST(Cli, SweepDegradationAtLeastOne) {
  auto r = cli(small({"sweep", "--policy", "static", "--csv"}));
  ASSERT_EQ(r.status, 0) << r.err;
  auto rows = csv_rows(r.out);
  ASSERT_EQ(rows.size(), 9u);
  for (const auto& row : rows) EXPECT_GE(std::stod(row[column("runtime_degradation")]), 1.0);
  auto two = cli(small({"sweep", "--allocations", "0.1,0.5", "--contentions", "0,0.5", "--csv"}));
  ASSERT_EQ(two.status, 0) << two.err;
  EXPECT_EQ(csv_rows(two.out).size(), 4u);
}

TEST(Cli, OracleWritesPlan) {
  auto plan = tmp("cli.plan");
  auto r = cli(small({"oracle", "--plan", plan, "--csv"}));
  ASSERT_EQ(r.status, 0) << r.err;
  EXPECT_NE(r.out.find("#oracle lookahead_s="), std::string::npos);
  std::ifstream f(plan);
  std::string head;
  std::getline(f, head);
  EXPECT_EQ(head, "# hmdsim-plan v1");
  auto rows = csv_rows(r.out);
  ASSERT_EQ(rows.size(), 1u);
  std::size_t n = 0;
  for (std::string l; std::getline(f, l);) ++n;
  EXPECT_EQ(n - 1, std::stoul(rows[0][column("promotions")]));
}

TEST(Cli, TrainEvalAblate) {
  auto agent = tmp("cli-agent.bin");
  auto t = cli(small({"train", "--agent", agent, "--max-train", "20", "--set", "bandit.allocations=0.3,0.1"}));
  ASSERT_EQ(t.status, 0) << t.err;
  EXPECT_NE(t.out.find("summary episodes=40"), std::string::npos) << t.out;

  auto e = cli(small({"eval", "--agent", agent, "--local-alloc", "0.1", "--csv"}));
  ASSERT_EQ(e.status, 0) << e.err;
  auto eval_rows = csv_rows(e.out);
  ASSERT_EQ(eval_rows.size(), 1u);

  auto a = cli(small({"ablate", "--agent", agent, "--local-alloc", "0.1", "--csv"}));
  ASSERT_EQ(a.status, 0) << a.err;
  auto rows = csv_rows(a.out);
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[0][column("policy")], "bandit/full");
  auto full = rows[0];
  full[column("policy")] = eval_rows[0][column("policy")];
  EXPECT_EQ(full, eval_rows[0]);

  EXPECT_NE(cli(small({"eval", "--agent", tmp("missing-agent.bin")})).status, 0);
}

TEST(Cli, KeysPrintsReference) {
  auto r = cli({"keys"});
  EXPECT_EQ(r.status, 0);
  EXPECT_EQ(r.out, key_reference());
}
