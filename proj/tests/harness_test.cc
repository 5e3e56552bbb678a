// Copyright 2026 The vulntriage Authors
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "vulntriage/harness.h"

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "gtest/gtest.h"
#include "json.hpp"
#include "vulntriage/error.h"

namespace vulntriage {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

const fs::path kData = VULNTRIAGE_TEST_DATA_DIR;

std::string Slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

std::vector<json> ReadJsonLines(const fs::path& path) {
  std::ifstream in(path);
  std::vector<json> out;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty()) out.push_back(json::parse(line));
  }
  return out;
}

fs::path FreshDir(const std::string& name) {
  const fs::path dir = fs::path(::testing::TempDir()) / ("harness_" + name);
  fs::remove_all(dir);
  return dir;
}

// Small enough that a 1,000-step run takes well under a second.
RunConfig SmallConfig(const std::string& name) {
  RunConfig c = ParseRunConfig(json{
      {"seed", 5},
      {"episode", {{"state_rows", 8}, {"budget_minutes", 2400}}},
      {"corpus", {{"synthetic_size", 500}}},
      {"policy", {{"hidden", {8, 8}}, {"std", {{"decay_interval", 200}}}}},
      {"ppo",
       {{"rollout_steps", 256},
        {"minibatch_size", 64},
        {"epochs_per_update", 2},
        {"max_train_steps", 1000}}},
      {"train", {{"checkpoint_every_updates", 2}}},
      {"evaluate", {{"episodes", 3}}},
      {"compare", {{"episodes", 20}, {"bootstrap_resamples", 200}}}});
  c.out_dir = FreshDir(name);
  return c;
}

TEST(RunConfigTest, DefaultsAreValid) {
  const RunConfig c = ParseRunConfig(json::object());
  EXPECT_EQ(c.episode.weeks_per_episode, 4);
  EXPECT_EQ(c.hidden, std::vector<int>({68, 68}));
  EXPECT_EQ(c.state_dim(), 64 * 6 + 1);
  EXPECT_EQ(c.ppo.entropy_coef, 0.01);
  EXPECT_EQ(c.std_schedule.initial, 0.65);
}

TEST(RunConfigTest, RejectsUnknownKeysAndBadValues) {
  auto code_of = [](const json& j) {
    try {
      ParseRunConfig(j);
    } catch (const Error& e) {
      return std::string(e.what());
    }
    return std::string("accepted");
  };
  EXPECT_NE(code_of({{"episode", {{"weeks_per_episod", 3}}}})
                .find("episode.weeks_per_episod"),
            std::string::npos);
  EXPECT_NE(code_of({{"ppo", {{"gamma", "high"}}}}).find("ppo.gamma"),
            std::string::npos);
  EXPECT_NE(code_of({{"ppo", {{"clip_eps", -1}}}}), "accepted");
  EXPECT_NE(code_of({{"prioritizer", {{"mode", "fastest"}}}}), "accepted");
  EXPECT_NE(code_of({{"simulate", {{"policy", "random"}}}}), "accepted");
}

TEST(RunConfigTest, RelativePathsResolveAgainstConfigDir) {
  const fs::path dir = FreshDir("config_paths");
  fs::create_directories(dir);
  std::ofstream(dir / "run.json")
      << R"({"out_dir": "out", "prioritize": {"scan": "s.csv"}})";
  const RunConfig c = LoadRunConfig(dir / "run.json");
  EXPECT_EQ(c.out_dir, dir / "out");
  EXPECT_EQ(c.prioritize.scan, dir / "s.csv");
  try {
    LoadRunConfig(dir / "missing.json");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNotFound);
  }
}

TEST(TrainTest, SmokeRunWritesCheckpointAndMetrics) {
  const RunConfig c = SmallConfig("smoke");
  const TrainResult r = Train(c);
  EXPECT_EQ(r.env_steps, 1000);
  EXPECT_EQ(r.updates, 4);  // ceil(1000 / 256)
  EXPECT_TRUE(fs::exists(c.out_dir / "policy.ckpt"));
  EXPECT_TRUE(fs::exists(c.out_dir / "checkpoints" / "policy_512.ckpt"));
  EXPECT_TRUE(fs::exists(c.out_dir / "checkpoints" / "policy_1000.ckpt"));
  const std::vector<json> lines = ReadJsonLines(c.out_dir / "metrics.jsonl");
  ASSERT_EQ(lines.size(), 4u);
  for (const char* key : {"step", "mean_episode_reward", "actor_loss",
                          "critic_loss", "clip_fraction", "action_std"}) {
    EXPECT_TRUE(lines[0].contains(key)) << key;
  }
  EXPECT_EQ(lines.back()["step"], 1000);
  EXPECT_EQ(lines[0]["action_std"], 0.65);
  EXPECT_LT(lines.back()["action_std"].get<double>(), 0.65);
  EXPECT_EQ(LoadPolicyFor(c, c.out_dir / "policy.ckpt"), r.params);
}

TEST(TrainTest, SameSeedSameMetricsBytes) {
  RunConfig a = SmallConfig("det_a");
  RunConfig b = SmallConfig("det_b");
  Train(a);
  Train(b);
  EXPECT_EQ(Slurp(a.out_dir / "metrics.jsonl"),
            Slurp(b.out_dir / "metrics.jsonl"));
  EXPECT_EQ(Slurp(a.out_dir / "policy.ckpt"), Slurp(b.out_dir / "policy.ckpt"));
  RunConfig other = SmallConfig("det_c");
  other.seed = 6;
  Train(other);
  EXPECT_NE(Slurp(a.out_dir / "metrics.jsonl"),
            Slurp(other.out_dir / "metrics.jsonl"));
}

TEST(EvaluateTest, CountsMatchRecountFromTrace) {
  RunConfig c = SmallConfig("recount");
  Train(c);
  c.evaluate.episodes = 1;
  const PolicyReport report = Evaluate(c);
  const std::vector<json> trace = ReadJsonLines(c.out_dir / "trace.jsonl");
  ASSERT_EQ(trace.size(), 4u);
  CategoryCounts recount;
  int64_t critical_arrivals = 0;
  double reward = 0.0;
  for (const json& step : trace) {
    critical_arrivals += step["critical_arrivals"].get<int64_t>();
    reward += step["total"].get<double>();
    for (const json& m : step["mitigated"]) {
      recount.high_value += m["high_value"].get<bool>();
      recount.low_protection += m["low_protection"].get<bool>();
      recount.org_relevant += m["org_relevant"].get<bool>();
      recount.ids_flagged += m["ids_flagged"].get<bool>();
      recount.critical += m["avg_score"].get<double>() >= kCriticalThreshold;
      ++recount.total;
    }
  }
  EXPECT_EQ(report.mitigated, recount);
  EXPECT_EQ(report.arrived.critical, critical_arrivals);
  EXPECT_DOUBLE_EQ(report.mean_reward, reward);
  const json saved = json::parse(Slurp(c.out_dir / "evaluate.json"));
  EXPECT_EQ(saved["mitigated"]["total"], recount.total);
}

TEST(EvaluateTest, DeterministicAcrossRuns) {
  RunConfig c = SmallConfig("eval_det");
  Train(c);
  Evaluate(c);
  const std::string first = Slurp(c.out_dir / "evaluate.json");
  const std::string first_trace = Slurp(c.out_dir / "trace.jsonl");
  Evaluate(c);
  EXPECT_EQ(Slurp(c.out_dir / "evaluate.json"), first);
  EXPECT_EQ(Slurp(c.out_dir / "trace.jsonl"), first_trace);
}

TEST(EvaluateTest, ZeroBudgetMitigatesNothing) {
  RunConfig c = SmallConfig("zero_budget");
  Train(c);
  c.episode.episode_budget_minutes = 0.0;
  const PolicyReport report = Evaluate(c);
  EXPECT_EQ(report.mitigated, CategoryCounts{});
  EXPECT_GT(report.arrived.total, 0);
  EXPECT_EQ(report.critical_coverage, 0.0);
}

TEST(EvaluateTest, RejectsMismatchedCheckpoint) {
  RunConfig c = SmallConfig("mismatch");
  Train(c);
  c.episode.state_rows = 16;
  try {
    Evaluate(c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kShapeMismatch);
  }
}

TEST(CompareTest, PairedArrivalsAndEvenAllocation) {
  RunConfig c = SmallConfig("compare");
  Train(c);
  const ComparisonReport report = Compare(c);
  ASSERT_EQ(report.policies.size(), 3u);
  EXPECT_EQ(report.policies[0].name, "drl");
  EXPECT_EQ(report.policies[1].name, "even");
  EXPECT_EQ(report.policies[2].name, "full-immediate");
  const size_t n = report.policies[0].episodes.size();
  ASSERT_EQ(n, 20u);
  for (size_t i = 0; i < n; ++i) {
    const auto& drl = report.policies[0].episodes[i];
    for (const PolicyReport& p : report.policies) {
      EXPECT_EQ(p.episodes[i].arrivals, drl.arrivals) << p.name << " " << i;
      EXPECT_EQ(p.episodes[i].arrived, drl.arrived);
    }
    for (double a : report.policies[1].episodes[i].allocated) {
      EXPECT_EQ(a, 2400.0 / 4);
    }
    EXPECT_EQ(report.policies[2].episodes[i].allocated[0], 2400.0);
  }
  for (const PolicyReport& p : report.policies) {
    EXPECT_LE(p.mitigated.critical, p.arrived.critical);
    EXPECT_GE(p.critical_coverage, 0.0);
    EXPECT_LE(p.critical_coverage, 1.0);
  }
  EXPECT_LE(report.reward_gain.lower, report.reward_gain.estimate);
  EXPECT_GE(report.reward_gain.upper, report.reward_gain.estimate);
  const std::string series = Slurp(c.out_dir / "weekly_series.csv");
  EXPECT_EQ(series.rfind("policy,week,mean_allocated", 0), 0u);
  EXPECT_NE(series.find("even,3,600,"), std::string::npos) << series;
  EXPECT_TRUE(json::parse(Slurp(c.out_dir / "compare.json"))
                  .contains("drl_minus_even"));
}

TEST(PairedBootstrapTest, ConstantDifferenceCollapsesInterval) {
  const Interval i = PairedBootstrap(
      50, [](const std::vector<size_t>&) { return 0.25; }, 100, 0.95, 1);
  EXPECT_EQ(i.estimate, 0.25);
  EXPECT_EQ(i.lower, 0.25);
  EXPECT_EQ(i.upper, 0.25);
  EXPECT_TRUE(i.ExcludesZero());
}

TEST(PairedBootstrapTest, CoversSampleMean) {
  std::vector<double> x;
  for (int i = 0; i < 200; ++i) x.push_back((i % 7) - 3.0 + 0.1);
  auto mean = [&](const std::vector<size_t>& idx) {
    double s = 0.0;
    for (size_t i : idx) s += x[i];
    return s / static_cast<double>(idx.size());
  };
  const Interval i = PairedBootstrap(x.size(), mean, 2000, 0.95, 3);
  EXPECT_LT(i.lower, i.estimate);
  EXPECT_GT(i.upper, i.estimate);
  // Normal-theory half width as a loose oracle: 1.96 * sd / sqrt(n).
  const double sd = 2.0;  // population sd of the repeating 7-cycle
  EXPECT_NEAR(i.upper - i.lower, 2 * 1.96 * sd / std::sqrt(200.0), 0.1);
}

RunConfig PrioritizeConfig(const std::string& name, const fs::path& scan,
                           double budget) {
  RunConfig c;
  c.out_dir = FreshDir(name);
  c.prioritize.scan = scan;
  c.prioritize.hosts = kData / "hosts12.csv";
  c.prioritize.alerts = kData / "alerts12.csv";
  c.prioritize.alert_window = {0, 1};
  c.prioritize.budget_minutes = budget;
  return c;
}

TEST(PrioritizeTest, EmptyScanSelectsNothing) {
  const fs::path dir = FreshDir("empty_scan");
  fs::create_directories(dir);
  std::ofstream(dir / "scan.csv") << "host_id,cve_id,cvss,mitigation_minutes\n";
  const RunConfig c = PrioritizeConfig("empty_out", dir / "scan.csv", 600);
  const PrioritizeResult r = Prioritize(c);
  EXPECT_TRUE(r.selection.chosen_uids.empty());
  EXPECT_EQ(r.selection.objective, 0.0);
  EXPECT_EQ(Slurp(c.out_dir / "selection.csv"), "uid,cve_id,host_id,value,time\n");
}

TEST(PrioritizeTest, SingleRowWithinBudgetIsSelected) {
  const fs::path dir = FreshDir("single_scan");
  fs::create_directories(dir);
  std::ofstream(dir / "scan.csv") << "host_id,cve_id,cvss,mitigation_minutes\n"
                                     "h03,CVE-2023-9999,6.1,40\n";
  const RunConfig c = PrioritizeConfig("single_out", dir / "scan.csv", 60);
  const PrioritizeResult r = Prioritize(c);
  EXPECT_EQ(r.selection.chosen_uids, std::vector<int64_t>({0}));
  const json summary = json::parse(Slurp(c.out_dir / "summary.json"));
  EXPECT_EQ(summary["selected"], 1);
  EXPECT_EQ(summary["total_minutes"], 40.0);
  EXPECT_EQ(summary["floor_relaxed"], true);  // 40 < 0.9 * 60
}

TEST(PrioritizeTest, TwelveRowFixtureMatchesGolden) {
  const RunConfig c = PrioritizeConfig("golden", kData / "scan12.csv", 600);
  const PrioritizeResult r = Prioritize(c);
  EXPECT_EQ(Slurp(c.out_dir / "selection.csv"),
            Slurp(kData / "selection12_golden.csv"));
  // The golden came from exhaustive search; check that it still agrees.
  const SelectionResult brute =
      BruteForceSelect(MakeSelectionProblem(r.records, 600, 0.9));
  EXPECT_EQ(r.selection.chosen_uids, brute.chosen_uids);
  EXPECT_NEAR(r.selection.objective, brute.objective, 1e-12);
}

TEST(PrioritizeTest, MissingColumnReportsFileAndLine) {
  const fs::path dir = FreshDir("bad_scan");
  fs::create_directories(dir);
  std::ofstream(dir / "scan.csv") << "host_id,cve_id,cvss,mitigation_minutes\n"
                                     "h01,CVE-1,not-a-number,10\n";
  const RunConfig c = PrioritizeConfig("bad_out", dir / "scan.csv", 60);
  try {
    Prioritize(c);
    FAIL();
  } catch (const Error& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("scan.csv:2"), std::string::npos) << msg;
  }
}

TEST(SimulateTest, EvenPolicyTraceMatchesReport) {
  RunConfig c = SmallConfig("simulate");
  c.simulate.episodes = 2;
  const PolicyReport r = Simulate(c);
  const std::vector<json> trace = ReadJsonLines(c.out_dir / "trace.jsonl");
  ASSERT_EQ(trace.size(), 8u);
  double used = 0.0;
  for (const json& step : trace) {
    EXPECT_EQ(step["allocated"], 600.0);
    used += step["used"].get<double>();
  }
  double report_used = 0.0;
  for (const EpisodeSummary& e : r.episodes) {
    for (double u : e.used) report_used += u;
  }
  EXPECT_DOUBLE_EQ(used, report_used);
}

}  // namespace
}  // namespace vulntriage
