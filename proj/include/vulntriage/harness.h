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

#ifndef VULNTRIAGE_HARNESS_H_
#define VULNTRIAGE_HARNESS_H_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "vulntriage/agent.h"
#include "vulntriage/core_model.h"
#include "vulntriage/ingest.h"
#include "vulntriage/prioritizer.h"
#include "vulntriage/simulator.h"

namespace vulntriage {

// Where the simulator draws its records from: a corpus CSV when `csv` is
// set, otherwise a synthetic corpus of `synthetic_size` rows.
struct CorpusSource {
  std::filesystem::path csv;
  int64_t synthetic_size = 5000;
  CorpusMix mix;
};

struct TrainOptions {
  int checkpoint_every_updates = 10;  // 0 keeps only the final checkpoint
};

struct EvaluateOptions {
  int episodes = 200;
  std::filesystem::path checkpoint;  // empty: <out_dir>/policy.ckpt
  bool write_trace = true;
};

struct CompareOptions {
  int episodes = 200;
  bool full_immediate = true;
  int bootstrap_resamples = 2000;
  double confidence = 0.95;
};

struct PrioritizeOptions {
  std::filesystem::path scan;
  std::filesystem::path hosts;
  std::filesystem::path alerts;  // optional
  double budget_minutes = 0.0;
  StepWindow alert_window;
};

struct SimulateOptions {
  std::string policy = "even";  // even | full-immediate | checkpoint
  int episodes = 1;
};

struct RunConfig {
  uint64_t seed = 0;
  std::filesystem::path out_dir = "run";
  EpisodeConfig episode;
  SelectionMode selection_mode = SelectionMode::kMaxAverage;
  CorpusSource corpus;
  std::vector<int> hidden = {kDefaultHiddenWidth, kDefaultHiddenWidth};
  StdSchedule std_schedule;
  PpoConfig ppo;
  TrainOptions train;
  EvaluateOptions evaluate;
  CompareOptions compare;
  PrioritizeOptions prioritize;
  SimulateOptions simulate;

  int state_dim() const { return episode.state_rows * kStateColumns + 1; }
};

// Parses the JSON config. Unknown keys and out-of-range values are rejected
// with kInvalidArgument naming the offending key. Relative paths inside the
// file are resolved against `base_dir`.
RunConfig ParseRunConfig(const nlohmann::json& j,
                         const std::filesystem::path& base_dir = {});
RunConfig LoadRunConfig(const std::filesystem::path& path);
void ValidateRunConfig(const RunConfig& config);
nlohmann::json RunConfigJson(const RunConfig& config);

std::shared_ptr<const std::vector<VulnRecord>> LoadCorpus(
    const RunConfig& config);

// Maps the simulator's state to the minutes allocated this week.
using AllocationPolicy =
    std::function<double(const Simulator& sim, const SystemState& state)>;

AllocationPolicy EvenAllocationPolicy(const EpisodeConfig& config);
AllocationPolicy FullImmediatePolicy();
// Deterministic actor: sigmoid(mu) * pool, std ignored.
AllocationPolicy DrlPolicy(std::shared_ptr<const PolicyParams> params);

struct EpisodeSummary {
  uint64_t episode_seed = 0;
  double total_reward = 0.0;
  CategoryCounts arrived;
  CategoryCounts mitigated;
  std::vector<double> allocated;  // per week
  std::vector<double> used;
  std::vector<double> required;  // backlog effort before selection
  std::vector<double> critical_required;
  std::vector<int> arrivals;
};

// Runs one full episode. When `trace` is non-null one JSON object per step
// is appended to it.
EpisodeSummary RunEpisode(Simulator& sim, uint64_t episode_seed,
                          const AllocationPolicy& policy,
                          const Selector& selector,
                          std::vector<nlohmann::json>* trace = nullptr);

uint64_t EvalEpisodeSeed(uint64_t root, int episode);

struct PolicyReport {
  std::string name;
  std::vector<EpisodeSummary> episodes;
  double mean_reward = 0.0;
  CategoryCounts arrived;
  CategoryCounts mitigated;
  // Mitigated criticals over arrived criticals, pooled over episodes.
  double critical_coverage = 0.0;
  // Share of mitigated records that are critical.
  double critical_precision = 0.0;
  std::vector<double> mean_allocated;
  std::vector<double> mean_required;
  std::vector<double> mean_critical_required;
  // Weeks 1 and 2 allocation over the episode budget, per episode.
  std::vector<double> early_share;
};

PolicyReport SummarizePolicy(std::string name,
                             std::vector<EpisodeSummary> episodes,
                             const EpisodeConfig& config);
nlohmann::json PolicyReportJson(const PolicyReport& report);

struct Interval {
  double estimate = 0.0;
  double lower = 0.0;
  double upper = 0.0;

  bool ExcludesZero() const { return lower > 0.0 || upper < 0.0; }
};

// Percentile bootstrap over paired episodes. `statistic` receives the
// resampled episode indices.
Interval PairedBootstrap(
    size_t n, const std::function<double(const std::vector<size_t>&)>& statistic,
    int resamples, double confidence, uint64_t seed);

struct ComparisonReport {
  std::vector<PolicyReport> policies;  // DRL first, then baselines
  Interval reward_gain;                // DRL minus even allocation
  Interval coverage_gain;
  Interval early_share;  // DRL weeks 1+2 share of budget
};

ComparisonReport ComparePolicies(const RunConfig& config,
                                 std::shared_ptr<const PolicyParams> params);
nlohmann::json ComparisonReportJson(const ComparisonReport& report);
// Columns: policy,week,mean_allocated,mean_required,mean_critical_required.
void WriteWeeklySeries(std::ostream& out, const ComparisonReport& report);

struct TrainResult {
  PolicyParams params;
  std::vector<std::string> metrics;  // JSON lines as written
  int64_t env_steps = 0;
  int updates = 0;
};

// Writes <out_dir>/metrics.jsonl, <out_dir>/policy.ckpt and periodic
// checkpoints under <out_dir>/checkpoints/. Nothing is written when out_dir
// is empty.
TrainResult Train(const RunConfig& config);

PolicyParams LoadPolicyFor(const RunConfig& config,
                           const std::filesystem::path& checkpoint);

// Evaluates the checkpoint with std 0; writes evaluate.json and trace.jsonl.
PolicyReport Evaluate(const RunConfig& config);
// Writes compare.json and weekly_series.csv.
ComparisonReport Compare(const RunConfig& config);

struct PrioritizeResult {
  std::vector<RawVulnEntry> entries;  // joined rows, uid = row index
  std::vector<VulnRecord> records;
  SelectionResult selection;
};

PrioritizeResult Prioritize(const RunConfig& config);
// Columns: uid,cve_id,host_id,value,time.
void WriteSelectionCsv(std::ostream& out, const PrioritizeResult& result);
nlohmann::json SelectionSummaryJson(const RunConfig& config,
                                    const PrioritizeResult& result);

// Runs baseline or checkpoint episodes and writes trace.jsonl and
// simulate.json.
PolicyReport Simulate(const RunConfig& config);

}  // namespace vulntriage

#endif  // VULNTRIAGE_HARNESS_H_
