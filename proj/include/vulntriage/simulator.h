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

// Weekly discrete-event simulation of a vulnerability-management desk.
//
// Each episode lasts `weeks_per_episode` steps. Reset grants the whole
// episode budget and draws the week-0 arrivals. Each Step lets the selector
// pick from the backlog within the allocated minutes, deducts the minutes
// actually used from the pool, computes the reward, and (unless the episode
// is over) appends the next week's Poisson arrivals to the backlog.

#ifndef VULNTRIAGE_SIMULATOR_H_
#define VULNTRIAGE_SIMULATOR_H_

#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "vulntriage/core_model.h"
#include "vulntriage/prioritizer.h"
#include "vulntriage/rng.h"

namespace vulntriage {

struct ArrivalRegime {
  std::string label;
  double mean_per_week = 1.0;
};

struct RewardConfig {
  double w1 = 0.5;
  double w2 = 0.5;
  double cost_per_minute = 1e-5;
};

struct EpisodeConfig {
  int weeks_per_episode = 4;
  double episode_budget_minutes = 4 * 2400.0;
  // Regime label per week. Ignored when random_pattern is set, in which case
  // every week draws a label uniformly from regime_means at reset.
  std::vector<std::string> pattern = {"low", "low", "high", "high"};
  bool random_pattern = false;
  std::map<std::string, double> regime_means = {
      {"high", 30.0}, {"medium", 15.0}, {"low", 5.0}};
  int state_rows = 64;
  uint64_t seed = 0;
  double max_mitigation_scale = 480.0;
  double utilization_floor = 0.9;
  RewardConfig reward;
};

void ValidateEpisodeConfig(const EpisodeConfig& config);

struct SimulatorState {
  int step = 0;
  std::vector<VulnRecord> backlog;
  double pool_minutes = 0.0;
};

// Four record categories tallied for reports.
struct CategoryCounts {
  int64_t high_value = 0;      // asset criticality at top priority
  int64_t low_protection = 0;  // protection level at top priority
  int64_t org_relevant = 0;    // organizational relevance at top priority
  int64_t ids_flagged = 0;
  int64_t critical = 0;  // avg_score >= kCriticalThreshold
  int64_t total = 0;

  void Add(const VulnRecord& r);
  CategoryCounts& operator+=(const CategoryCounts& o);
  bool operator==(const CategoryCounts&) const = default;
};

struct StepInfo {
  int week = 0;
  std::string regime;     // regime of this week's arrivals
  int arrivals = 0;       // records that arrived at the start of this week
  int critical_arrivals = 0;
  double allocated = 0.0;
  double used = 0.0;
  int backlog_before = 0;
  int backlog_after = 0;  // after selection and next week's arrivals
  double required_minutes = 0.0;  // backlog effort before selection
  double critical_required_minutes = 0.0;
  int critical_in_backlog = 0;
  int hidden_rows = 0;
  bool floor_relaxed = false;
  CategoryCounts arrived;  // this week's arrivals by category
  CategoryCounts mitigated;
};

struct StepOutcome {
  SystemState next_state;
  RewardBreakdown reward;
  SelectionResult selected;
  std::vector<VulnRecord> mitigated;
  bool done = false;
  StepInfo info;
};

// count ~ Poisson(mean); records drawn uniformly with replacement from the
// corpus and restamped with `step` and consecutive uids from `next_uid`.
std::vector<VulnRecord> SampleArrivals(const ArrivalRegime& regime,
                                       std::span<const VulnRecord> corpus,
                                       Rng& rng, int step, int64_t& next_uid);

class Simulator {
 public:
  Simulator(EpisodeConfig config,
            std::shared_ptr<const std::vector<VulnRecord>> corpus);

  // Starts an episode from config().seed, or from an explicit episode seed.
  SystemState Reset();
  SystemState Reset(uint64_t episode_seed);

  StepOutcome Step(double allocated_minutes, const Selector& selector);

  SystemState EncodeState() const;

  // Replaces the episode state mid-episode (pattern and RNG are kept).
  void LoadState(SimulatorState state);

  const EpisodeConfig& config() const { return config_; }
  const SimulatorState& state() const { return state_; }
  const std::vector<std::string>& pattern() const { return pattern_; }
  bool done() const { return started_ && state_.step >= config_.weeks_per_episode; }

 private:
  void AppendArrivals(int week);

  EpisodeConfig config_;
  std::shared_ptr<const std::vector<VulnRecord>> corpus_;
  std::vector<std::string> pattern_;
  SimulatorState state_;
  Rng arrivals_rng_;
  int64_t next_uid_ = 0;
  int last_arrivals_ = 0;
  CategoryCounts last_arrival_counts_;
  bool started_ = false;
};

// Top-N backlog rows by avg_score (ties by uid), zero padded.
SystemState EncodeState(const SimulatorState& sim, const EpisodeConfig& config);

std::vector<VulnRecord> BuildCorpusRecords(
    const std::vector<RawVulnEntry>& entries, const CategoryScheme& scheme = {});

// One JSON-lines trace record.
nlohmann::json StepTraceJson(const StepOutcome& outcome);

}  // namespace vulntriage

#endif  // VULNTRIAGE_SIMULATOR_H_
