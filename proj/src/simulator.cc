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

#include "vulntriage/simulator.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>
#include <utility>

#include "vulntriage/error.h"

namespace vulntriage {

void CategoryCounts::Add(const VulnRecord& r) {
  const AttributeVector& a = r.attrs();
  high_value += a.asset_criticality == 1.0;
  low_protection += a.protection_level == 1.0;
  org_relevant += a.org_relevance == 1.0;
  ids_flagged += a.ids_flag == 1.0;
  critical += r.is_critical();
  ++total;
}

CategoryCounts& CategoryCounts::operator+=(const CategoryCounts& o) {
  high_value += o.high_value;
  low_protection += o.low_protection;
  org_relevant += o.org_relevant;
  ids_flagged += o.ids_flagged;
  critical += o.critical;
  total += o.total;
  return *this;
}

void ValidateEpisodeConfig(const EpisodeConfig& config) {
  auto fail = [](const std::string& what) {
    throw Error(ErrorCode::kInvalidArgument, "episode config: " + what);
  };
  if (config.weeks_per_episode < 1) fail("weeks_per_episode must be >= 1");
  if (!(config.episode_budget_minutes >= 0.0) ||
      !std::isfinite(config.episode_budget_minutes)) {
    fail("episode_budget_minutes must be >= 0");
  }
  if (config.state_rows < 1) fail("state_rows must be >= 1");
  if (!(config.max_mitigation_scale > 0.0)) {
    fail("max_mitigation_scale must be > 0");
  }
  if (!(config.utilization_floor >= 0.0 && config.utilization_floor <= 1.0)) {
    fail("utilization_floor must lie in [0, 1]");
  }
  if (config.regime_means.empty()) fail("regime_means is empty");
  for (const auto& [label, mean] : config.regime_means) {
    if (!(mean > 0.0) || !std::isfinite(mean)) {
      fail("regime '" + label + "' needs a positive mean");
    }
  }
  const auto& m = config.regime_means;
  auto mean_of = [&](const char* l) { return m.count(l) ? m.at(l) : -1.0; };
  if (mean_of("high") >= 0 && mean_of("medium") >= 0 &&
      !(mean_of("high") > mean_of("medium"))) {
    fail("regime means must satisfy high > medium");
  }
  if (mean_of("medium") >= 0 && mean_of("low") >= 0 &&
      !(mean_of("medium") > mean_of("low"))) {
    fail("regime means must satisfy medium > low");
  }
  if (mean_of("high") >= 0 && mean_of("low") >= 0 &&
      !(mean_of("high") > mean_of("low"))) {
    fail("regime means must satisfy high > low");
  }
  if (!config.random_pattern) {
    if (static_cast<int>(config.pattern.size()) != config.weeks_per_episode) {
      std::ostringstream msg;
      msg << "pattern has " << config.pattern.size() << " entries but "
          << "weeks_per_episode is " << config.weeks_per_episode;
      fail(msg.str());
    }
    for (const std::string& label : config.pattern) {
      if (!m.count(label)) fail("pattern uses unknown regime '" + label + "'");
    }
  }
  if (std::abs(config.reward.w1 + config.reward.w2 - 1.0) > 1e-12) {
    fail("reward weights must sum to 1");
  }
  if (config.reward.cost_per_minute < 0.0) fail("cost_per_minute must be >= 0");
}

std::vector<VulnRecord> SampleArrivals(const ArrivalRegime& regime,
                                       std::span<const VulnRecord> corpus,
                                       Rng& rng, int step, int64_t& next_uid) {
  if (corpus.empty()) {
    throw Error(ErrorCode::kInvalidArgument,
                "cannot sample arrivals from an empty corpus");
  }
  if (!(regime.mean_per_week > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "arrival mean must be > 0");
  }
  std::poisson_distribution<int> count_dist(regime.mean_per_week);
  std::uniform_int_distribution<size_t> pick(0, corpus.size() - 1);
  const int count = count_dist(rng);
  std::vector<VulnRecord> out;
  out.reserve(static_cast<size_t>(count));
  for (int i = 0; i < count; ++i) {
    out.push_back(corpus[pick(rng)].Restamped(next_uid++, step));
  }
  return out;
}

Simulator::Simulator(EpisodeConfig config,
                     std::shared_ptr<const std::vector<VulnRecord>> corpus)
    : config_(std::move(config)), corpus_(std::move(corpus)) {
  ValidateEpisodeConfig(config_);
  if (!corpus_ || corpus_->empty()) {
    throw Error(ErrorCode::kInvalidArgument, "simulator corpus is empty");
  }
}

SystemState Simulator::Reset() { return Reset(config_.seed); }

SystemState Simulator::Reset(uint64_t episode_seed) {
  arrivals_rng_ = MakeRng(episode_seed, "arrivals");
  if (config_.random_pattern) {
    Rng pattern_rng = MakeRng(episode_seed, "pattern");
    std::vector<std::string> labels;
    for (const auto& entry : config_.regime_means) labels.push_back(entry.first);
    std::uniform_int_distribution<size_t> pick(0, labels.size() - 1);
    pattern_.clear();
    for (int w = 0; w < config_.weeks_per_episode; ++w) {
      pattern_.push_back(labels[pick(pattern_rng)]);
    }
  } else {
    pattern_ = config_.pattern;
  }
  state_ = SimulatorState{};
  state_.pool_minutes = config_.episode_budget_minutes;
  next_uid_ = 0;
  started_ = true;
  AppendArrivals(0);
  return EncodeState();
}

void Simulator::AppendArrivals(int week) {
  const std::string& label = pattern_[static_cast<size_t>(week)];
  const ArrivalRegime regime{label, config_.regime_means.at(label)};
  std::vector<VulnRecord> arrivals =
      SampleArrivals(regime, *corpus_, arrivals_rng_, week, next_uid_);
  last_arrivals_ = static_cast<int>(arrivals.size());
  last_arrival_counts_ = CategoryCounts{};
  for (const VulnRecord& r : arrivals) last_arrival_counts_.Add(r);
  state_.backlog.insert(state_.backlog.end(),
                        std::make_move_iterator(arrivals.begin()),
                        std::make_move_iterator(arrivals.end()));
}

StepOutcome Simulator::Step(double allocated_minutes, const Selector& selector) {
  if (!started_) throw Error(ErrorCode::kInvalidArgument, "Step before Reset");
  if (done()) {
    throw Error(ErrorCode::kInvalidArgument, "episode already finished");
  }
  if (!(allocated_minutes >= 0.0) ||
      allocated_minutes > state_.pool_minutes + 1e-9) {
    std::ostringstream msg;
    msg << "allocation " << allocated_minutes << " outside [0, "
        << state_.pool_minutes << "]";
    throw Error(ErrorCode::kInvalidArgument, msg.str());
  }
  const double allocated = std::min(allocated_minutes, state_.pool_minutes);

  StepOutcome out;
  StepInfo& info = out.info;
  info.week = state_.step;
  info.regime = pattern_[static_cast<size_t>(state_.step)];
  info.arrivals = last_arrivals_;
  info.critical_arrivals = static_cast<int>(last_arrival_counts_.critical);
  info.arrived = last_arrival_counts_;
  info.allocated = allocated;
  info.backlog_before = static_cast<int>(state_.backlog.size());
  for (const VulnRecord& r : state_.backlog) {
    info.required_minutes += r.mitigation_minutes();
    if (r.is_critical()) {
      info.critical_required_minutes += r.mitigation_minutes();
      ++info.critical_in_backlog;
    }
  }
  info.hidden_rows =
      std::max(0, info.backlog_before - config_.state_rows);

  out.selected = selector(MakeSelectionProblem(state_.backlog, allocated,
                                               config_.utilization_floor));
  info.floor_relaxed = out.selected.floor_relaxed;

  std::vector<VulnRecord> remaining;
  remaining.reserve(state_.backlog.size());
  for (VulnRecord& r : state_.backlog) {
    if (out.selected.Contains(r.uid())) {
      out.mitigated.push_back(std::move(r));
    } else {
      remaining.push_back(std::move(r));
    }
  }
  state_.backlog = std::move(remaining);
  for (const VulnRecord& r : out.mitigated) {
    info.used += r.mitigation_minutes();
    info.mitigated.Add(r);
  }
  if (info.used > allocated + 1e-9) {
    throw Error(ErrorCode::kInternal, "selector exceeded the allocation");
  }
  state_.pool_minutes -= info.used;
  out.reward = ComputeReward(out.mitigated, config_.reward.w1,
                             config_.reward.w2, config_.reward.cost_per_minute);

  ++state_.step;
  out.done = state_.step >= config_.weeks_per_episode;
  if (!out.done) AppendArrivals(state_.step);
  info.backlog_after = static_cast<int>(state_.backlog.size());
  out.next_state = EncodeState();
  return out;
}

void Simulator::LoadState(SimulatorState state) {
  if (!started_) throw Error(ErrorCode::kInvalidArgument, "LoadState before Reset");
  if (state.pool_minutes < 0.0 || state.step < 0 ||
      state.step >= config_.weeks_per_episode) {
    throw Error(ErrorCode::kInvalidArgument, "invalid simulator state");
  }
  for (const VulnRecord& r : state.backlog) {
    next_uid_ = std::max(next_uid_, r.uid() + 1);
  }
  state_ = std::move(state);
}

SystemState Simulator::EncodeState() const {
  return vulntriage::EncodeState(state_, config_);
}

SystemState EncodeState(const SimulatorState& sim, const EpisodeConfig& config) {
  SystemState s;
  s.rows = config.state_rows;
  s.matrix.assign(static_cast<size_t>(s.rows) * kStateColumns, 0.0);
  s.pool_minutes = sim.pool_minutes;
  s.pool_norm =
      config.episode_budget_minutes > 0.0
          ? std::clamp(sim.pool_minutes / config.episode_budget_minutes, 0.0,
                       1.0)
          : 0.0;
  std::vector<const VulnRecord*> order;
  order.reserve(sim.backlog.size());
  for (const VulnRecord& r : sim.backlog) order.push_back(&r);
  const size_t shown = std::min(order.size(), static_cast<size_t>(s.rows));
  auto by_score = [](const VulnRecord* a, const VulnRecord* b) {
    if (a->avg_score() != b->avg_score()) return a->avg_score() > b->avg_score();
    return a->uid() < b->uid();
  };
  std::partial_sort(order.begin(), order.begin() + shown, order.end(), by_score);
  for (size_t i = 0; i < shown; ++i) {
    const auto attrs = order[i]->attrs().AsArray();
    double* row = &s.matrix[i * kStateColumns];
    std::copy(attrs.begin(), attrs.end(), row);
    row[kNumAttributes] = std::min(
        1.0, order[i]->mitigation_minutes() / config.max_mitigation_scale);
  }
  s.hidden_rows = static_cast<int>(order.size() - shown);
  return s;
}

std::vector<VulnRecord> BuildCorpusRecords(
    const std::vector<RawVulnEntry>& entries, const CategoryScheme& scheme) {
  std::vector<VulnRecord> out;
  out.reserve(entries.size());
  for (size_t i = 0; i < entries.size(); ++i) {
    out.push_back(BuildRecord(entries[i], 0, static_cast<int64_t>(i), scheme));
  }
  return out;
}

nlohmann::json StepTraceJson(const StepOutcome& outcome) {
  const StepInfo& info = outcome.info;
  nlohmann::json mitigated = nlohmann::json::array();
  for (const VulnRecord& r : outcome.mitigated) {
    const AttributeVector& a = r.attrs();
    mitigated.push_back({{"uid", r.uid()},
                         {"avg_score", r.avg_score()},
                         {"minutes", r.mitigation_minutes()},
                         {"high_value", a.asset_criticality == 1.0},
                         {"low_protection", a.protection_level == 1.0},
                         {"org_relevant", a.org_relevance == 1.0},
                         {"ids_flagged", a.ids_flag == 1.0},
                         {"critical", r.is_critical()}});
  }
  return {{"step", info.week},
          {"regime", info.regime},
          {"arrivals", info.arrivals},
          {"critical_arrivals", info.critical_arrivals},
          {"allocated", info.allocated},
          {"used", info.used},
          {"selected_uids", outcome.selected.chosen_uids},
          {"r1", outcome.reward.r1},
          {"r2", outcome.reward.r2},
          {"total", outcome.reward.total},
          {"backlog_size", info.backlog_before},
          {"backlog_after", info.backlog_after},
          {"required_minutes", info.required_minutes},
          {"critical_required_minutes", info.critical_required_minutes},
          {"pool_after", outcome.next_state.pool_minutes},
          {"floor_relaxed", info.floor_relaxed},
          {"hidden_rows", info.hidden_rows},
          {"done", outcome.done},
          {"mitigated", std::move(mitigated)}};
}

}  // namespace vulntriage
