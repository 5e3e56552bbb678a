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

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <string_view>
#include <utility>

#include "vulntriage/error.h"
#include "vulntriage/rng.h"

namespace vulntriage {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

[[noreturn]] void Invalid(const std::string& where, const std::string& what) {
  throw Error(ErrorCode::kInvalidArgument, where + ": " + what);
}

// Rejects keys outside `allowed` so typos fail loudly instead of silently
// falling back to defaults.
void CheckKeys(const json& j, const std::string& where,
               std::initializer_list<std::string_view> allowed) {
  if (!j.is_object()) Invalid(where, "expected an object");
  for (const auto& item : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), item.key()) == allowed.end()) {
      Invalid(where + "." + item.key(), "unknown key");
    }
  }
}

template <typename T>
void Read(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    Invalid(where + "." + key, e.what());
  }
}

void ReadPath(const json& j, const char* key, fs::path& out,
              const std::string& where, const fs::path& base) {
  std::string s;
  if (!j.contains(key)) return;
  Read(j, key, s, where);
  out = s.empty() || fs::path(s).is_absolute() || base.empty() ? fs::path(s)
                                                                : base / s;
}

void ParseEpisode(const json& j, EpisodeConfig& e) {
  const std::string w = "episode";
  CheckKeys(j, w,
            {"weeks", "budget_minutes", "pattern", "random_pattern",
             "regime_means", "state_rows", "max_mitigation_minutes",
             "utilization_floor", "reward"});
  Read(j, "weeks", e.weeks_per_episode, w);
  Read(j, "budget_minutes", e.episode_budget_minutes, w);
  Read(j, "pattern", e.pattern, w);
  Read(j, "random_pattern", e.random_pattern, w);
  Read(j, "regime_means", e.regime_means, w);
  Read(j, "state_rows", e.state_rows, w);
  Read(j, "max_mitigation_minutes", e.max_mitigation_scale, w);
  Read(j, "utilization_floor", e.utilization_floor, w);
  if (j.contains("reward")) {
    const json& r = j.at("reward");
    const std::string rw = "episode.reward";
    CheckKeys(r, rw, {"w1", "w2", "cost_per_minute"});
    Read(r, "w1", e.reward.w1, rw);
    Read(r, "w2", e.reward.w2, rw);
    Read(r, "cost_per_minute", e.reward.cost_per_minute, rw);
  }
}

void ParseCorpus(const json& j, CorpusSource& c, const fs::path& base) {
  const std::string w = "corpus";
  CheckKeys(j, w, {"csv", "synthetic_size", "mix"});
  ReadPath(j, "csv", c.csv, w, base);
  Read(j, "synthetic_size", c.synthetic_size, w);
  if (j.contains("mix")) {
    const json& m = j.at("mix");
    const std::string mw = "corpus.mix";
    CheckKeys(m, mw,
              {"asset_criticality", "protection_level", "org_relevance",
               "cvss_min", "cvss_max", "ids_flag_prob", "time_median",
               "time_sigma", "time_min", "time_max", "host_count"});
    Read(m, "asset_criticality", c.mix.asset_criticality, mw);
    Read(m, "protection_level", c.mix.protection_level, mw);
    Read(m, "org_relevance", c.mix.org_relevance, mw);
    Read(m, "cvss_min", c.mix.cvss_min, mw);
    Read(m, "cvss_max", c.mix.cvss_max, mw);
    Read(m, "ids_flag_prob", c.mix.ids_flag_prob, mw);
    Read(m, "time_median", c.mix.time_median, mw);
    Read(m, "time_sigma", c.mix.time_sigma, mw);
    Read(m, "time_min", c.mix.time_min, mw);
    Read(m, "time_max", c.mix.time_max, mw);
    Read(m, "host_count", c.mix.host_count, mw);
  }
}

void ParsePolicy(const json& j, RunConfig& c) {
  const std::string w = "policy";
  CheckKeys(j, w, {"hidden", "std"});
  Read(j, "hidden", c.hidden, w);
  if (j.contains("std")) {
    const json& s = j.at("std");
    const std::string sw = "policy.std";
    CheckKeys(s, sw, {"initial", "floor", "decrement", "decay_interval"});
    Read(s, "initial", c.std_schedule.initial, sw);
    Read(s, "floor", c.std_schedule.floor, sw);
    Read(s, "decrement", c.std_schedule.decrement, sw);
    Read(s, "decay_interval", c.std_schedule.decay_interval, sw);
  }
}

void ParsePpo(const json& j, PpoConfig& p) {
  const std::string w = "ppo";
  CheckKeys(j, w,
            {"clip_eps", "entropy_coef", "value_coef", "gamma", "gae_lambda",
             "epochs_per_update", "minibatch_size", "learning_rate",
             "critic_learning_rate", "optimizer", "momentum", "max_grad_norm",
             "rollout_steps", "max_train_steps"});
  Read(j, "clip_eps", p.clip_eps, w);
  Read(j, "entropy_coef", p.entropy_coef, w);
  Read(j, "value_coef", p.value_coef, w);
  Read(j, "gamma", p.gamma, w);
  Read(j, "gae_lambda", p.gae_lambda, w);
  Read(j, "epochs_per_update", p.epochs_per_update, w);
  Read(j, "minibatch_size", p.minibatch_size, w);
  Read(j, "learning_rate", p.learning_rate, w);
  Read(j, "critic_learning_rate", p.critic_learning_rate, w);
  if (j.contains("optimizer")) {
    std::string name;
    Read(j, "optimizer", name, w);
    p.optimizer = ParseOptimizerKind(name);
  }
  Read(j, "momentum", p.momentum, w);
  Read(j, "max_grad_norm", p.max_grad_norm, w);
  Read(j, "rollout_steps", p.rollout_steps, w);
  Read(j, "max_train_steps", p.max_train_steps, w);
}

void WriteFile(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) {
    throw Error(ErrorCode::kInvalidArgument,
                "cannot write " + path.string());
  }
}

std::string JsonLines(const std::vector<json>& lines) {
  std::string text;
  for (const json& line : lines) text += line.dump() + "\n";
  return text;
}

json CountsJson(const CategoryCounts& c) {
  return {{"high_value", c.high_value},     {"low_protection", c.low_protection},
          {"org_relevant", c.org_relevant}, {"ids_flagged", c.ids_flagged},
          {"critical", c.critical},         {"total", c.total}};
}

double Ratio(double num, double den) { return den > 0.0 ? num / den : 0.0; }

std::vector<int> LayerSizes(const RunConfig& config) {
  std::vector<int> layers = {config.state_dim()};
  layers.insert(layers.end(), config.hidden.begin(), config.hidden.end());
  layers.push_back(1);
  return layers;
}

fs::path CheckpointPath(const RunConfig& config) {
  return config.evaluate.checkpoint.empty() ? config.out_dir / "policy.ckpt"
                                            : config.evaluate.checkpoint;
}

std::vector<EpisodeSummary> RunEpisodes(
    const RunConfig& config,
    const std::shared_ptr<const std::vector<VulnRecord>>& corpus,
    const AllocationPolicy& policy, int episodes,
    std::vector<json>* trace) {
  Simulator sim(config.episode, corpus);
  const Selector selector = MakeSelector(config.selection_mode);
  std::vector<EpisodeSummary> out;
  out.reserve(static_cast<size_t>(episodes));
  for (int i = 0; i < episodes; ++i) {
    std::vector<json> steps;
    out.push_back(RunEpisode(sim, EvalEpisodeSeed(config.seed, i), policy,
                             selector, trace ? &steps : nullptr));
    if (trace) {
      for (json& step : steps) {
        step["episode"] = i;
        trace->push_back(std::move(step));
      }
    }
  }
  return out;
}

}  // namespace

RunConfig ParseRunConfig(const json& j, const fs::path& base_dir) {
  RunConfig c;
  CheckKeys(j, "config",
            {"seed", "out_dir", "episode", "prioritizer", "corpus", "policy",
             "ppo", "train", "evaluate", "compare", "prioritize", "simulate"});
  Read(j, "seed", c.seed, "config");
  ReadPath(j, "out_dir", c.out_dir, "config", base_dir);
  if (j.contains("episode")) ParseEpisode(j.at("episode"), c.episode);
  if (j.contains("prioritizer")) {
    const json& p = j.at("prioritizer");
    CheckKeys(p, "prioritizer", {"mode", "utilization_floor"});
    if (p.contains("mode")) {
      std::string mode;
      Read(p, "mode", mode, "prioritizer");
      c.selection_mode = ParseSelectionMode(mode);
    }
    Read(p, "utilization_floor", c.episode.utilization_floor, "prioritizer");
  }
  if (j.contains("corpus")) ParseCorpus(j.at("corpus"), c.corpus, base_dir);
  if (j.contains("policy")) ParsePolicy(j.at("policy"), c);
  if (j.contains("ppo")) ParsePpo(j.at("ppo"), c.ppo);
  if (j.contains("train")) {
    CheckKeys(j.at("train"), "train", {"checkpoint_every_updates"});
    Read(j.at("train"), "checkpoint_every_updates",
         c.train.checkpoint_every_updates, "train");
  }
  if (j.contains("evaluate")) {
    const json& e = j.at("evaluate");
    CheckKeys(e, "evaluate", {"episodes", "checkpoint", "write_trace"});
    Read(e, "episodes", c.evaluate.episodes, "evaluate");
    ReadPath(e, "checkpoint", c.evaluate.checkpoint, "evaluate", base_dir);
    Read(e, "write_trace", c.evaluate.write_trace, "evaluate");
  }
  if (j.contains("compare")) {
    const json& e = j.at("compare");
    CheckKeys(e, "compare",
              {"episodes", "full_immediate", "bootstrap_resamples",
               "confidence"});
    Read(e, "episodes", c.compare.episodes, "compare");
    Read(e, "full_immediate", c.compare.full_immediate, "compare");
    Read(e, "bootstrap_resamples", c.compare.bootstrap_resamples, "compare");
    Read(e, "confidence", c.compare.confidence, "compare");
  }
  if (j.contains("prioritize")) {
    const json& p = j.at("prioritize");
    const std::string w = "prioritize";
    CheckKeys(p, w,
              {"scan", "hosts", "alerts", "budget_minutes", "alert_weeks"});
    ReadPath(p, "scan", c.prioritize.scan, w, base_dir);
    ReadPath(p, "hosts", c.prioritize.hosts, w, base_dir);
    ReadPath(p, "alerts", c.prioritize.alerts, w, base_dir);
    Read(p, "budget_minutes", c.prioritize.budget_minutes, w);
    if (p.contains("alert_weeks")) {
      std::vector<int> weeks;
      Read(p, "alert_weeks", weeks, w);
      if (weeks.size() != 2) Invalid(w + ".alert_weeks", "expected [first, last]");
      c.prioritize.alert_window = {weeks[0], weeks[1]};
    }
  }
  if (j.contains("simulate")) {
    const json& s = j.at("simulate");
    CheckKeys(s, "simulate", {"policy", "episodes"});
    Read(s, "policy", c.simulate.policy, "simulate");
    Read(s, "episodes", c.simulate.episodes, "simulate");
  }
  ValidateRunConfig(c);
  return c;
}

RunConfig LoadRunConfig(const fs::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorCode::kNotFound, "cannot open config " + path.string());
  }
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kParse, path.string() + ": " + e.what());
  }
  return ParseRunConfig(j, path.parent_path());
}

void ValidateRunConfig(const RunConfig& c) {
  ValidateEpisodeConfig(c.episode);
  ValidatePpoConfig(c.ppo);
  if (c.corpus.csv.empty()) {
    if (c.corpus.synthetic_size < 1) {
      Invalid("corpus.synthetic_size", "must be >= 1");
    }
    ValidateMix(c.corpus.mix, CategoryScheme{});
  }
  if (c.hidden.empty()) Invalid("policy.hidden", "needs at least one layer");
  for (int h : c.hidden) {
    if (h < 1) Invalid("policy.hidden", "layer widths must be >= 1");
  }
  const StdSchedule& s = c.std_schedule;
  if (!(s.floor >= 0.0) || !(s.initial >= s.floor) || !(s.decrement >= 0.0)) {
    Invalid("policy.std", "need initial >= floor >= 0 and decrement >= 0");
  }
  if (c.train.checkpoint_every_updates < 0) {
    Invalid("train.checkpoint_every_updates", "must be >= 0");
  }
  if (c.evaluate.episodes < 1) Invalid("evaluate.episodes", "must be >= 1");
  if (c.compare.episodes < 1) Invalid("compare.episodes", "must be >= 1");
  if (c.compare.bootstrap_resamples < 1) {
    Invalid("compare.bootstrap_resamples", "must be >= 1");
  }
  if (!(c.compare.confidence > 0.0 && c.compare.confidence < 1.0)) {
    Invalid("compare.confidence", "must lie in (0, 1)");
  }
  if (!(c.prioritize.budget_minutes >= 0.0)) {
    Invalid("prioritize.budget_minutes", "must be >= 0");
  }
  if (c.prioritize.alert_window.first > c.prioritize.alert_window.last) {
    Invalid("prioritize.alert_weeks", "first week after last week");
  }
  if (c.simulate.policy != "even" && c.simulate.policy != "full-immediate" &&
      c.simulate.policy != "checkpoint") {
    Invalid("simulate.policy",
            "expected even, full-immediate or checkpoint, got '" +
                c.simulate.policy + "'");
  }
  if (c.simulate.episodes < 1) Invalid("simulate.episodes", "must be >= 1");
}

json RunConfigJson(const RunConfig& c) {
  const EpisodeConfig& e = c.episode;
  const CorpusMix& m = c.corpus.mix;
  const PpoConfig& p = c.ppo;
  json j = {
      {"seed", c.seed},
      {"out_dir", c.out_dir.string()},
      {"episode",
       {{"weeks", e.weeks_per_episode},
        {"budget_minutes", e.episode_budget_minutes},
        {"pattern", e.pattern},
        {"random_pattern", e.random_pattern},
        {"regime_means", e.regime_means},
        {"state_rows", e.state_rows},
        {"max_mitigation_minutes", e.max_mitigation_scale},
        {"utilization_floor", e.utilization_floor},
        {"reward",
         {{"w1", e.reward.w1},
          {"w2", e.reward.w2},
          {"cost_per_minute", e.reward.cost_per_minute}}}}},
      {"prioritizer", {{"mode", std::string(SelectionModeName(c.selection_mode))}}},
      {"corpus",
       {{"csv", c.corpus.csv.string()},
        {"synthetic_size", c.corpus.synthetic_size},
        {"mix",
         {{"asset_criticality", m.asset_criticality},
          {"protection_level", m.protection_level},
          {"org_relevance", m.org_relevance},
          {"cvss_min", m.cvss_min},
          {"cvss_max", m.cvss_max},
          {"ids_flag_prob", m.ids_flag_prob},
          {"time_median", m.time_median},
          {"time_sigma", m.time_sigma},
          {"time_min", m.time_min},
          {"time_max", m.time_max},
          {"host_count", m.host_count}}}}},
      {"policy",
       {{"hidden", c.hidden},
        {"std",
         {{"initial", c.std_schedule.initial},
          {"floor", c.std_schedule.floor},
          {"decrement", c.std_schedule.decrement},
          {"decay_interval", c.std_schedule.decay_interval}}}}},
      {"ppo",
       {{"clip_eps", p.clip_eps},
        {"entropy_coef", p.entropy_coef},
        {"value_coef", p.value_coef},
        {"gamma", p.gamma},
        {"gae_lambda", p.gae_lambda},
        {"epochs_per_update", p.epochs_per_update},
        {"minibatch_size", p.minibatch_size},
        {"learning_rate", p.learning_rate},
        {"critic_learning_rate", p.critic_learning_rate},
        {"optimizer", p.optimizer == OptimizerKind::kAdam ? "adam" : "sgd"},
        {"momentum", p.momentum},
        {"max_grad_norm", p.max_grad_norm},
        {"rollout_steps", p.rollout_steps},
        {"max_train_steps", p.max_train_steps}}},
      {"train",
       {{"checkpoint_every_updates", c.train.checkpoint_every_updates}}},
      {"evaluate",
       {{"episodes", c.evaluate.episodes},
        {"checkpoint", c.evaluate.checkpoint.string()},
        {"write_trace", c.evaluate.write_trace}}},
      {"compare",
       {{"episodes", c.compare.episodes},
        {"full_immediate", c.compare.full_immediate},
        {"bootstrap_resamples", c.compare.bootstrap_resamples},
        {"confidence", c.compare.confidence}}},
      {"prioritize",
       {{"scan", c.prioritize.scan.string()},
        {"hosts", c.prioritize.hosts.string()},
        {"alerts", c.prioritize.alerts.string()},
        {"budget_minutes", c.prioritize.budget_minutes},
        {"alert_weeks",
         {c.prioritize.alert_window.first, c.prioritize.alert_window.last}}}},
      {"simulate",
       {{"policy", c.simulate.policy}, {"episodes", c.simulate.episodes}}}};
  return j;
}

std::shared_ptr<const std::vector<VulnRecord>> LoadCorpus(
    const RunConfig& config) {
  std::vector<RawVulnEntry> entries =
      config.corpus.csv.empty()
          ? GenerateSyntheticCorpus(config.corpus.synthetic_size,
                                    DeriveSeed(config.seed, "corpus"),
                                    config.corpus.mix)
          : ParseCorpus(config.corpus.csv);
  if (entries.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "corpus has no rows");
  }
  return std::make_shared<const std::vector<VulnRecord>>(
      BuildCorpusRecords(entries));
}

AllocationPolicy EvenAllocationPolicy(const EpisodeConfig& config) {
  const double share =
      config.episode_budget_minutes / config.weeks_per_episode;
  return [share](const Simulator& sim, const SystemState&) {
    return std::min(share, sim.state().pool_minutes);
  };
}

AllocationPolicy FullImmediatePolicy() {
  return [](const Simulator& sim, const SystemState&) {
    return sim.state().pool_minutes;
  };
}

AllocationPolicy DrlPolicy(std::shared_ptr<const PolicyParams> params) {
  return [params](const Simulator& sim, const SystemState& state) {
    const PolicyOutput out = PolicyForward(*params, state.Flatten());
    Rng unused(0);
    return SampleAction(out.mu, 0.0, sim.state().pool_minutes, unused)
        .allocated_minutes;
  };
}

EpisodeSummary RunEpisode(Simulator& sim, uint64_t episode_seed,
                          const AllocationPolicy& policy,
                          const Selector& selector,
                          std::vector<json>* trace) {
  EpisodeSummary summary;
  summary.episode_seed = episode_seed;
  SystemState state = sim.Reset(episode_seed);
  bool done = false;
  while (!done) {
    const double alloc = policy(sim, state);
    StepOutcome out = sim.Step(alloc, selector);
    const StepInfo& info = out.info;
    summary.total_reward += out.reward.total;
    summary.arrived += info.arrived;
    summary.mitigated += info.mitigated;
    summary.allocated.push_back(info.allocated);
    summary.used.push_back(info.used);
    summary.required.push_back(info.required_minutes);
    summary.critical_required.push_back(info.critical_required_minutes);
    summary.arrivals.push_back(info.arrivals);
    if (trace) trace->push_back(StepTraceJson(out));
    done = out.done;
    state = std::move(out.next_state);
  }
  return summary;
}

uint64_t EvalEpisodeSeed(uint64_t root, int episode) {
  return DeriveSeed(root, "eval-episode", static_cast<uint64_t>(episode));
}

PolicyReport SummarizePolicy(std::string name,
                             std::vector<EpisodeSummary> episodes,
                             const EpisodeConfig& config) {
  PolicyReport r;
  r.name = std::move(name);
  const size_t weeks = static_cast<size_t>(config.weeks_per_episode);
  r.mean_allocated.assign(weeks, 0.0);
  r.mean_required.assign(weeks, 0.0);
  r.mean_critical_required.assign(weeks, 0.0);
  const double n = static_cast<double>(episodes.size());
  for (const EpisodeSummary& e : episodes) {
    r.mean_reward += e.total_reward / n;
    r.arrived += e.arrived;
    r.mitigated += e.mitigated;
    for (size_t w = 0; w < weeks && w < e.allocated.size(); ++w) {
      r.mean_allocated[w] += e.allocated[w] / n;
      r.mean_required[w] += e.required[w] / n;
      r.mean_critical_required[w] += e.critical_required[w] / n;
    }
    double early = 0.0;
    for (size_t w = 0; w < 2 && w < e.allocated.size(); ++w) {
      early += e.allocated[w];
    }
    r.early_share.push_back(early / config.episode_budget_minutes);
  }
  r.critical_coverage = Ratio(static_cast<double>(r.mitigated.critical),
                              static_cast<double>(r.arrived.critical));
  r.critical_precision = Ratio(static_cast<double>(r.mitigated.critical),
                               static_cast<double>(r.mitigated.total));
  r.episodes = std::move(episodes);
  return r;
}

json PolicyReportJson(const PolicyReport& r) {
  const double early =
      r.early_share.empty()
          ? 0.0
          : std::accumulate(r.early_share.begin(), r.early_share.end(), 0.0) /
                static_cast<double>(r.early_share.size());
  return {{"policy", r.name},
          {"episodes", r.episodes.size()},
          {"mean_reward", r.mean_reward},
          {"arrived", CountsJson(r.arrived)},
          {"mitigated", CountsJson(r.mitigated)},
          {"critical_coverage", r.critical_coverage},
          {"critical_precision", r.critical_precision},
          {"mean_allocated", r.mean_allocated},
          {"mean_required", r.mean_required},
          {"mean_critical_required", r.mean_critical_required},
          {"mean_early_share", early}};
}

Interval PairedBootstrap(
    size_t n, const std::function<double(const std::vector<size_t>&)>& statistic,
    int resamples, double confidence, uint64_t seed) {
  if (n == 0) throw Error(ErrorCode::kInvalidArgument, "bootstrap on no data");
  std::vector<size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  Interval out;
  out.estimate = statistic(idx);
  Rng rng(seed);
  std::uniform_int_distribution<size_t> pick(0, n - 1);
  std::vector<double> stats;
  stats.reserve(static_cast<size_t>(resamples));
  for (int b = 0; b < resamples; ++b) {
    for (size_t& i : idx) i = pick(rng);
    stats.push_back(statistic(idx));
  }
  std::sort(stats.begin(), stats.end());
  const double alpha = (1.0 - confidence) / 2.0;
  auto quantile = [&](double q) {
    const double pos = q * static_cast<double>(stats.size() - 1);
    const size_t lo = static_cast<size_t>(std::floor(pos));
    const size_t hi = std::min(lo + 1, stats.size() - 1);
    return stats[lo] + (pos - static_cast<double>(lo)) * (stats[hi] - stats[lo]);
  };
  out.lower = quantile(alpha);
  out.upper = quantile(1.0 - alpha);
  return out;
}

ComparisonReport ComparePolicies(const RunConfig& config,
                                 std::shared_ptr<const PolicyParams> params) {
  const auto corpus = LoadCorpus(config);
  const int n = config.compare.episodes;
  ComparisonReport report;
  report.policies.push_back(SummarizePolicy(
      "drl", RunEpisodes(config, corpus, DrlPolicy(params), n, nullptr),
      config.episode));
  report.policies.push_back(SummarizePolicy(
      "even",
      RunEpisodes(config, corpus, EvenAllocationPolicy(config.episode), n,
                  nullptr),
      config.episode));
  if (config.compare.full_immediate) {
    report.policies.push_back(SummarizePolicy(
        "full-immediate",
        RunEpisodes(config, corpus, FullImmediatePolicy(), n, nullptr),
        config.episode));
  }
  const auto& drl = report.policies[0].episodes;
  const auto& even = report.policies[1].episodes;
  const auto& early = report.policies[0].early_share;
  const size_t count = drl.size();
  const int resamples = config.compare.bootstrap_resamples;
  const double conf = config.compare.confidence;
  report.reward_gain = PairedBootstrap(
      count,
      [&](const std::vector<size_t>& idx) {
        double sum = 0.0;
        for (size_t i : idx) sum += drl[i].total_reward - even[i].total_reward;
        return sum / static_cast<double>(idx.size());
      },
      resamples, conf, DeriveSeed(config.seed, "bootstrap", 0));
  report.coverage_gain = PairedBootstrap(
      count,
      [&](const std::vector<size_t>& idx) {
        double arrived = 0.0, d = 0.0, e = 0.0;
        for (size_t i : idx) {
          arrived += static_cast<double>(drl[i].arrived.critical);
          d += static_cast<double>(drl[i].mitigated.critical);
          e += static_cast<double>(even[i].mitigated.critical);
        }
        return Ratio(d, arrived) - Ratio(e, arrived);
      },
      resamples, conf, DeriveSeed(config.seed, "bootstrap", 1));
  report.early_share = PairedBootstrap(
      count,
      [&](const std::vector<size_t>& idx) {
        double sum = 0.0;
        for (size_t i : idx) sum += early[i];
        return sum / static_cast<double>(idx.size());
      },
      resamples, conf, DeriveSeed(config.seed, "bootstrap", 2));
  return report;
}

json ComparisonReportJson(const ComparisonReport& report) {
  auto interval = [](const Interval& i) {
    return json{{"estimate", i.estimate},
                {"lower", i.lower},
                {"upper", i.upper},
                {"excludes_zero", i.ExcludesZero()}};
  };
  json policies = json::array();
  for (const PolicyReport& p : report.policies) {
    policies.push_back(PolicyReportJson(p));
  }
  return {{"policies", std::move(policies)},
          {"drl_minus_even",
           {{"mean_reward", interval(report.reward_gain)},
            {"critical_coverage", interval(report.coverage_gain)}}},
          {"drl_early_share", interval(report.early_share)}};
}

void WriteWeeklySeries(std::ostream& out, const ComparisonReport& report) {
  out << "policy,week,mean_allocated,mean_required,mean_critical_required\n";
  for (const PolicyReport& p : report.policies) {
    for (size_t w = 0; w < p.mean_allocated.size(); ++w) {
      out << p.name << ',' << w << ',' << FormatDouble(p.mean_allocated[w])
          << ',' << FormatDouble(p.mean_required[w]) << ','
          << FormatDouble(p.mean_critical_required[w]) << '\n';
    }
  }
}

TrainResult Train(const RunConfig& config) {
  ValidateRunConfig(config);
  const auto corpus = LoadCorpus(config);
  const PpoConfig& ppo = config.ppo;
  TrainResult result;
  result.params = MakePolicy(config.state_dim(), config.hidden,
                             DeriveSeed(config.seed, "policy"),
                             config.std_schedule);
  PolicyParams& params = result.params;
  PpoTrainer trainer(params, ppo);
  Rng action_rng = MakeRng(config.seed, "actions");
  Rng minibatch_rng = MakeRng(config.seed, "minibatch");
  Simulator sim(config.episode, corpus);
  const Selector selector = MakeSelector(config.selection_mode);

  const bool write = !config.out_dir.empty();
  std::ofstream metrics;
  if (write) {
    fs::create_directories(config.out_dir);
    WriteFile(config.out_dir / "config.json", RunConfigJson(config).dump(2) + "\n");
    metrics.open(config.out_dir / "metrics.jsonl",
                 std::ios::binary | std::ios::trunc);
    if (!metrics) {
      throw Error(ErrorCode::kInvalidArgument,
                  "cannot write metrics in " + config.out_dir.string());
    }
  }

  uint64_t episode_index = 0;
  SystemState state =
      sim.Reset(DeriveSeed(config.seed, "train-episode", episode_index++));
  double episode_reward = 0.0;
  Trajectory batch;
  batch.state_dim = config.state_dim();
  std::vector<double> flat;
  while (result.env_steps < ppo.max_train_steps) {
    batch.Clear();
    const int64_t steps =
        std::min<int64_t>(ppo.rollout_steps, ppo.max_train_steps - result.env_steps);
    std::vector<double> finished;
    double alloc_fraction = 0.0;
    bool last_done = false;
    const double rollout_std = params.action_std;
    for (int64_t t = 0; t < steps; ++t) {
      flat = state.Flatten();
      const PolicyOutput out = PolicyForward(params, flat);
      const double pool = sim.state().pool_minutes;
      const ActionSample action =
          SampleAction(out.mu, params.action_std, pool, action_rng);
      alloc_fraction += Ratio(action.allocated_minutes, pool);
      StepOutcome step = sim.Step(action.allocated_minutes, selector);
      const double reward = step.reward.total;
      if (!std::isfinite(reward) || !std::isfinite(out.value)) {
        throw Error(ErrorCode::kNonFinite,
                    "non-finite training signal at env step " +
                        std::to_string(result.env_steps) + " (reward " +
                        std::to_string(reward) + ", value " +
                        std::to_string(out.value) + ")");
      }
      batch.Add(flat, action.raw, action.log_prob, reward, out.value, step.done);
      episode_reward += reward;
      last_done = step.done;
      ++result.env_steps;
      if (step.done) {
        finished.push_back(episode_reward);
        episode_reward = 0.0;
        state = sim.Reset(
            DeriveSeed(config.seed, "train-episode", episode_index++));
      } else {
        state = std::move(step.next_state);
      }
    }
    const double last_value =
        last_done ? 0.0 : PolicyForward(params, state.Flatten()).value;
    GaeResult gae = ComputeGae(batch.rewards, batch.values, batch.dones,
                               ppo.gamma, ppo.gae_lambda, last_value);
    batch.advantages = std::move(gae.advantages);
    batch.returns = std::move(gae.returns);
    const UpdateDiagnostics diag = trainer.Update(params, batch, minibatch_rng);
    ++result.updates;
    // Decays happen between rollouts so every sample in a batch shares the
    // std its log-probability was computed with.
    DecayStd(params, result.env_steps);

    json line = {{"update", result.updates},
                 {"step", result.env_steps},
                 {"episodes", finished.size()},
                 {"mean_episode_reward", nullptr},
                 {"mean_allocated_fraction",
                  alloc_fraction / static_cast<double>(steps)},
                 {"actor_loss", diag.mean.actor_loss},
                 {"critic_loss", diag.mean.critic_loss},
                 {"entropy", diag.mean.entropy},
                 {"approx_kl", diag.mean.approx_kl},
                 {"clip_fraction", diag.mean.clip_fraction},
                 {"action_std", rollout_std}};
    if (!finished.empty()) {
      line["mean_episode_reward"] =
          std::accumulate(finished.begin(), finished.end(), 0.0) /
          static_cast<double>(finished.size());
    }
    result.metrics.push_back(line.dump());
    if (write) {
      metrics << result.metrics.back() << '\n' << std::flush;
      const int every = config.train.checkpoint_every_updates;
      if (every > 0 && result.updates % every == 0) {
        std::ostringstream name;
        name << "policy_" << result.env_steps << ".ckpt";
        SaveCheckpoint(params, config.out_dir / "checkpoints" / name.str());
      }
    }
  }
  if (write) SaveCheckpoint(params, config.out_dir / "policy.ckpt");
  return result;
}

PolicyParams LoadPolicyFor(const RunConfig& config, const fs::path& checkpoint) {
  return LoadCheckpoint(checkpoint, LayerSizes(config));
}

PolicyReport Evaluate(const RunConfig& config) {
  ValidateRunConfig(config);
  auto params = std::make_shared<const PolicyParams>(
      LoadPolicyFor(config, CheckpointPath(config)));
  const auto corpus = LoadCorpus(config);
  std::vector<json> trace;
  PolicyReport report = SummarizePolicy(
      "drl",
      RunEpisodes(config, corpus, DrlPolicy(params), config.evaluate.episodes,
                  config.evaluate.write_trace ? &trace : nullptr),
      config.episode);
  if (!config.out_dir.empty()) {
    WriteFile(config.out_dir / "evaluate.json",
              PolicyReportJson(report).dump(2) + "\n");
    if (config.evaluate.write_trace) {
      WriteFile(config.out_dir / "trace.jsonl", JsonLines(trace));
    }
  }
  return report;
}

ComparisonReport Compare(const RunConfig& config) {
  ValidateRunConfig(config);
  auto params = std::make_shared<const PolicyParams>(
      LoadPolicyFor(config, CheckpointPath(config)));
  ComparisonReport report = ComparePolicies(config, params);
  if (!config.out_dir.empty()) {
    WriteFile(config.out_dir / "compare.json",
              ComparisonReportJson(report).dump(2) + "\n");
    std::ostringstream series;
    WriteWeeklySeries(series, report);
    WriteFile(config.out_dir / "weekly_series.csv", series.str());
  }
  return report;
}

PrioritizeResult Prioritize(const RunConfig& config) {
  ValidateRunConfig(config);
  const PrioritizeOptions& opt = config.prioritize;
  if (opt.scan.empty() || opt.hosts.empty()) {
    throw Error(ErrorCode::kInvalidArgument,
                "prioritize needs both a scan and a hosts file");
  }
  const std::vector<ScanRow> scans = ParseScanReport(opt.scan);
  const std::vector<HostInventoryRow> hosts = ParseHostInventory(opt.hosts);
  const std::vector<AlertLogRow> alerts =
      opt.alerts.empty() ? std::vector<AlertLogRow>{} : ParseAlertLog(opt.alerts);
  PrioritizeResult result;
  result.entries = JoinSources(scans, hosts, alerts, opt.alert_window);
  result.records.reserve(result.entries.size());
  for (size_t i = 0; i < result.entries.size(); ++i) {
    result.records.push_back(
        BuildRecord(result.entries[i], 0, static_cast<int64_t>(i)));
  }
  result.selection = MakeSelector(config.selection_mode)(MakeSelectionProblem(
      result.records, opt.budget_minutes, config.episode.utilization_floor));
  if (!config.out_dir.empty()) {
    std::ostringstream csv;
    WriteSelectionCsv(csv, result);
    WriteFile(config.out_dir / "selection.csv", csv.str());
    WriteFile(config.out_dir / "summary.json",
              SelectionSummaryJson(config, result).dump(2) + "\n");
  }
  return result;
}

void WriteSelectionCsv(std::ostream& out, const PrioritizeResult& result) {
  out << "uid,cve_id,host_id,value,time\n";
  for (int64_t uid : result.selection.chosen_uids) {
    const size_t i = static_cast<size_t>(uid);
    const RawVulnEntry& e = result.entries[i];
    const VulnRecord& r = result.records[i];
    out << uid << ',' << QuoteCsv(e.cve_id) << ',' << QuoteCsv(e.host_id) << ','
        << FormatDouble(r.value()) << ','
        << FormatDouble(r.mitigation_minutes()) << '\n';
  }
}

json SelectionSummaryJson(const RunConfig& config,
                          const PrioritizeResult& result) {
  const SelectionResult& s = result.selection;
  double minutes = 0.0;
  for (int64_t uid : s.chosen_uids) {
    minutes += result.records[static_cast<size_t>(uid)].mitigation_minutes();
  }
  return {{"mode", std::string(SelectionModeName(config.selection_mode))},
          {"budget_minutes", config.prioritize.budget_minutes},
          {"utilization_floor", config.episode.utilization_floor},
          {"candidates", result.records.size()},
          {"selected", s.chosen_uids.size()},
          {"objective", s.objective},
          {"total_value", s.total_value},
          {"total_time", s.total_time},
          {"total_minutes", minutes},
          {"floor_relaxed", s.floor_relaxed},
          {"iterations", s.iterations}};
}

PolicyReport Simulate(const RunConfig& config) {
  ValidateRunConfig(config);
  const auto corpus = LoadCorpus(config);
  AllocationPolicy policy;
  if (config.simulate.policy == "even") {
    policy = EvenAllocationPolicy(config.episode);
  } else if (config.simulate.policy == "full-immediate") {
    policy = FullImmediatePolicy();
  } else {
    policy = DrlPolicy(std::make_shared<const PolicyParams>(
        LoadPolicyFor(config, CheckpointPath(config))));
  }
  std::vector<json> trace;
  PolicyReport report = SummarizePolicy(
      config.simulate.policy,
      RunEpisodes(config, corpus, policy, config.simulate.episodes, &trace),
      config.episode);
  if (!config.out_dir.empty()) {
    WriteFile(config.out_dir / "trace.jsonl", JsonLines(trace));
    WriteFile(config.out_dir / "simulate.json",
              PolicyReportJson(report).dump(2) + "\n");
  }
  return report;
}

}  // namespace vulntriage
