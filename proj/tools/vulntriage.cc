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

// Command-line front end: train | evaluate | compare | prioritize | simulate.
// Failures print {"error": {"code": ..., "message": ...}} on stderr.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "vulntriage/error.h"
#include "vulntriage/harness.h"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using vulntriage::RunConfig;

struct CommonFlags {
  std::string config;
  std::optional<uint64_t> seed;
  std::string out_dir;
};

void AddCommon(CLI::App* app, CommonFlags& flags) {
  app->add_option("--config", flags.config, "JSON run config");
  app->add_option("--seed", flags.seed, "root seed (overrides the config)");
  app->add_option("--out-dir", flags.out_dir,
                  "output directory (overrides the config)");
}

RunConfig Resolve(const CommonFlags& flags) {
  RunConfig config = flags.config.empty()
                         ? vulntriage::ParseRunConfig(json::object())
                         : vulntriage::LoadRunConfig(flags.config);
  if (flags.seed) config.seed = *flags.seed;
  if (!flags.out_dir.empty()) config.out_dir = flags.out_dir;
  return config;
}

void PrintJson(const json& j) { std::cout << j.dump(2) << '\n'; }

int Fail(std::string_view code, const std::string& message) {
  std::cerr << json{{"error", {{"code", code}, {"message", message}}}}.dump()
            << '\n';
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Vulnerability triage: resource allocation and selection"};
  app.require_subcommand(1);

  CommonFlags train_flags, eval_flags, compare_flags, prio_flags, sim_flags;
  CLI::App* train = app.add_subcommand("train", "train the allocation policy");
  AddCommon(train, train_flags);
  std::optional<int64_t> max_steps;
  train->add_option("--steps", max_steps, "override ppo.max_train_steps");

  CLI::App* evaluate =
      app.add_subcommand("evaluate", "evaluate a checkpoint with std 0");
  AddCommon(evaluate, eval_flags);
  std::string eval_ckpt;
  std::optional<int> eval_episodes;
  evaluate->add_option("--checkpoint", eval_ckpt, "policy checkpoint");
  evaluate->add_option("--episodes", eval_episodes, "episode count");

  CLI::App* compare =
      app.add_subcommand("compare", "compare a checkpoint with baselines");
  AddCommon(compare, compare_flags);
  std::string compare_ckpt;
  std::optional<int> compare_episodes;
  compare->add_option("--checkpoint", compare_ckpt, "policy checkpoint");
  compare->add_option("--episodes", compare_episodes, "paired episode count");

  CLI::App* prioritize =
      app.add_subcommand("prioritize", "one-shot selection from scan files");
  AddCommon(prioritize, prio_flags);
  std::string scan, hosts, alerts, mode;
  std::optional<double> budget, beta;
  prioritize->add_option("--scan", scan, "scan report CSV");
  prioritize->add_option("--hosts", hosts, "host inventory CSV");
  prioritize->add_option("--alerts", alerts, "IDS alert log CSV");
  prioritize->add_option("--budget", budget, "budget in minutes");
  prioritize->add_option("--mode", mode, "max-average | max-total");
  prioritize->add_option("--beta", beta, "utilization floor in [0, 1]");

  CLI::App* simulate =
      app.add_subcommand("simulate", "run baseline episodes and emit traces");
  AddCommon(simulate, sim_flags);
  std::string sim_policy, sim_ckpt;
  std::optional<int> sim_episodes;
  simulate->add_option("--policy", sim_policy,
                       "even | full-immediate | checkpoint");
  simulate->add_option("--checkpoint", sim_ckpt, "policy checkpoint");
  simulate->add_option("--episodes", sim_episodes, "episode count");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return Fail("usage", e.what());
  }

  try {
    if (*train) {
      RunConfig config = Resolve(train_flags);
      if (max_steps) config.ppo.max_train_steps = *max_steps;
      const vulntriage::TrainResult result = vulntriage::Train(config);
      PrintJson({{"env_steps", result.env_steps},
                 {"updates", result.updates},
                 {"checkpoint", (config.out_dir / "policy.ckpt").string()},
                 {"metrics", (config.out_dir / "metrics.jsonl").string()}});
    } else if (*evaluate) {
      RunConfig config = Resolve(eval_flags);
      if (!eval_ckpt.empty()) config.evaluate.checkpoint = eval_ckpt;
      if (eval_episodes) config.evaluate.episodes = *eval_episodes;
      PrintJson(vulntriage::PolicyReportJson(vulntriage::Evaluate(config)));
    } else if (*compare) {
      RunConfig config = Resolve(compare_flags);
      if (!compare_ckpt.empty()) config.evaluate.checkpoint = compare_ckpt;
      if (compare_episodes) config.compare.episodes = *compare_episodes;
      PrintJson(vulntriage::ComparisonReportJson(vulntriage::Compare(config)));
    } else if (*prioritize) {
      RunConfig config = Resolve(prio_flags);
      if (!scan.empty()) config.prioritize.scan = scan;
      if (!hosts.empty()) config.prioritize.hosts = hosts;
      if (!alerts.empty()) config.prioritize.alerts = alerts;
      if (budget) config.prioritize.budget_minutes = *budget;
      if (!mode.empty()) {
        config.selection_mode = vulntriage::ParseSelectionMode(mode);
      }
      if (beta) config.episode.utilization_floor = *beta;
      const vulntriage::PrioritizeResult result = vulntriage::Prioritize(config);
      PrintJson(vulntriage::SelectionSummaryJson(config, result));
    } else if (*simulate) {
      RunConfig config = Resolve(sim_flags);
      if (!sim_policy.empty()) config.simulate.policy = sim_policy;
      if (!sim_ckpt.empty()) config.evaluate.checkpoint = sim_ckpt;
      if (sim_episodes) config.simulate.episodes = *sim_episodes;
      PrintJson(vulntriage::PolicyReportJson(vulntriage::Simulate(config)));
    }
  } catch (const vulntriage::Error& e) {
    return Fail(vulntriage::ErrorCodeName(e.code()), e.what());
  } catch (const std::exception& e) {
    return Fail("internal", e.what());
  }
  return 0;
}
