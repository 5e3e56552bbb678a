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

// Vulnerability selection under a time budget.
//
// The primary model picks the subset with the highest *average* value whose
// total mitigation time fits the allocated budget. A pure average objective is
// maximized by the single best item, so an optional utilization floor `beta`
// additionally requires the chosen set to consume at least beta * budget
// minutes. When no subset can reach the floor, the floor is lowered to
// beta * (largest achievable time under the budget) and `floor_relaxed` is set.
//
// Mitigation times are rounded up to whole minutes and the budget is rounded
// down, so every solver works on exact integer ticks.
//
// Ties between sets with equal average (within kTieTolerance) go to the larger
// total value, then to the lexicographically smallest sorted uid list.

#ifndef VULNTRIAGE_PRIORITIZER_H_
#define VULNTRIAGE_PRIORITIZER_H_

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vulntriage/core_model.h"

namespace vulntriage {

inline constexpr double kTieTolerance = 1e-9;

struct SelectionItem {
  int64_t uid = 0;
  double value = 0.0;  // sum of the attribute vector
  double time = 1.0;   // minutes
};

struct SelectionProblem {
  std::vector<SelectionItem> items;
  double budget_minutes = 0.0;
  double utilization_floor = 0.0;
};

struct SelectionResult {
  std::vector<int64_t> chosen_uids;  // ascending
  double objective = 0.0;            // average value, 0 when empty
  double total_time = 0.0;           // whole-minute ticks
  double total_value = 0.0;
  bool floor_relaxed = false;
  int iterations = 0;

  bool Contains(int64_t uid) const;
};

SelectionProblem MakeSelectionProblem(std::span<const VulnRecord> records,
                                      double budget_minutes,
                                      double utilization_floor);

// Throws on negative values, non-positive times, duplicate uids, negative
// budget or beta outside [0, 1].
void ValidateProblem(const SelectionProblem& problem);

// Dinkelbach iteration: lambda_{k+1} = V(X_k) / |X_k| where X_k maximizes
// sum(value - lambda_k) over the feasible sets, each subproblem solved exactly
// by dynamic programming over time ticks. Stops once that maximum is <= tol.
SelectionResult DinkelbachSolve(const SelectionProblem& problem,
                                double tol = 1e-12);

// The max-average model; solved with DinkelbachSolve.
SelectionResult SelectMaxAverage(const SelectionProblem& problem);

// Exhaustive enumeration with the same feasibility and tie rules as
// SelectMaxAverage. At most kMaxBruteForceItems items.
inline constexpr int kMaxBruteForceItems = 20;
SelectionResult BruteForceSelect(const SelectionProblem& problem);

// Total-value knapsack baseline (ignores the utilization floor). The DP table
// has items x (budget_ticks + 1) cells; larger tables are rejected.
inline constexpr int64_t kDefaultKnapsackCellLimit = 64'000'000;
SelectionResult KnapsackMaxTotal(const SelectionProblem& problem,
                                 int64_t cell_limit = kDefaultKnapsackCellLimit);

enum class SelectionMode { kMaxAverage, kMaxTotal };

SelectionMode ParseSelectionMode(std::string_view name);
std::string_view SelectionModeName(SelectionMode mode);

using Selector = std::function<SelectionResult(const SelectionProblem&)>;

Selector MakeSelector(SelectionMode mode);

}  // namespace vulntriage

#endif  // VULNTRIAGE_PRIORITIZER_H_
