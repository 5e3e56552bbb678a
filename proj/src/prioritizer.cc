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

#include "vulntriage/prioritizer.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "vulntriage/error.h"

namespace vulntriage {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr int kMaxDinkelbachIterations = 200;

// Problem in integer ticks with items sorted by uid.
struct Prepared {
  std::vector<SelectionItem> items;
  std::vector<int64_t> ticks;
  int64_t cap = 0;    // largest admissible total ticks
  int64_t floor = 1;  // smallest admissible total ticks (>= 1: nonempty)
  bool relaxed = false;
  bool feasible = false;
};

int64_t CeilTicks(double minutes) {
  return std::max<int64_t>(1, static_cast<int64_t>(std::ceil(minutes - 1e-9)));
}

// Largest subset sum of `ticks` not exceeding `cap`.
int64_t MaxSubsetSum(const std::vector<int64_t>& ticks, int64_t cap) {
  const size_t words = static_cast<size_t>(cap / 64 + 1);
  std::vector<uint64_t> reach(words, 0);
  reach[0] = 1;
  for (int64_t t : ticks) {
    if (t > cap) continue;
    const size_t word_shift = static_cast<size_t>(t / 64);
    const unsigned bit_shift = static_cast<unsigned>(t % 64);
    for (size_t w = words; w-- > word_shift;) {
      const size_t src = w - word_shift;
      uint64_t shifted = reach[src] << bit_shift;
      if (bit_shift != 0 && src > 0) shifted |= reach[src - 1] >> (64 - bit_shift);
      reach[w] |= shifted;
    }
  }
  for (int64_t s = cap; s > 0; --s) {
    if (reach[static_cast<size_t>(s / 64)] >> (s % 64) & 1ULL) return s;
  }
  return 0;
}

Prepared Prepare(const SelectionProblem& problem) {
  ValidateProblem(problem);
  Prepared p;
  p.items = problem.items;
  std::sort(p.items.begin(), p.items.end(),
            [](const SelectionItem& a, const SelectionItem& b) {
              return a.uid < b.uid;
            });
  p.ticks.reserve(p.items.size());
  int64_t total_ticks = 0;
  for (const SelectionItem& it : p.items) {
    p.ticks.push_back(CeilTicks(it.time));
    total_ticks += p.ticks.back();
  }
  const double budget = problem.budget_minutes;
  p.cap = std::min<int64_t>(
      total_ticks,
      static_cast<int64_t>(std::floor(std::min(budget, 9.0e15) + 1e-9)));
  const int64_t reachable = p.cap >= 1 ? MaxSubsetSum(p.ticks, p.cap) : 0;
  if (reachable < 1) return p;
  p.feasible = true;
  const double beta = problem.utilization_floor;
  p.floor = std::max<int64_t>(
      1, static_cast<int64_t>(std::ceil(beta * budget - 1e-9)));
  if (p.floor > reachable) {
    p.relaxed = true;
    p.floor = std::max<int64_t>(
        1, static_cast<int64_t>(
               std::ceil(beta * static_cast<double>(reachable) - 1e-9)));
  }
  return p;
}

SelectionResult Summarize(const Prepared& p, const std::vector<size_t>& idx) {
  SelectionResult r;
  r.floor_relaxed = p.relaxed;
  for (size_t i : idx) {
    r.chosen_uids.push_back(p.items[i].uid);
    r.total_value += p.items[i].value;
    r.total_time += static_cast<double>(p.ticks[i]);
  }
  if (!idx.empty()) r.objective = r.total_value / static_cast<double>(idx.size());
  return r;
}

// Primary then secondary key, each compared with kTieTolerance.
struct Score {
  double primary = kNegInf;
  double secondary = 0.0;
};

bool Better(const Score& a, const Score& b) {
  if (a.primary > b.primary + kTieTolerance) return true;
  if (a.primary < b.primary - kTieTolerance) return false;
  return a.secondary > b.secondary + kTieTolerance;
}

// max over feasible sets of sum(value - lambda); also the ratio of an argmax.
struct ParametricOptimum {
  double excess = kNegInf;
  double ratio = 0.0;
};

ParametricOptimum SolveParametric(const Prepared& p, double lambda) {
  struct Cell {
    double sum;
    int64_t count;
  };
  const size_t width = static_cast<size_t>(p.cap) + 1;
  static thread_local std::vector<Cell> best;
  best.assign(width, Cell{kNegInf, 0});
  best[0] = {0.0, 0};
  int64_t filled = 0;
  for (size_t j = 0; j < p.items.size(); ++j) {
    const int64_t t = p.ticks[j];
    if (t > p.cap) continue;
    const double c = p.items[j].value - lambda;
    filled = std::min(p.cap, filled + t);
    for (int64_t w = filled; w >= t; --w) {
      const Cell& from = best[static_cast<size_t>(w - t)];
      if (from.sum == kNegInf) continue;
      const double cand = from.sum + c;
      Cell& to = best[static_cast<size_t>(w)];
      if (cand > to.sum) to = {cand, from.count + 1};
    }
  }
  ParametricOptimum out;
  for (int64_t w = p.floor; w <= p.cap; ++w) {
    const Cell& cell = best[static_cast<size_t>(w)];
    if (cell.count > 0 && cell.sum > out.excess) {
      out.excess = cell.sum;
      out.ratio = lambda + cell.sum / static_cast<double>(cell.count);
    }
  }
  return out;
}

// Among feasible sets, maximizes (sum(value - lambda), total value) and
// returns the lexicographically smallest uid list attaining that optimum.
std::vector<size_t> SelectWithTieBreak(const Prepared& p, double lambda) {
  const size_t n = p.items.size();
  const size_t width = static_cast<size_t>(p.cap) + 1;
  // suffix[j * width + w]: best over items j..n-1 with exactly w ticks.
  static thread_local std::vector<Score> suffix;
  suffix.assign((n + 1) * width, Score{});
  suffix[n * width + 0] = {0.0, 0.0};
  for (size_t j = n; j-- > 0;) {
    const Score* next = &suffix[(j + 1) * width];
    Score* cur = &suffix[j * width];
    std::copy(next, next + width, cur);
    const int64_t t = p.ticks[j];
    if (t > p.cap) continue;
    const double c = p.items[j].value - lambda;
    const double v = p.items[j].value;
    for (size_t w = static_cast<size_t>(t); w < width; ++w) {
      const Score& from = next[w - static_cast<size_t>(t)];
      if (from.primary == kNegInf) continue;
      const Score cand{from.primary + c, from.secondary + v};
      if (Better(cand, cur[w])) cur[w] = cand;
    }
  }
  Score target;
  for (int64_t w = p.floor; w <= p.cap; ++w) {
    const Score& s = suffix[static_cast<size_t>(w)];
    if (s.primary != kNegInf && Better(s, target)) target = s;
  }
  if (target.primary == kNegInf) {
    throw Error(ErrorCode::kInternal, "tie-break pass found no feasible set");
  }

  std::vector<size_t> chosen;
  Score acc{0.0, 0.0};
  int64_t acc_w = 0;
  for (size_t j = 0; j < n; ++j) {
    if (!chosen.empty() && acc_w >= p.floor && !Better(target, acc)) break;
    const int64_t t = p.ticks[j];
    const int64_t base = acc_w + t;
    if (base > p.cap) continue;
    const Score with{acc.primary + (p.items[j].value - lambda),
                     acc.secondary + p.items[j].value};
    const Score* next = &suffix[(j + 1) * width];
    bool attainable = false;
    for (int64_t rest = std::max<int64_t>(0, p.floor - base);
         rest <= p.cap - base; ++rest) {
      const Score& tail = next[static_cast<size_t>(rest)];
      if (tail.primary == kNegInf) continue;
      const Score total{with.primary + tail.primary,
                        with.secondary + tail.secondary};
      if (!Better(target, total)) {
        attainable = true;
        break;
      }
    }
    if (attainable) {
      chosen.push_back(j);
      acc = with;
      acc_w = base;
    }
  }
  if (chosen.empty() || acc_w < p.floor || acc_w > p.cap) {
    throw Error(ErrorCode::kInternal, "tie-break reconstruction failed");
  }
  return chosen;
}

bool LexLess(const std::vector<int64_t>& a, const std::vector<int64_t>& b) {
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

}  // namespace

bool SelectionResult::Contains(int64_t uid) const {
  return std::binary_search(chosen_uids.begin(), chosen_uids.end(), uid);
}

SelectionProblem MakeSelectionProblem(std::span<const VulnRecord> records,
                                      double budget_minutes,
                                      double utilization_floor) {
  SelectionProblem problem;
  problem.budget_minutes = budget_minutes;
  problem.utilization_floor = utilization_floor;
  problem.items.reserve(records.size());
  for (const VulnRecord& r : records) {
    problem.items.push_back({r.uid(), r.value(), r.mitigation_minutes()});
  }
  return problem;
}

void ValidateProblem(const SelectionProblem& problem) {
  if (!(problem.budget_minutes >= 0.0) || std::isnan(problem.budget_minutes)) {
    throw Error(ErrorCode::kInvalidArgument, "budget must be >= 0");
  }
  if (!(problem.utilization_floor >= 0.0 && problem.utilization_floor <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument,
                "utilization floor must lie in [0, 1]");
  }
  std::unordered_set<int64_t> seen;
  for (const SelectionItem& it : problem.items) {
    if (!(it.value >= 0.0) || !std::isfinite(it.value)) {
      throw Error(ErrorCode::kInvalidArgument,
                  "item " + std::to_string(it.uid) + ": value must be >= 0");
    }
    if (!(it.time > 0.0) || !std::isfinite(it.time)) {
      throw Error(ErrorCode::kInvalidArgument,
                  "item " + std::to_string(it.uid) + ": time must be > 0");
    }
    if (!seen.insert(it.uid).second) {
      throw Error(ErrorCode::kInvalidArgument,
                  "duplicate uid " + std::to_string(it.uid));
    }
  }
}

SelectionResult DinkelbachSolve(const SelectionProblem& problem, double tol) {
  if (!(tol > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "tolerance must be > 0");
  }
  const Prepared p = Prepare(problem);
  if (!p.feasible) {
    SelectionResult empty;
    return empty;
  }
  double lambda = 0.0;
  int iterations = 0;
  while (true) {
    ++iterations;
    const ParametricOptimum opt = SolveParametric(p, lambda);
    if (opt.excess == kNegInf) {
      throw Error(ErrorCode::kInternal, "parametric subproblem infeasible");
    }
    if (opt.excess <= tol) {
      lambda = std::max(lambda, opt.ratio);
      break;
    }
    if (iterations >= kMaxDinkelbachIterations) {
      throw Error(ErrorCode::kInternal,
                  "Dinkelbach iteration did not converge");
    }
    lambda = opt.ratio;
  }
  SelectionResult r = Summarize(p, SelectWithTieBreak(p, lambda));
  r.iterations = iterations;
  return r;
}

SelectionResult SelectMaxAverage(const SelectionProblem& problem) {
  return DinkelbachSolve(problem);
}

SelectionResult BruteForceSelect(const SelectionProblem& problem) {
  if (problem.items.size() > static_cast<size_t>(kMaxBruteForceItems)) {
    throw Error(ErrorCode::kInvalidArgument,
                "brute force limited to " + std::to_string(kMaxBruteForceItems) +
                    " items");
  }
  const Prepared p = Prepare(problem);
  if (!p.feasible) return SelectionResult{};
  const size_t n = p.items.size();
  bool have = false;
  double best_avg = 0.0;
  double best_total = 0.0;
  std::vector<int64_t> best_uids;
  std::vector<size_t> best_idx;
  std::vector<int64_t> uids;
  for (uint64_t mask = 1; mask < (uint64_t{1} << n); ++mask) {
    int64_t ticks = 0;
    double total = 0.0;
    int count = 0;
    for (size_t i = 0; i < n; ++i) {
      if (mask >> i & 1) {
        ticks += p.ticks[i];
        total += p.items[i].value;
        ++count;
      }
    }
    if (ticks < p.floor || ticks > p.cap) continue;
    const double avg = total / count;
    bool better = !have;
    if (have) {
      if (avg > best_avg + kTieTolerance) {
        better = true;
      } else if (avg >= best_avg - kTieTolerance) {
        if (total > best_total + kTieTolerance) {
          better = true;
        } else if (total >= best_total - kTieTolerance) {
          uids.clear();
          for (size_t i = 0; i < n; ++i) {
            if (mask >> i & 1) uids.push_back(p.items[i].uid);
          }
          better = LexLess(uids, best_uids);
        }
      }
    }
    if (better) {
      have = true;
      best_avg = avg;
      best_total = total;
      best_idx.clear();
      best_uids.clear();
      for (size_t i = 0; i < n; ++i) {
        if (mask >> i & 1) {
          best_idx.push_back(i);
          best_uids.push_back(p.items[i].uid);
        }
      }
    }
  }
  return Summarize(p, best_idx);
}

SelectionResult KnapsackMaxTotal(const SelectionProblem& problem,
                                 int64_t cell_limit) {
  SelectionProblem relaxed = problem;
  relaxed.utilization_floor = 0.0;
  const Prepared p = Prepare(relaxed);
  if (!p.feasible) return SelectionResult{};
  const size_t n = p.items.size();
  const size_t width = static_cast<size_t>(p.cap) + 1;
  if (static_cast<double>(n) * static_cast<double>(width) >
      static_cast<double>(cell_limit)) {
    std::ostringstream msg;
    msg << "knapsack table of " << n << " x " << width
        << " cells exceeds the limit of " << cell_limit
        << "; use coarser time ticks or a smaller budget";
    throw Error(ErrorCode::kResourceLimit, msg.str());
  }
  std::vector<double> best(width, 0.0);
  std::vector<uint8_t> take(n * width, 0);
  for (size_t j = 0; j < n; ++j) {
    const size_t t = static_cast<size_t>(p.ticks[j]);
    if (t >= width) continue;
    const double v = p.items[j].value;
    for (size_t w = width - 1; w >= t; --w) {
      const double cand = best[w - t] + v;
      if (cand > best[w] + kTieTolerance) {
        best[w] = cand;
        take[j * width + w] = 1;
      }
      if (w == t) break;
    }
  }
  std::vector<size_t> chosen;
  size_t w = width - 1;
  for (size_t j = n; j-- > 0;) {
    if (take[j * width + w]) {
      chosen.push_back(j);
      w -= static_cast<size_t>(p.ticks[j]);
    }
  }
  std::reverse(chosen.begin(), chosen.end());
  SelectionResult r = Summarize(p, chosen);
  r.floor_relaxed = false;
  return r;
}

SelectionMode ParseSelectionMode(std::string_view name) {
  if (name == "max-average") return SelectionMode::kMaxAverage;
  if (name == "max-total") return SelectionMode::kMaxTotal;
  throw Error(ErrorCode::kInvalidArgument,
              "unknown prioritizer mode '" + std::string(name) +
                  "'; expected max-average or max-total");
}

std::string_view SelectionModeName(SelectionMode mode) {
  return mode == SelectionMode::kMaxAverage ? "max-average" : "max-total";
}

Selector MakeSelector(SelectionMode mode) {
  if (mode == SelectionMode::kMaxTotal) {
    return [](const SelectionProblem& p) { return KnapsackMaxTotal(p); };
  }
  return [](const SelectionProblem& p) { return SelectMaxAverage(p); };
}

}  // namespace vulntriage
