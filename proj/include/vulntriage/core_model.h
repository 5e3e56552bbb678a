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

// Domain types shared by every module, plus the quantization rules that turn
// raw scan/host/IDS fields into the attribute vectors used for scoring.

#ifndef VULNTRIAGE_CORE_MODEL_H_
#define VULNTRIAGE_CORE_MODEL_H_

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace vulntriage {

// Asset criticality, protection level, organizational relevance, CVSS, IDS.
inline constexpr int kNumAttributes = 5;
// Attributes plus the normalized mitigation-time column.
inline constexpr int kStateColumns = kNumAttributes + 1;
// Records whose mean attribute value reaches this are considered critical.
inline constexpr double kCriticalThreshold = 0.75;

struct RawVulnEntry {
  std::string host_id;
  std::string cve_id;
  double cvss_raw = 1.0;
  std::string asset_criticality_cat;
  std::string protection_level_cat;
  std::string org_relevance_cat;
  bool ids_flagged = false;
  double mitigation_minutes = 1.0;

  bool operator==(const RawVulnEntry&) const = default;
};

// Ordered category lists, highest priority first. A host with a *low* level
// of protection is the more urgent one, so that list is inverted.
struct CategoryScheme {
  std::vector<std::string> asset_criticality = {"high", "medium", "low"};
  std::vector<std::string> protection_level = {"low", "medium", "high"};
  std::vector<std::string> org_relevance = {"high", "medium", "low"};
};

struct AttributeVector {
  double asset_criticality = 0.0;
  double protection_level = 0.0;
  double org_relevance = 0.0;
  double cvss_norm = 0.0;
  double ids_flag = 0.0;

  std::array<double, kNumAttributes> AsArray() const {
    return {asset_criticality, protection_level, org_relevance, cvss_norm,
            ids_flag};
  }
  double Sum() const {
    return asset_criticality + protection_level + org_relevance + cvss_norm +
           ids_flag;
  }

  bool operator==(const AttributeVector&) const = default;
};

// One consolidated vulnerability instance. Immutable after construction.
class VulnRecord {
 public:
  VulnRecord(int64_t uid, const AttributeVector& attrs,
             double mitigation_minutes, int arrival_step,
             std::string host_id = {}, std::string cve_id = {});

  int64_t uid() const { return uid_; }
  const AttributeVector& attrs() const { return attrs_; }
  double mitigation_minutes() const { return mitigation_minutes_; }
  int arrival_step() const { return arrival_step_; }
  // Sum over attributes; the per-record value used by the selection model.
  double value() const { return value_; }
  // Mean over attributes, cached.
  double avg_score() const { return avg_score_; }
  bool is_critical() const { return avg_score_ >= kCriticalThreshold; }
  const std::string& host_id() const { return host_id_; }
  const std::string& cve_id() const { return cve_id_; }

  // Same vulnerability with a fresh identity, as drawn by the simulator.
  VulnRecord Restamped(int64_t uid, int arrival_step) const;

 private:
  int64_t uid_;
  AttributeVector attrs_;
  double mitigation_minutes_;
  int arrival_step_;
  double value_;
  double avg_score_;
  std::string host_id_;
  std::string cve_id_;
};

// Agent observation: N x kStateColumns row-major matrix plus the pool.
struct SystemState {
  int rows = 0;
  std::vector<double> matrix;
  double pool_minutes = 0.0;
  double pool_norm = 0.0;
  // Backlog records that did not fit in the N visible rows.
  int hidden_rows = 0;

  double at(int row, int col) const {
    return matrix[static_cast<size_t>(row) * kStateColumns + col];
  }
  // Policy input: the matrix followed by pool_norm.
  std::vector<double> Flatten() const;

  bool operator==(const SystemState&) const = default;
};

struct RewardBreakdown {
  double r1 = 0.0;
  double r2 = 0.0;
  double total = 0.0;
  double w1 = 0.5;
  double w2 = 0.5;
};

// Maps `label` onto a linear grid from 1.0 (first entry) down to 0.1 (last).
double QuantizeCategorical(std::string_view label,
                           std::span<const std::string> ordered_categories);

// CVSS in [1, 10] scaled to [0.1, 1].
double NormalizeCvss(double cvss_raw);

// Throws if any field violates its documented bounds.
void ValidateRawEntry(const RawVulnEntry& entry, const CategoryScheme& scheme);

VulnRecord BuildRecord(const RawVulnEntry& entry, int arrival_step,
                       int64_t uid, const CategoryScheme& scheme = {});

// r1 = mean attribute value over the selection (0 when empty),
// r2 = -cost_per_minute * total minutes, total = w1 * r1 + w2 * r2.
RewardBreakdown ComputeReward(std::span<const VulnRecord> selected, double w1,
                              double w2, double cost_per_minute);

}  // namespace vulntriage

#endif  // VULNTRIAGE_CORE_MODEL_H_
