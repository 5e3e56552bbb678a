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

#include "vulntriage/core_model.h"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <utility>

#include "vulntriage/error.h"

namespace vulntriage {

std::string_view ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument:
      return "invalid_argument";
    case ErrorCode::kParse:
      return "parse_error";
    case ErrorCode::kNotFound:
      return "not_found";
    case ErrorCode::kCorruptFile:
      return "corrupt_file";
    case ErrorCode::kVersionMismatch:
      return "version_mismatch";
    case ErrorCode::kShapeMismatch:
      return "shape_mismatch";
    case ErrorCode::kNonFinite:
      return "non_finite";
    case ErrorCode::kResourceLimit:
      return "resource_limit";
    case ErrorCode::kInternal:
      return "internal";
  }
  return "unknown";
}

VulnRecord::VulnRecord(int64_t uid, const AttributeVector& attrs,
                       double mitigation_minutes, int arrival_step,
                       std::string host_id, std::string cve_id)
    : uid_(uid),
      attrs_(attrs),
      mitigation_minutes_(mitigation_minutes),
      arrival_step_(arrival_step),
      value_(attrs.Sum()),
      avg_score_(attrs.Sum() / kNumAttributes),
      host_id_(std::move(host_id)),
      cve_id_(std::move(cve_id)) {
  if (!(mitigation_minutes > 0.0) || !std::isfinite(mitigation_minutes)) {
    throw Error(ErrorCode::kInvalidArgument,
                "mitigation_minutes must be positive and finite");
  }
  if (arrival_step < 0) {
    throw Error(ErrorCode::kInvalidArgument, "arrival_step must be >= 0");
  }
}

VulnRecord VulnRecord::Restamped(int64_t uid, int arrival_step) const {
  VulnRecord copy = *this;
  copy.uid_ = uid;
  copy.arrival_step_ = arrival_step;
  return copy;
}

std::vector<double> SystemState::Flatten() const {
  std::vector<double> out;
  out.reserve(matrix.size() + 1);
  out.insert(out.end(), matrix.begin(), matrix.end());
  out.push_back(pool_norm);
  return out;
}

double QuantizeCategorical(std::string_view label,
                           std::span<const std::string> ordered_categories) {
  const size_t k = ordered_categories.size();
  if (k < 2) {
    throw Error(ErrorCode::kInvalidArgument,
                "category list needs at least two entries");
  }
  auto it = std::find(ordered_categories.begin(), ordered_categories.end(),
                      label);
  if (it == ordered_categories.end()) {
    std::ostringstream msg;
    msg << "unknown category '" << label << "'; expected one of [";
    for (size_t i = 0; i < k; ++i) {
      msg << (i ? "," : "") << ordered_categories[i];
    }
    msg << "]";
    throw Error(ErrorCode::kInvalidArgument, msg.str());
  }
  const size_t idx = static_cast<size_t>(it - ordered_categories.begin());
  if (idx == 0) return 1.0;
  if (idx == k - 1) return 0.1;
  return 1.0 - static_cast<double>(idx) * (0.9 / static_cast<double>(k - 1));
}

double NormalizeCvss(double cvss_raw) {
  if (!(cvss_raw >= 1.0 && cvss_raw <= 10.0)) {
    std::ostringstream msg;
    msg << "cvss " << cvss_raw << " outside [1, 10]";
    throw Error(ErrorCode::kInvalidArgument, msg.str());
  }
  return cvss_raw / 10.0;
}

void ValidateRawEntry(const RawVulnEntry& entry, const CategoryScheme& scheme) {
  NormalizeCvss(entry.cvss_raw);
  if (!(entry.mitigation_minutes > 0.0) ||
      !std::isfinite(entry.mitigation_minutes)) {
    throw Error(ErrorCode::kInvalidArgument,
                "mitigation_minutes must be positive");
  }
  QuantizeCategorical(entry.asset_criticality_cat, scheme.asset_criticality);
  QuantizeCategorical(entry.protection_level_cat, scheme.protection_level);
  QuantizeCategorical(entry.org_relevance_cat, scheme.org_relevance);
}

VulnRecord BuildRecord(const RawVulnEntry& entry, int arrival_step,
                       int64_t uid, const CategoryScheme& scheme) {
  AttributeVector attrs;
  attrs.asset_criticality =
      QuantizeCategorical(entry.asset_criticality_cat, scheme.asset_criticality);
  attrs.protection_level =
      QuantizeCategorical(entry.protection_level_cat, scheme.protection_level);
  attrs.org_relevance =
      QuantizeCategorical(entry.org_relevance_cat, scheme.org_relevance);
  attrs.cvss_norm = NormalizeCvss(entry.cvss_raw);
  attrs.ids_flag = entry.ids_flagged ? 1.0 : 0.0;
  return VulnRecord(uid, attrs, entry.mitigation_minutes, arrival_step,
                    entry.host_id, entry.cve_id);
}

RewardBreakdown ComputeReward(std::span<const VulnRecord> selected, double w1,
                              double w2, double cost_per_minute) {
  if (std::abs(w1 + w2 - 1.0) > 1e-12) {
    throw Error(ErrorCode::kInvalidArgument, "reward weights must sum to 1");
  }
  if (cost_per_minute < 0.0) {
    throw Error(ErrorCode::kInvalidArgument, "cost per minute must be >= 0");
  }
  RewardBreakdown out;
  out.w1 = w1;
  out.w2 = w2;
  if (!selected.empty()) {
    double attr_total = 0.0;
    for (const VulnRecord& rec : selected) {
      attr_total += rec.value();
      out.r2 -= cost_per_minute * rec.mitigation_minutes();
    }
    out.r1 = attr_total /
             (kNumAttributes * static_cast<double>(selected.size()));
  }
  out.total = w1 * out.r1 + w2 * out.r2;
  return out;
}

}  // namespace vulntriage
