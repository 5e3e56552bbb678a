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

// Readers for scan, host-inventory and IDS-alert CSV exports, the join that
// consolidates them, and a seeded synthetic corpus generator.
//
// File schemas (UTF-8, comma separated, first line is the exact header):
//   scan:    host_id,cve_id,cvss,mitigation_minutes
//   hosts:   host_id,asset_criticality,protection_level,org_relevance
//   alerts:  host_id,week
//   corpus:  host_id,cve_id,cvss,asset_criticality,protection_level,
//            org_relevance,ids_flagged,mitigation_minutes

#ifndef VULNTRIAGE_INGEST_H_
#define VULNTRIAGE_INGEST_H_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

#include "vulntriage/core_model.h"

namespace vulntriage {

struct ScanRow {
  std::string host_id;
  std::string cve_id;
  double cvss_raw = 1.0;
  double mitigation_minutes = 1.0;

  bool operator==(const ScanRow&) const = default;
};

struct HostInventoryRow {
  std::string host_id;
  std::string asset_criticality_cat;
  std::string protection_level_cat;
  std::string org_relevance_cat;

  bool operator==(const HostInventoryRow&) const = default;
};

struct AlertLogRow {
  std::string host_id;
  int alert_step = 0;

  bool operator==(const AlertLogRow&) const = default;
};

// Inclusive range of week indices. The default covers every week.
struct StepWindow {
  int first = 0;
  int last = std::numeric_limits<int>::max();

  bool Contains(int step) const { return step >= first && step <= last; }
};

std::vector<ScanRow> ParseScanReport(std::istream& in,
                                     const std::string& source = "<scan>");
std::vector<ScanRow> ParseScanReport(const std::filesystem::path& path);

std::vector<HostInventoryRow> ParseHostInventory(
    std::istream& in, const std::string& source = "<hosts>");
std::vector<HostInventoryRow> ParseHostInventory(
    const std::filesystem::path& path);

std::vector<AlertLogRow> ParseAlertLog(std::istream& in,
                                       const std::string& source = "<alerts>");
std::vector<AlertLogRow> ParseAlertLog(const std::filesystem::path& path);

std::vector<RawVulnEntry> ParseCorpus(std::istream& in,
                                      const std::string& source = "<corpus>");
std::vector<RawVulnEntry> ParseCorpus(const std::filesystem::path& path);

// CSV helpers shared by the writers: quotes a field when it needs it, and
// prints the shortest decimal that round-trips.
std::string QuoteCsv(const std::string& field);
std::string FormatDouble(double v);

void WriteScanReport(std::ostream& out, const std::vector<ScanRow>& rows);
void WriteCorpus(std::ostream& out, const std::vector<RawVulnEntry>& entries);

// Attaches host categories to every scan row and sets the IDS flag when the
// host appears in an alert inside `window`. Output order follows `scans`.
std::vector<RawVulnEntry> JoinSources(const std::vector<ScanRow>& scans,
                                      const std::vector<HostInventoryRow>& hosts,
                                      const std::vector<AlertLogRow>& alerts,
                                      const StepWindow& window = {});

// Marginal distributions for the synthetic corpus. Category probabilities are
// listed in the same order as the matching CategoryScheme list.
struct CorpusMix {
  std::vector<double> asset_criticality = {1.0 / 3, 1.0 / 3, 1.0 / 3};
  std::vector<double> protection_level = {1.0 / 3, 1.0 / 3, 1.0 / 3};
  std::vector<double> org_relevance = {1.0 / 3, 1.0 / 3, 1.0 / 3};
  // CVSS is uniform on [cvss_min, cvss_max], rounded to one decimal.
  double cvss_min = 1.0;
  double cvss_max = 10.0;
  double ids_flag_prob = 0.2;
  // Log-normal mitigation effort truncated (by rejection) to
  // [time_min, time_max], then rounded to whole minutes.
  double time_median = 60.0;
  double time_sigma = 0.8;
  double time_min = 5.0;
  double time_max = 480.0;
  // Host attributes are drawn once per host; instances pick a host uniformly.
  int host_count = 5000;
};

void ValidateMix(const CorpusMix& mix, const CategoryScheme& scheme);

std::vector<RawVulnEntry> GenerateSyntheticCorpus(
    int64_t n, uint64_t seed, const CorpusMix& mix,
    const CategoryScheme& scheme = {});

}  // namespace vulntriage

#endif  // VULNTRIAGE_INGEST_H_
