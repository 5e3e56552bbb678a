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

#include "vulntriage/ingest.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <random>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "vulntriage/error.h"
#include "vulntriage/rng.h"

namespace vulntriage {
namespace {

// Splits one CSV line. Double-quoted fields may contain commas and "" escapes.
std::vector<std::string> SplitCsvLine(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

class CsvReader {
 public:
  CsvReader(std::istream& in, std::string source)
      : in_(in), source_(std::move(source)) {}

  void ExpectHeader(const std::vector<std::string>& expected) {
    std::vector<std::string> fields;
    if (!Next(fields)) {
      Fail("", "missing header line");
    }
    if (fields != expected) {
      std::string want;
      for (size_t i = 0; i < expected.size(); ++i) {
        want += (i ? "," : "") + expected[i];
      }
      for (const std::string& col : expected) {
        if (std::find(fields.begin(), fields.end(), col) == fields.end()) {
          Fail(col, "missing column '" + col + "'; expected header: " + want);
        }
      }
      Fail("", "unexpected header; expected: " + want);
    }
    width_ = expected.size();
    header_ = expected;
  }

  // Returns false at end of input. Blank lines are skipped.
  bool Next(std::vector<std::string>& fields) {
    std::string line;
    while (std::getline(in_, line)) {
      ++line_no_;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line_no_ == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) {
        line.erase(0, 3);
      }
      if (line.empty()) continue;
      fields = SplitCsvLine(line);
      if (width_ != 0 && fields.size() != width_) {
        std::ostringstream msg;
        msg << "expected " << width_ << " fields, found " << fields.size();
        Fail("", msg.str());
      }
      return true;
    }
    return false;
  }

  double ParseDouble(const std::string& text, size_t col) {
    double v = 0.0;
    const char* first = text.data();
    const char* last = text.data() + text.size();
    auto res = std::from_chars(first, last, v);
    if (res.ec != std::errc() || res.ptr != last || !std::isfinite(v)) {
      Fail(header_[col], "unparseable number '" + text + "'");
    }
    return v;
  }

  int ParseInt(const std::string& text, size_t col) {
    int v = 0;
    const char* last = text.data() + text.size();
    auto res = std::from_chars(text.data(), last, v);
    if (res.ec != std::errc() || res.ptr != last) {
      Fail(header_[col], "unparseable integer '" + text + "'");
    }
    return v;
  }

  bool ParseBool(const std::string& text, size_t col) {
    if (text == "1" || text == "true") return true;
    if (text == "0" || text == "false") return false;
    Fail(header_[col], "unparseable flag '" + text + "'");
  }

  void RequireNonEmpty(const std::string& text, size_t col) {
    if (text.empty()) Fail(header_[col], "empty value");
  }

  [[noreturn]] void Fail(const std::string& field, const std::string& what) {
    std::ostringstream msg;
    msg << source_ << ":" << line_no_ << ": ";
    if (!field.empty()) msg << "field '" << field << "': ";
    msg << what;
    throw Error(ErrorCode::kParse, msg.str());
  }

 private:
  std::istream& in_;
  std::string source_;
  int line_no_ = 0;
  size_t width_ = 0;
  std::vector<std::string> header_;
};

std::ifstream OpenOrThrow(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorCode::kNotFound, "cannot open " + path.string());
  }
  return in;
}

double CheckedCvss(CsvReader& reader, const std::string& text, size_t col) {
  const double v = reader.ParseDouble(text, col);
  if (v < 1.0 || v > 10.0) {
    reader.Fail("cvss", "value " + text + " outside [1, 10]");
  }
  return v;
}

double CheckedMinutes(CsvReader& reader, const std::string& text, size_t col) {
  const double v = reader.ParseDouble(text, col);
  if (!(v > 0.0)) {
    reader.Fail("mitigation_minutes", "value " + text + " must be positive");
  }
  return v;
}

void CheckDistribution(const std::vector<double>& probs, size_t categories,
                       const char* name) {
  if (probs.size() != categories) {
    throw Error(ErrorCode::kInvalidArgument,
                std::string(name) + ": probability count does not match the "
                                    "category list");
  }
  double total = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0) || !std::isfinite(p)) {
      throw Error(ErrorCode::kInvalidArgument,
                  std::string(name) + ": probabilities must be >= 0");
    }
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-6) {
    throw Error(ErrorCode::kInvalidArgument,
                std::string(name) + ": probabilities must sum to 1");
  }
}

}  // namespace

std::vector<ScanRow> ParseScanReport(std::istream& in,
                                     const std::string& source) {
  CsvReader reader(in, source);
  reader.ExpectHeader({"host_id", "cve_id", "cvss", "mitigation_minutes"});
  std::vector<ScanRow> rows;
  std::vector<std::string> f;
  while (reader.Next(f)) {
    reader.RequireNonEmpty(f[0], 0);
    ScanRow row;
    row.host_id = f[0];
    row.cve_id = f[1];
    row.cvss_raw = CheckedCvss(reader, f[2], 2);
    row.mitigation_minutes = CheckedMinutes(reader, f[3], 3);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<ScanRow> ParseScanReport(const std::filesystem::path& path) {
  std::ifstream in = OpenOrThrow(path);
  return ParseScanReport(in, path.string());
}

std::vector<HostInventoryRow> ParseHostInventory(std::istream& in,
                                                 const std::string& source) {
  CsvReader reader(in, source);
  reader.ExpectHeader(
      {"host_id", "asset_criticality", "protection_level", "org_relevance"});
  std::vector<HostInventoryRow> rows;
  std::vector<std::string> f;
  while (reader.Next(f)) {
    for (size_t c = 0; c < f.size(); ++c) reader.RequireNonEmpty(f[c], c);
    rows.push_back({f[0], f[1], f[2], f[3]});
  }
  return rows;
}

std::vector<HostInventoryRow> ParseHostInventory(
    const std::filesystem::path& path) {
  std::ifstream in = OpenOrThrow(path);
  return ParseHostInventory(in, path.string());
}

std::vector<AlertLogRow> ParseAlertLog(std::istream& in,
                                       const std::string& source) {
  CsvReader reader(in, source);
  reader.ExpectHeader({"host_id", "week"});
  std::vector<AlertLogRow> rows;
  std::vector<std::string> f;
  while (reader.Next(f)) {
    reader.RequireNonEmpty(f[0], 0);
    const int week = reader.ParseInt(f[1], 1);
    if (week < 0) reader.Fail("week", "must be >= 0");
    rows.push_back({f[0], week});
  }
  return rows;
}

std::vector<AlertLogRow> ParseAlertLog(const std::filesystem::path& path) {
  std::ifstream in = OpenOrThrow(path);
  return ParseAlertLog(in, path.string());
}

std::vector<RawVulnEntry> ParseCorpus(std::istream& in,
                                      const std::string& source) {
  CsvReader reader(in, source);
  reader.ExpectHeader({"host_id", "cve_id", "cvss", "asset_criticality",
                       "protection_level", "org_relevance", "ids_flagged",
                       "mitigation_minutes"});
  std::vector<RawVulnEntry> entries;
  std::vector<std::string> f;
  while (reader.Next(f)) {
    reader.RequireNonEmpty(f[0], 0);
    RawVulnEntry e;
    e.host_id = f[0];
    e.cve_id = f[1];
    e.cvss_raw = CheckedCvss(reader, f[2], 2);
    e.asset_criticality_cat = f[3];
    e.protection_level_cat = f[4];
    e.org_relevance_cat = f[5];
    e.ids_flagged = reader.ParseBool(f[6], 6);
    e.mitigation_minutes = CheckedMinutes(reader, f[7], 7);
    entries.push_back(std::move(e));
  }
  return entries;
}

std::vector<RawVulnEntry> ParseCorpus(const std::filesystem::path& path) {
  std::ifstream in = OpenOrThrow(path);
  return ParseCorpus(in, path.string());
}

void WriteScanReport(std::ostream& out, const std::vector<ScanRow>& rows) {
  out << "host_id,cve_id,cvss,mitigation_minutes\n";
  for (const ScanRow& r : rows) {
    out << QuoteCsv(r.host_id) << ',' << QuoteCsv(r.cve_id) << ','
        << FormatDouble(r.cvss_raw) << ',' << FormatDouble(r.mitigation_minutes)
        << '\n';
  }
}

void WriteCorpus(std::ostream& out, const std::vector<RawVulnEntry>& entries) {
  out << "host_id,cve_id,cvss,asset_criticality,protection_level,"
         "org_relevance,ids_flagged,mitigation_minutes\n";
  for (const RawVulnEntry& e : entries) {
    out << QuoteCsv(e.host_id) << ',' << QuoteCsv(e.cve_id) << ','
        << FormatDouble(e.cvss_raw) << ',' << QuoteCsv(e.asset_criticality_cat)
        << ',' << QuoteCsv(e.protection_level_cat) << ','
        << QuoteCsv(e.org_relevance_cat) << ',' << (e.ids_flagged ? 1 : 0)
        << ',' << FormatDouble(e.mitigation_minutes) << '\n';
  }
}

std::vector<RawVulnEntry> JoinSources(const std::vector<ScanRow>& scans,
                                      const std::vector<HostInventoryRow>& hosts,
                                      const std::vector<AlertLogRow>& alerts,
                                      const StepWindow& window) {
  std::unordered_map<std::string, const HostInventoryRow*> by_host;
  for (const HostInventoryRow& h : hosts) {
    if (!by_host.emplace(h.host_id, &h).second) {
      throw Error(ErrorCode::kInvalidArgument,
                  "duplicate host inventory row for '" + h.host_id + "'");
    }
  }
  std::set<std::string> orphans;
  for (const ScanRow& s : scans) {
    if (!by_host.contains(s.host_id)) orphans.insert(s.host_id);
  }
  if (!orphans.empty()) {
    std::string list;
    for (const std::string& id : orphans) list += (list.empty() ? "" : ",") + id;
    throw Error(ErrorCode::kNotFound,
                "scan rows reference hosts missing from inventory: " + list);
  }
  std::unordered_set<std::string> alerted;
  for (const AlertLogRow& a : alerts) {
    if (window.Contains(a.alert_step)) alerted.insert(a.host_id);
  }

  std::vector<RawVulnEntry> out;
  out.reserve(scans.size());
  for (const ScanRow& s : scans) {
    const HostInventoryRow& h = *by_host.at(s.host_id);
    RawVulnEntry e;
    e.host_id = s.host_id;
    e.cve_id = s.cve_id;
    e.cvss_raw = s.cvss_raw;
    e.asset_criticality_cat = h.asset_criticality_cat;
    e.protection_level_cat = h.protection_level_cat;
    e.org_relevance_cat = h.org_relevance_cat;
    e.ids_flagged = alerted.contains(s.host_id);
    e.mitigation_minutes = s.mitigation_minutes;
    out.push_back(std::move(e));
  }
  return out;
}

void ValidateMix(const CorpusMix& mix, const CategoryScheme& scheme) {
  CheckDistribution(mix.asset_criticality, scheme.asset_criticality.size(),
                    "asset_criticality");
  CheckDistribution(mix.protection_level, scheme.protection_level.size(),
                    "protection_level");
  CheckDistribution(mix.org_relevance, scheme.org_relevance.size(),
                    "org_relevance");
  if (!(mix.cvss_min >= 1.0 && mix.cvss_max <= 10.0 &&
        mix.cvss_min <= mix.cvss_max)) {
    throw Error(ErrorCode::kInvalidArgument,
                "cvss range must satisfy 1 <= min <= max <= 10");
  }
  if (!(mix.ids_flag_prob >= 0.0 && mix.ids_flag_prob <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "ids_flag_prob must be in [0,1]");
  }
  if (!(mix.time_median > 0.0) || !(mix.time_sigma >= 0.0) ||
      !(mix.time_min >= 1.0) || !(mix.time_min <= mix.time_max) ||
      !std::isfinite(mix.time_max)) {
    throw Error(ErrorCode::kInvalidArgument,
                "mitigation time distribution needs median > 0, sigma >= 0 "
                "and 1 <= min <= max");
  }
  if (mix.host_count < 1) {
    throw Error(ErrorCode::kInvalidArgument, "host_count must be >= 1");
  }
}

std::vector<RawVulnEntry> GenerateSyntheticCorpus(int64_t n, uint64_t seed,
                                                  const CorpusMix& mix,
                                                  const CategoryScheme& scheme) {
  if (n < 0) throw Error(ErrorCode::kInvalidArgument, "n must be >= 0");
  ValidateMix(mix, scheme);

  Rng rng = MakeRng(seed, "corpus");
  std::discrete_distribution<int> asset(mix.asset_criticality.begin(),
                                        mix.asset_criticality.end());
  std::discrete_distribution<int> protection(mix.protection_level.begin(),
                                             mix.protection_level.end());
  std::discrete_distribution<int> relevance(mix.org_relevance.begin(),
                                            mix.org_relevance.end());
  std::uniform_real_distribution<double> cvss(mix.cvss_min, mix.cvss_max);
  std::bernoulli_distribution flagged(mix.ids_flag_prob);
  std::lognormal_distribution<double> effort(std::log(mix.time_median),
                                             mix.time_sigma);
  std::uniform_int_distribution<int> host(0, mix.host_count - 1);

  // Host attributes are per-host so that every instance on a host shares them.
  struct HostProfile {
    int asset, protection, relevance;
    bool flagged;
  };
  std::vector<HostProfile> profiles;
  profiles.reserve(mix.host_count);
  for (int h = 0; h < mix.host_count; ++h) {
    profiles.push_back(
        {asset(rng), protection(rng), relevance(rng), flagged(rng)});
  }

  std::vector<RawVulnEntry> out;
  out.reserve(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) {
    const int h = host(rng);
    const HostProfile& p = profiles[h];
    RawVulnEntry e;
    e.host_id = "host-" + std::to_string(h);
    e.cve_id = "CVE-SYN-" + std::to_string(i);
    e.cvss_raw = std::clamp(std::round(cvss(rng) * 10.0) / 10.0, 1.0, 10.0);
    e.asset_criticality_cat = scheme.asset_criticality[p.asset];
    e.protection_level_cat = scheme.protection_level[p.protection];
    e.org_relevance_cat = scheme.org_relevance[p.relevance];
    e.ids_flagged = p.flagged;
    double minutes = 0.0;
    for (int attempt = 0; attempt < 1000; ++attempt) {
      minutes = effort(rng);
      if (minutes >= mix.time_min && minutes <= mix.time_max) break;
    }
    minutes = std::clamp(std::round(minutes), mix.time_min, mix.time_max);
    e.mitigation_minutes = minutes;
    out.push_back(std::move(e));
  }
  return out;
}

std::string QuoteCsv(const std::string& field) {
  if (field.find_first_of(",\"\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

std::string FormatDouble(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace vulntriage
