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

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <system_error>

#include "vulntriage/agent.h"
#include "vulntriage/error.h"

namespace vulntriage {
namespace {

constexpr const char* kMagic = "vulntriage-policy";

std::string Hex(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%a", v);
  return buf;
}

std::string ShapeString(const std::vector<int>& sizes) {
  std::string s = "[";
  for (size_t i = 0; i < sizes.size(); ++i) {
    s += (i ? "x" : "") + std::to_string(sizes[i]);
  }
  return s + "]";
}

void WriteNetwork(std::ostream& out, const char* name, const Mlp& net) {
  out << name << "_layers " << net.layer_sizes().size();
  for (int s : net.layer_sizes()) out << ' ' << s;
  out << '\n';
}

void WriteParams(std::ostream& out, const char* name, const Mlp& net) {
  out << name << "_params " << net.num_params() << '\n';
  for (double v : net.params()) out << Hex(v) << '\n';
}

class Reader {
 public:
  Reader(std::istream& in, std::string path) : in_(in), path_(std::move(path)) {}

  std::string Token() {
    std::string tok;
    if (!(in_ >> tok)) Corrupt("unexpected end of file");
    return tok;
  }

  void Expect(const std::string& keyword) {
    const std::string tok = Token();
    if (tok != keyword) Corrupt("expected '" + keyword + "', found '" + tok + "'");
  }

  int64_t Integer() {
    const std::string tok = Token();
    char* end = nullptr;
    const long long v = std::strtoll(tok.c_str(), &end, 10);
    if (end == tok.c_str() || *end != '\0') Corrupt("bad integer '" + tok + "'");
    return v;
  }

  double Real() {
    const std::string tok = Token();
    char* end = nullptr;
    const double v = std::strtod(tok.c_str(), &end);
    if (end == tok.c_str() || *end != '\0') Corrupt("bad number '" + tok + "'");
    return v;
  }

  std::vector<int> Layers(const std::string& name) {
    Expect(name + "_layers");
    const int64_t count = Integer();
    if (count < 2 || count > 64) Corrupt("bad layer count");
    std::vector<int> sizes;
    for (int64_t i = 0; i < count; ++i) {
      const int64_t s = Integer();
      if (s < 1 || s > (1 << 24)) Corrupt("bad layer size");
      sizes.push_back(static_cast<int>(s));
    }
    return sizes;
  }

  void Params(const std::string& name, Mlp& net) {
    Expect(name + "_params");
    const int64_t count = Integer();
    if (count != static_cast<int64_t>(net.num_params())) {
      throw Error(ErrorCode::kShapeMismatch,
                  path_ + ": " + name + " shape " +
                      ShapeString(net.layer_sizes()) + " needs " +
                      std::to_string(net.num_params()) +
                      " parameters, file has " + std::to_string(count));
    }
    for (double& v : net.params()) v = Real();
  }

  [[noreturn]] void Corrupt(const std::string& what) {
    throw Error(ErrorCode::kCorruptFile, path_ + ": corrupt checkpoint: " + what);
  }

 private:
  std::istream& in_;
  std::string path_;
};

}  // namespace

void SaveCheckpoint(const PolicyParams& params,
                    const std::filesystem::path& path) {
  std::ostringstream out;
  out << kMagic << " v" << kCheckpointVersion << '\n';
  WriteNetwork(out, "actor", params.actor);
  WriteNetwork(out, "critic", params.critic);
  out << "action_std " << Hex(params.action_std) << '\n';
  out << "schedule " << Hex(params.schedule.initial) << ' '
      << Hex(params.schedule.floor) << ' ' << Hex(params.schedule.decrement)
      << ' ' << params.schedule.decay_interval << ' ' << params.decays_applied
      << '\n';
  WriteParams(out, "actor", params.actor);
  WriteParams(out, "critic", params.critic);
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  out << "end\n";

  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream file(tmp, std::ios::binary | std::ios::trunc);
    if (!file) {
      throw Error(ErrorCode::kNotFound, "cannot write " + tmp.string());
    }
    const std::string text = out.str();
    file.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!file) throw Error(ErrorCode::kInternal, "write failed: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    throw Error(ErrorCode::kInternal,
                "cannot move checkpoint into place: " + ec.message());
  }
}

PolicyParams LoadCheckpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kNotFound, "cannot open " + path.string());
  Reader r(in, path.string());
  std::string magic;
  if (!(in >> magic) || magic != kMagic) r.Corrupt("missing header");
  const std::string version = r.Token();
  if (version != "v" + std::to_string(kCheckpointVersion)) {
    throw Error(ErrorCode::kVersionMismatch,
                path.string() + ": checkpoint version " + version +
                    " is not supported (expected v" +
                    std::to_string(kCheckpointVersion) + ")");
  }
  PolicyParams p;
  p.actor = Mlp(r.Layers("actor"));
  p.critic = Mlp(r.Layers("critic"));
  r.Expect("action_std");
  p.action_std = r.Real();
  r.Expect("schedule");
  p.schedule.initial = r.Real();
  p.schedule.floor = r.Real();
  p.schedule.decrement = r.Real();
  p.schedule.decay_interval = r.Integer();
  p.decays_applied = r.Integer();
  r.Params("actor", p.actor);
  r.Params("critic", p.critic);
  r.Expect("end");
  if (!(p.action_std >= 0.0)) r.Corrupt("negative action_std");
  return p;
}

PolicyParams LoadCheckpoint(const std::filesystem::path& path,
                            const std::vector<int>& expected_layers) {
  PolicyParams p = LoadCheckpoint(path);
  for (const Mlp* net : {&p.actor, &p.critic}) {
    if (net->layer_sizes() != expected_layers) {
      throw Error(ErrorCode::kShapeMismatch,
                  path.string() + ": expected network shape " +
                      ShapeString(expected_layers) + ", found " +
                      ShapeString(net->layer_sizes()));
    }
  }
  return p;
}

}  // namespace vulntriage
