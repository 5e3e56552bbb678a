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

// PPO actor-critic that chooses how many minutes to allocate each week.
//
// The actor emits the mean of a Gaussian over a pre-squash action g. The
// allocation is sigmoid(g) * remaining pool, so it always lies in [0, pool].
// Log-probabilities are taken on g. The exploration std is not learned; it
// follows a step schedule from 0.65 down to 0.01 in 0.025 decrements.

#ifndef VULNTRIAGE_AGENT_H_
#define VULNTRIAGE_AGENT_H_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vulntriage/mlp.h"
#include "vulntriage/rng.h"

namespace vulntriage {

struct StdSchedule {
  double initial = 0.65;
  double floor = 0.01;
  double decrement = 0.025;
  int64_t decay_interval = 2000;  // env steps between decrements

  bool operator==(const StdSchedule&) const = default;
};

struct PolicyParams {
  Mlp actor;
  Mlp critic;
  double action_std = 0.65;
  StdSchedule schedule;
  int64_t decays_applied = 0;

  int input_dim() const { return actor.input_dim(); }
  bool operator==(const PolicyParams&) const = default;
};

inline constexpr int kDefaultHiddenWidth = 68;

PolicyParams MakePolicy(int input_dim, const std::vector<int>& hidden,
                        uint64_t seed, const StdSchedule& schedule = {});

struct PolicyOutput {
  double mu = 0.0;
  double value = 0.0;
};

PolicyOutput PolicyForward(const PolicyParams& params,
                           std::span<const double> state);

double Sigmoid(double x);
double GaussianLogProb(double x, double mu, double std);
double GaussianEntropy(double std);

struct ActionSample {
  double allocated_minutes = 0.0;
  double raw = 0.0;       // pre-squash g
  double log_prob = 0.0;  // 0 when std == 0 (deterministic)
};

ActionSample SampleAction(double mu, double std, double pool_minutes, Rng& rng);

// Applies every decrement whose boundary (k * decay_interval) is <= step.
void DecayStd(PolicyParams& params, int64_t global_step);
// One decrement, clamped at the schedule floor.
void DecayStdOnce(PolicyParams& params);

struct GaeResult {
  std::vector<double> advantages;
  std::vector<double> returns;
};

// delta_t = r_t + gamma * v_{t+1} * (1 - done_t) - v_t,
// A_t = delta_t + gamma * lambda * (1 - done_t) * A_{t+1}. The value after the
// last entry is `last_value` (ignored when the last entry is terminal).
GaeResult ComputeGae(std::span<const double> rewards,
                     std::span<const double> values,
                     std::span<const uint8_t> dones, double gamma,
                     double lambda, double last_value = 0.0);

// In place: zero mean, unit (population) std; std guarded below by 1e-8.
void NormalizeAdvantages(std::span<double> advantages);

struct Trajectory {
  int state_dim = 0;
  std::vector<double> states;  // size() * state_dim, row-major
  std::vector<double> raw_actions;
  std::vector<double> log_probs;
  std::vector<double> rewards;
  std::vector<double> values;
  std::vector<uint8_t> dones;
  std::vector<double> advantages;
  std::vector<double> returns;

  size_t size() const { return rewards.size(); }
  std::span<const double> state(size_t i) const {
    return {states.data() + i * static_cast<size_t>(state_dim),
            static_cast<size_t>(state_dim)};
  }
  void Add(std::span<const double> state, double raw, double log_prob,
           double reward, double value, bool done);
  void Clear();
};

enum class OptimizerKind { kSgd, kAdam };

OptimizerKind ParseOptimizerKind(std::string_view name);

struct PpoConfig {
  double clip_eps = 0.2;
  double entropy_coef = 0.01;
  double value_coef = 0.5;
  double gamma = 0.99;
  double gae_lambda = 0.95;
  int epochs_per_update = 10;
  int minibatch_size = 64;
  double learning_rate = 3e-4;
  double critic_learning_rate = 1e-3;
  OptimizerKind optimizer = OptimizerKind::kAdam;
  double momentum = 0.9;      // kSgd only
  double max_grad_norm = 0.5;  // <= 0 disables clipping
  int rollout_steps = 2048;
  int64_t max_train_steps = 200'000;
};

void ValidatePpoConfig(const PpoConfig& config);

struct LossStats {
  double actor_loss = 0.0;   // clipped surrogate minus entropy bonus
  double critic_loss = 0.0;  // mean squared error
  double entropy = 0.0;
  double approx_kl = 0.0;
  double clip_fraction = 0.0;
};

// Loss over `indices` of `batch` (advantages must already be normalized).
// When the gradient spans are non-empty, d(actor_loss)/d(actor params) and
// d(value_coef * critic_loss)/d(critic params) are accumulated into them.
LossStats PpoLoss(const PolicyParams& params, const Trajectory& batch,
                  std::span<const size_t> indices, const PpoConfig& config,
                  std::span<double> actor_grad, std::span<double> critic_grad);

struct UpdateDiagnostics {
  LossStats mean;  // averaged over minibatches
  int minibatches = 0;
};

// Owns optimizer state across updates.
class PpoTrainer {
 public:
  PpoTrainer(const PolicyParams& params, PpoConfig config);

  // Normalizes the batch advantages, then runs epochs of shuffled minibatch
  // steps. On a non-finite loss the parameters are restored to their values
  // on entry and kNonFinite is thrown.
  UpdateDiagnostics Update(PolicyParams& params, Trajectory& batch, Rng& rng);

  const PpoConfig& config() const { return config_; }

 private:
  struct Moments {
    std::vector<double> m;
    std::vector<double> v;
  };
  void Apply(std::span<double> params, std::span<const double> grad,
             Moments& state, double lr);

  PpoConfig config_;
  Moments actor_state_;
  Moments critic_state_;
  int64_t step_ = 0;
};

// Text checkpoint with a version line and shape header; values in hexfloat
// so a round trip is bit-exact. Writes go to a temporary file first.
inline constexpr int kCheckpointVersion = 1;

void SaveCheckpoint(const PolicyParams& params,
                    const std::filesystem::path& path);
PolicyParams LoadCheckpoint(const std::filesystem::path& path);
// Also verifies the actor/critic layer sizes.
PolicyParams LoadCheckpoint(const std::filesystem::path& path,
                            const std::vector<int>& expected_layers);

}  // namespace vulntriage

#endif  // VULNTRIAGE_AGENT_H_
