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

#include "vulntriage/agent.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

#include "vulntriage/error.h"

namespace vulntriage {
namespace {

std::vector<int> LayerSizes(int input_dim, const std::vector<int>& hidden) {
  std::vector<int> sizes = {input_dim};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(1);
  return sizes;
}

bool AllFinite(std::span<const double> xs) {
  return std::all_of(xs.begin(), xs.end(),
                     [](double x) { return std::isfinite(x); });
}

void ClipNorm(std::span<double> grad, double max_norm) {
  if (max_norm <= 0.0) return;
  double sq = 0.0;
  for (double g : grad) sq += g * g;
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const double scale = max_norm / norm;
    for (double& g : grad) g *= scale;
  }
}

}  // namespace

PolicyParams MakePolicy(int input_dim, const std::vector<int>& hidden,
                        uint64_t seed, const StdSchedule& schedule) {
  if (input_dim < 1) {
    throw Error(ErrorCode::kInvalidArgument, "policy input_dim must be >= 1");
  }
  PolicyParams p;
  p.actor = Mlp(LayerSizes(input_dim, hidden));
  p.critic = Mlp(LayerSizes(input_dim, hidden));
  Rng rng = MakeRng(seed, "policy-init");
  p.actor.InitOrthogonal(rng, std::sqrt(2.0), 0.01);
  p.critic.InitOrthogonal(rng, std::sqrt(2.0), 1.0);
  p.schedule = schedule;
  p.action_std = schedule.initial;
  p.decays_applied = 0;
  return p;
}

PolicyOutput PolicyForward(const PolicyParams& params,
                           std::span<const double> state) {
  if (static_cast<int>(state.size()) != params.input_dim()) {
    throw Error(ErrorCode::kShapeMismatch,
                "policy expects a state of length " +
                    std::to_string(params.input_dim()) + ", got " +
                    std::to_string(state.size()));
  }
  if (!AllFinite(state)) {
    throw Error(ErrorCode::kNonFinite, "state contains non-finite entries");
  }
  return {params.actor.Forward(state)[0], params.critic.Forward(state)[0]};
}

double Sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double GaussianLogProb(double x, double mu, double std) {
  const double z = (x - mu) / std;
  return -0.5 * z * z - std::log(std) -
         0.5 * std::log(2.0 * std::numbers::pi);
}

double GaussianEntropy(double std) {
  return 0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e * std * std);
}

ActionSample SampleAction(double mu, double std, double pool_minutes, Rng& rng) {
  ActionSample out;
  out.raw = mu;
  if (std > 0.0) {
    std::normal_distribution<double> noise(0.0, 1.0);
    out.raw = mu + std * noise(rng);
    out.log_prob = GaussianLogProb(out.raw, mu, std);
  }
  out.allocated_minutes =
      std::clamp(Sigmoid(out.raw) * std::max(0.0, pool_minutes), 0.0,
                 std::max(0.0, pool_minutes));
  return out;
}

void DecayStdOnce(PolicyParams& params) {
  params.action_std = std::max(params.schedule.floor,
                               params.action_std - params.schedule.decrement);
  ++params.decays_applied;
}

void DecayStd(PolicyParams& params, int64_t global_step) {
  const int64_t interval = params.schedule.decay_interval;
  if (interval <= 0) return;
  while ((params.decays_applied + 1) * interval <= global_step) {
    DecayStdOnce(params);
  }
}

GaeResult ComputeGae(std::span<const double> rewards,
                     std::span<const double> values,
                     std::span<const uint8_t> dones, double gamma,
                     double lambda, double last_value) {
  const size_t n = rewards.size();
  if (values.size() != n || dones.size() != n) {
    throw Error(ErrorCode::kInvalidArgument,
                "rewards, values and dones must have equal length");
  }
  GaeResult out;
  out.advantages.assign(n, 0.0);
  out.returns.assign(n, 0.0);
  double next_adv = 0.0;
  double next_value = last_value;
  for (size_t t = n; t-- > 0;) {
    const double live = dones[t] ? 0.0 : 1.0;
    const double delta = rewards[t] + gamma * next_value * live - values[t];
    next_adv = delta + gamma * lambda * live * next_adv;
    out.advantages[t] = next_adv;
    out.returns[t] = next_adv + values[t];
    next_value = values[t];
  }
  return out;
}

void NormalizeAdvantages(std::span<double> advantages) {
  const size_t n = advantages.size();
  if (n == 0) return;
  const double mean =
      std::accumulate(advantages.begin(), advantages.end(), 0.0) / n;
  double var = 0.0;
  for (double a : advantages) var += (a - mean) * (a - mean);
  const double std = std::sqrt(var / n);
  const double denom = std::max(std, 1e-8);
  for (double& a : advantages) a = (a - mean) / denom;
}

void Trajectory::Add(std::span<const double> state, double raw,
                     double log_prob, double reward, double value, bool done) {
  if (state_dim == 0) state_dim = static_cast<int>(state.size());
  if (static_cast<int>(state.size()) != state_dim) {
    throw Error(ErrorCode::kShapeMismatch, "trajectory state size changed");
  }
  states.insert(states.end(), state.begin(), state.end());
  raw_actions.push_back(raw);
  log_probs.push_back(log_prob);
  rewards.push_back(reward);
  values.push_back(value);
  dones.push_back(done ? 1 : 0);
}

void Trajectory::Clear() {
  states.clear();
  raw_actions.clear();
  log_probs.clear();
  rewards.clear();
  values.clear();
  dones.clear();
  advantages.clear();
  returns.clear();
}

OptimizerKind ParseOptimizerKind(std::string_view name) {
  if (name == "sgd") return OptimizerKind::kSgd;
  if (name == "adam") return OptimizerKind::kAdam;
  throw Error(ErrorCode::kInvalidArgument,
              "unknown optimizer '" + std::string(name) + "'");
}

void ValidatePpoConfig(const PpoConfig& c) {
  auto fail = [](const std::string& what) {
    throw Error(ErrorCode::kInvalidArgument, "ppo config: " + what);
  };
  if (!(c.clip_eps > 0.0)) fail("clip_eps must be > 0");
  if (!(c.gamma > 0.0 && c.gamma <= 1.0)) fail("gamma must lie in (0, 1]");
  if (!(c.gae_lambda > 0.0 && c.gae_lambda <= 1.0)) {
    fail("gae_lambda must lie in (0, 1]");
  }
  if (c.entropy_coef < 0.0) fail("entropy_coef must be >= 0");
  if (c.value_coef < 0.0) fail("value_coef must be >= 0");
  if (c.epochs_per_update < 1) fail("epochs_per_update must be >= 1");
  if (c.minibatch_size < 1) fail("minibatch_size must be >= 1");
  if (!(c.learning_rate > 0.0) || !(c.critic_learning_rate > 0.0)) {
    fail("learning rates must be > 0");
  }
  if (c.rollout_steps < 1) fail("rollout_steps must be >= 1");
  if (c.max_train_steps < 0) fail("max_train_steps must be >= 0");
}

LossStats PpoLoss(const PolicyParams& params, const Trajectory& batch,
                  std::span<const size_t> indices, const PpoConfig& config,
                  std::span<double> actor_grad, std::span<double> critic_grad) {
  LossStats stats;
  if (indices.empty()) return stats;
  const double inv_n = 1.0 / static_cast<double>(indices.size());
  const double std = params.action_std;
  const double var = std * std;
  const bool want_grad = !actor_grad.empty() && !critic_grad.empty();
  Mlp::Cache actor_cache;
  Mlp::Cache critic_cache;
  for (size_t i : indices) {
    const std::span<const double> state = batch.state(i);
    const double mu = params.actor.Forward(state, actor_cache)[0];
    const double g = batch.raw_actions[i];
    const double logp = GaussianLogProb(g, mu, std);
    const double ratio = std::exp(logp - batch.log_probs[i]);
    const double adv = batch.advantages[i];
    const double lo = 1.0 - config.clip_eps;
    const double hi = 1.0 + config.clip_eps;
    const double surr1 = ratio * adv;
    const double surr2 = std::clamp(ratio, lo, hi) * adv;
    stats.actor_loss -= std::min(surr1, surr2) * inv_n;
    stats.approx_kl += (batch.log_probs[i] - logp) * inv_n;
    if (ratio < lo || ratio > hi) stats.clip_fraction += inv_n;

    const double value = params.critic.Forward(state, critic_cache)[0];
    const double err = value - batch.returns[i];
    stats.critic_loss += err * err * inv_n;

    if (want_grad) {
      const bool clipped = (adv > 0.0 && ratio > hi) || (adv < 0.0 && ratio < lo);
      if (!clipped) {
        const double dmu = -adv * ratio * (g - mu) / var * inv_n;
        params.actor.Backward(actor_cache, std::span<const double>(&dmu, 1),
                              actor_grad);
      }
      const double dv = config.value_coef * 2.0 * err * inv_n;
      params.critic.Backward(critic_cache, std::span<const double>(&dv, 1),
                             critic_grad);
    }
  }
  stats.entropy = GaussianEntropy(std);
  stats.actor_loss -= config.entropy_coef * stats.entropy;
  return stats;
}

PpoTrainer::PpoTrainer(const PolicyParams& params, PpoConfig config)
    : config_(std::move(config)) {
  ValidatePpoConfig(config_);
  actor_state_.m.assign(params.actor.num_params(), 0.0);
  actor_state_.v.assign(params.actor.num_params(), 0.0);
  critic_state_.m.assign(params.critic.num_params(), 0.0);
  critic_state_.v.assign(params.critic.num_params(), 0.0);
}

void PpoTrainer::Apply(std::span<double> params, std::span<const double> grad,
                       Moments& state, double lr) {
  if (config_.optimizer == OptimizerKind::kSgd) {
    for (size_t i = 0; i < params.size(); ++i) {
      state.m[i] = config_.momentum * state.m[i] + grad[i];
      params[i] -= lr * state.m[i];
    }
    return;
  }
  constexpr double kBeta1 = 0.9;
  constexpr double kBeta2 = 0.999;
  constexpr double kEps = 1e-8;
  const double t = static_cast<double>(step_);
  const double c1 = 1.0 - std::pow(kBeta1, t);
  const double c2 = 1.0 - std::pow(kBeta2, t);
  for (size_t i = 0; i < params.size(); ++i) {
    state.m[i] = kBeta1 * state.m[i] + (1.0 - kBeta1) * grad[i];
    state.v[i] = kBeta2 * state.v[i] + (1.0 - kBeta2) * grad[i] * grad[i];
    params[i] -= lr * (state.m[i] / c1) / (std::sqrt(state.v[i] / c2) + kEps);
  }
}

UpdateDiagnostics PpoTrainer::Update(PolicyParams& params, Trajectory& batch,
                                     Rng& rng) {
  const size_t n = batch.size();
  if (n == 0) {
    throw Error(ErrorCode::kInvalidArgument, "PPO update on an empty batch");
  }
  if (batch.advantages.size() != n || batch.returns.size() != n) {
    throw Error(ErrorCode::kInvalidArgument,
                "batch advantages/returns not computed");
  }
  NormalizeAdvantages(batch.advantages);

  const PolicyParams snapshot = params;
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> actor_grad(params.actor.num_params());
  std::vector<double> critic_grad(params.critic.num_params());
  UpdateDiagnostics diag;
  const size_t mb = static_cast<size_t>(config_.minibatch_size);
  for (int epoch = 0; epoch < config_.epochs_per_update; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (size_t start = 0; start < n; start += mb) {
      const size_t end = std::min(n, start + mb);
      std::span<const size_t> idx(order.data() + start, end - start);
      std::fill(actor_grad.begin(), actor_grad.end(), 0.0);
      std::fill(critic_grad.begin(), critic_grad.end(), 0.0);
      const LossStats s =
          PpoLoss(params, batch, idx, config_, actor_grad, critic_grad);
      if (!std::isfinite(s.actor_loss) || !std::isfinite(s.critic_loss) ||
          !AllFinite(actor_grad) || !AllFinite(critic_grad)) {
        params = snapshot;
        std::ostringstream msg;
        msg << "non-finite PPO loss in epoch " << epoch << ", minibatch at "
            << start << " (actor " << s.actor_loss << ", critic "
            << s.critic_loss << ")";
        throw Error(ErrorCode::kNonFinite, msg.str());
      }
      ClipNorm(actor_grad, config_.max_grad_norm);
      ClipNorm(critic_grad, config_.max_grad_norm);
      ++step_;
      Apply(params.actor.params(), actor_grad, actor_state_,
            config_.learning_rate);
      Apply(params.critic.params(), critic_grad, critic_state_,
            config_.critic_learning_rate);
      diag.mean.actor_loss += s.actor_loss;
      diag.mean.critic_loss += s.critic_loss;
      diag.mean.entropy += s.entropy;
      diag.mean.approx_kl += s.approx_kl;
      diag.mean.clip_fraction += s.clip_fraction;
      ++diag.minibatches;
    }
  }
  const double k = 1.0 / diag.minibatches;
  diag.mean.actor_loss *= k;
  diag.mean.critic_loss *= k;
  diag.mean.entropy *= k;
  diag.mean.approx_kl *= k;
  diag.mean.clip_fraction *= k;
  return diag;
}

}  // namespace vulntriage
