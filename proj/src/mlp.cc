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

#include "vulntriage/mlp.h"

#include <algorithm>
#include <cmath>
#include <random>

#include "vulntriage/error.h"

namespace vulntriage {
namespace {

// Fills a rows x cols matrix with orthonormal rows (rows <= cols) or
// orthonormal columns (rows > cols) via modified Gram-Schmidt.
void Orthogonal(Rng& rng, int rows, int cols, double gain, double* out) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const bool transpose = rows > cols;
  const int r = transpose ? cols : rows;
  const int c = transpose ? rows : cols;
  std::vector<double> m(static_cast<size_t>(r) * c);
  for (double& x : m) x = normal(rng);
  for (int i = 0; i < r; ++i) {
    double* vi = &m[static_cast<size_t>(i) * c];
    for (int j = 0; j < i; ++j) {
      const double* vj = &m[static_cast<size_t>(j) * c];
      double dot = 0.0;
      for (int k = 0; k < c; ++k) dot += vi[k] * vj[k];
      for (int k = 0; k < c; ++k) vi[k] -= dot * vj[k];
    }
    double norm = 0.0;
    for (int k = 0; k < c; ++k) norm += vi[k] * vi[k];
    norm = std::sqrt(norm);
    for (int k = 0; k < c; ++k) vi[k] /= norm;
  }
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) {
      const double v = transpose ? m[static_cast<size_t>(j) * c + i]
                                 : m[static_cast<size_t>(i) * c + j];
      out[static_cast<size_t>(i) * cols + j] = gain * v;
    }
  }
}

}  // namespace

Mlp::Mlp(std::vector<int> layer_sizes) : sizes_(std::move(layer_sizes)) {
  if (sizes_.size() < 2) {
    throw Error(ErrorCode::kInvalidArgument, "network needs >= 2 layer sizes");
  }
  size_t total = 0;
  for (size_t l = 0; l + 1 < sizes_.size(); ++l) {
    if (sizes_[l] < 1 || sizes_[l + 1] < 1) {
      throw Error(ErrorCode::kInvalidArgument, "layer sizes must be >= 1");
    }
    offsets_.push_back(total);
    total += static_cast<size_t>(sizes_[l]) * sizes_[l + 1] + sizes_[l + 1];
  }
  params_.assign(total, 0.0);
}

void Mlp::InitOrthogonal(Rng& rng, double hidden_gain, double output_gain) {
  std::fill(params_.begin(), params_.end(), 0.0);
  for (int l = 0; l < num_layers(); ++l) {
    const double gain = l + 1 == num_layers() ? output_gain : hidden_gain;
    Orthogonal(rng, sizes_[l + 1], sizes_[l], gain,
               &params_[weight_offset(l)]);
  }
}

std::vector<double> Mlp::Forward(std::span<const double> input) const {
  Cache cache;
  return Forward(input, cache);
}

const std::vector<double>& Mlp::Forward(std::span<const double> input,
                                        Cache& cache) const {
  if (static_cast<int>(input.size()) != input_dim()) {
    throw Error(ErrorCode::kShapeMismatch,
                "network expects " + std::to_string(input_dim()) +
                    " inputs, got " + std::to_string(input.size()));
  }
  cache.activations.resize(sizes_.size());
  cache.activations[0].assign(input.begin(), input.end());
  for (int l = 0; l < num_layers(); ++l) {
    const int in = sizes_[l];
    const int out = sizes_[l + 1];
    const double* w = &params_[weight_offset(l)];
    const double* b = &params_[bias_offset(l)];
    const std::vector<double>& x = cache.activations[l];
    std::vector<double>& y = cache.activations[l + 1];
    y.resize(static_cast<size_t>(out));
    const bool hidden = l + 1 < num_layers();
    for (int o = 0; o < out; ++o) {
      const double* row = w + static_cast<size_t>(o) * in;
      double acc = b[o];
      for (int i = 0; i < in; ++i) acc += row[i] * x[static_cast<size_t>(i)];
      y[static_cast<size_t>(o)] = hidden ? std::tanh(acc) : acc;
    }
  }
  return cache.activations.back();
}

void Mlp::Backward(const Cache& cache, std::span<const double> grad_output,
                   std::span<double> grad) const {
  std::vector<double> delta(grad_output.begin(), grad_output.end());
  std::vector<double> prev;
  for (int l = num_layers() - 1; l >= 0; --l) {
    const int in = sizes_[l];
    const int out = sizes_[l + 1];
    const double* w = &params_[weight_offset(l)];
    double* gw = &grad[weight_offset(l)];
    double* gb = &grad[bias_offset(l)];
    const std::vector<double>& x = cache.activations[l];
    for (int o = 0; o < out; ++o) {
      const double d = delta[static_cast<size_t>(o)];
      gb[o] += d;
      if (d == 0.0) continue;
      double* grow = gw + static_cast<size_t>(o) * in;
      for (int i = 0; i < in; ++i) grow[i] += d * x[static_cast<size_t>(i)];
    }
    if (l == 0) break;
    prev.assign(static_cast<size_t>(in), 0.0);
    for (int o = 0; o < out; ++o) {
      const double d = delta[static_cast<size_t>(o)];
      if (d == 0.0) continue;
      const double* row = w + static_cast<size_t>(o) * in;
      for (int i = 0; i < in; ++i) prev[static_cast<size_t>(i)] += d * row[i];
    }
    // x is the tanh output of layer l-1.
    for (int i = 0; i < in; ++i) {
      const double a = x[static_cast<size_t>(i)];
      prev[static_cast<size_t>(i)] *= 1.0 - a * a;
    }
    delta.swap(prev);
  }
}

}  // namespace vulntriage
