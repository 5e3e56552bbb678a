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

#ifndef VULNTRIAGE_MLP_H_
#define VULNTRIAGE_MLP_H_

#include <span>
#include <vector>

#include "vulntriage/rng.h"

namespace vulntriage {

// Fully connected network with tanh hidden layers and a linear output layer.
// Parameters live in one flat vector: for each layer, the weight matrix
// (outputs x inputs, row-major) followed by the bias vector.
class Mlp {
 public:
  // Activations of every layer from one forward pass, input included.
  struct Cache {
    std::vector<std::vector<double>> activations;
  };

  Mlp() = default;
  explicit Mlp(std::vector<int> layer_sizes);

  // Orthogonal rows/columns scaled by `hidden_gain` for hidden layers and
  // `output_gain` for the last layer; biases zero.
  void InitOrthogonal(Rng& rng, double hidden_gain, double output_gain);

  const std::vector<int>& layer_sizes() const { return sizes_; }
  int input_dim() const { return sizes_.front(); }
  int output_dim() const { return sizes_.back(); }
  int num_layers() const { return static_cast<int>(sizes_.size()) - 1; }

  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }
  size_t num_params() const { return params_.size(); }

  std::vector<double> Forward(std::span<const double> input) const;
  const std::vector<double>& Forward(std::span<const double> input,
                                     Cache& cache) const;

  // Accumulates d(loss)/d(params) into `grad` given d(loss)/d(output).
  void Backward(const Cache& cache, std::span<const double> grad_output,
                std::span<double> grad) const;

  bool operator==(const Mlp&) const = default;

 private:
  size_t weight_offset(int layer) const { return offsets_[layer]; }
  size_t bias_offset(int layer) const {
    return offsets_[layer] +
           static_cast<size_t>(sizes_[layer]) * sizes_[layer + 1];
  }

  std::vector<int> sizes_;
  std::vector<size_t> offsets_;
  std::vector<double> params_;
};

}  // namespace vulntriage

#endif  // VULNTRIAGE_MLP_H_
