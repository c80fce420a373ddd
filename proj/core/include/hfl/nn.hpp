// Copyright 2026 The H-FL Simulator Authors.
//
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

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "hfl/matrix.hpp"

namespace hfl {

enum class LayerKind { kDense, kRelu, kFlatten, kConvSmall };

// Valid (no padding, stride 1) convolution over a channels x height x width
// image flattened channel-major into one column.
struct ConvShape {
  std::size_t in_channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t out_channels = 0;
  std::size_t kernel = 0;

  std::size_t out_height() const noexcept { return height - kernel + 1; }
  std::size_t out_width() const noexcept { return width - kernel + 1; }
};

struct LayerSpec {
  LayerKind kind = LayerKind::kDense;
  std::size_t in_dim = 0;
  std::size_t out_dim = 0;
  ConvShape conv{};

  static LayerSpec dense(std::size_t in, std::size_t out);
  static LayerSpec relu(std::size_t dim);
  static LayerSpec flatten(std::size_t dim);
  static LayerSpec conv_small(std::size_t in_channels, std::size_t height, std::size_t width,
                              std::size_t out_channels, std::size_t kernel);

  // Number of parameter matrices the layer owns: weight and bias, or none.
  std::size_t param_slots() const noexcept;
};

// Parameters of a network as a flat list, two entries (weight, bias) per
// dense or conv layer in layer order. Gradients use the same layout.
using ParamList = std::vector<Matrix>;

std::size_t scalar_count(const ParamList& params) noexcept;
ParamList zeros_like(const ParamList& params);
double l2_norm(const ParamList& params);
bool same_layout(const ParamList& a, const ParamList& b) noexcept;

class Network {
 public:
  Network() = default;
  // Validates that shapes compose and that params match the layer specs.
  Network(std::vector<LayerSpec> layers, ParamList params);

  // Uniform(-a, a) weights with a = sqrt(6 / (fan_in + fan_out)), zero biases.
  static Network initialize(std::vector<LayerSpec> layers, std::uint64_t seed);

  const std::vector<LayerSpec>& layers() const noexcept { return layers_; }
  const ParamList& params() const noexcept { return params_; }
  void set_params(ParamList params);

  std::size_t in_dim() const;
  std::size_t out_dim() const;
  std::size_t parameter_count() const noexcept { return scalar_count(params_); }

 private:
  std::vector<LayerSpec> layers_;
  ParamList params_;
};

enum class TraceKind { kEmpty, kShallow, kDeep };

// Activations cached by a forward pass. inputs[i] is the input of layer i.
// Deep traces additionally carry softmax probabilities and labels.
struct ForwardTrace {
  TraceKind kind = TraceKind::kEmpty;
  std::vector<Matrix> inputs;
  Matrix probabilities;
  std::vector<int> labels;
  double loss = 0.0;
};

struct ShallowForward {
  Matrix features;
  ForwardTrace trace;
};

struct DeepForward {
  double loss = 0.0;
  ForwardTrace trace;
};

struct DeepBackward {
  ParamList grads;
  Matrix grad_features;
};

// Client half of the split. features has shallow.out_dim() rows and one
// column per example.
ShallowForward forward_shallow(const Network& shallow, const Matrix& batch);

// Mediator half: the last layer produces logits; the loss is the mean
// softmax cross-entropy over columns.
DeepForward forward_deep(const Network& deep, const Matrix& features, std::span<const int> labels);

// Gradients of the mean loss. The 1/batch factor is applied once, at the
// loss layer.
DeepBackward backward_deep(const Network& deep, const ForwardTrace& trace);

ParamList backward_shallow(const Network& shallow, const ForwardTrace& trace,
                           const Matrix& grad_features);

// Plain forward pass without caching (used for evaluation).
Matrix forward(const Network& net, const Matrix& batch);

// Column-wise argmax of the network output.
std::vector<int> predict(const Network& net, const Matrix& batch);

// params - eta * grads.
ParamList sgd_step(const ParamList& params, const ParamList& grads, double eta);

// Central differences (f(w + h) - f(w - h)) / 2h for every scalar of params.
ParamList finite_diff_gradient(const std::function<double(const ParamList&)>& loss,
                               const ParamList& params, double step);

// Shallow stack on the client, deep stack on the mediator.
struct SplitModel {
  Network shallow;
  Network deep;

  SplitModel() = default;
  SplitModel(Network shallow_part, Network deep_part);

  std::size_t boundary_dim() const { return shallow.out_dim(); }

  // The unsplit model: shallow layers followed by deep layers.
  Network merged() const;
};

// dense(input -> hidden) + relu | dense(hidden -> hidden) + relu + dense(hidden -> classes).
SplitModel make_default_split_model(std::size_t input_dim, std::size_t hidden, std::size_t classes,
                                    std::uint64_t seed);

// Splits a monolithic network after the first cut_layers layers.
SplitModel split_network(const Network& net, std::size_t cut_layers);

}  // namespace hfl
