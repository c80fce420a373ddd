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

#include "hfl/nn.hpp"

#include <algorithm>
#include <cmath>

#include "hfl/error.hpp"
#include "hfl/rng.hpp"

namespace hfl {

namespace {

std::string kind_name(LayerKind kind) {
  switch (kind) {
    case LayerKind::kDense: return "dense";
    case LayerKind::kRelu: return "relu";
    case LayerKind::kFlatten: return "flatten";
    case LayerKind::kConvSmall: return "conv-small";
  }
  return "unknown";
}

Matrix dense_forward(const Matrix& w, const Matrix& b, const Matrix& x) {
  Matrix y = matmul(w, x);
  for (std::size_t r = 0; r < y.rows(); ++r) {
    const double bias = b(r, 0);
    for (double& v : y.row(r)) v += bias;
  }
  return y;
}

Matrix relu_forward(const Matrix& x) {
  Matrix y = x;
  for (double& v : y.data()) v = v > 0.0 ? v : 0.0;
  return y;
}

Matrix conv_forward(const ConvShape& s, const Matrix& kernel, const Matrix& bias, const Matrix& x) {
  const std::size_t oh = s.out_height();
  const std::size_t ow = s.out_width();
  const std::size_t kk = s.kernel * s.kernel;
  Matrix y(s.out_channels * oh * ow, x.cols());
  for (std::size_t n = 0; n < x.cols(); ++n) {
    for (std::size_t co = 0; co < s.out_channels; ++co) {
      for (std::size_t oy = 0; oy < oh; ++oy) {
        for (std::size_t ox = 0; ox < ow; ++ox) {
          double acc = bias(co, 0);
          for (std::size_t ci = 0; ci < s.in_channels; ++ci)
            for (std::size_t ky = 0; ky < s.kernel; ++ky)
              for (std::size_t kx = 0; kx < s.kernel; ++kx)
                acc += kernel(co, ci * kk + ky * s.kernel + kx) *
                       x((ci * s.height + oy + ky) * s.width + ox + kx, n);
          y((co * oh + oy) * ow + ox, n) = acc;
        }
      }
    }
  }
  return y;
}

void conv_backward(const ConvShape& s, const Matrix& kernel, const Matrix& x, const Matrix& g,
                   Matrix& d_kernel, Matrix& d_bias, Matrix& d_x) {
  const std::size_t oh = s.out_height();
  const std::size_t ow = s.out_width();
  const std::size_t kk = s.kernel * s.kernel;
  d_kernel = Matrix(kernel.rows(), kernel.cols());
  d_bias = Matrix(s.out_channels, 1);
  d_x = Matrix(x.rows(), x.cols());
  for (std::size_t n = 0; n < x.cols(); ++n) {
    for (std::size_t co = 0; co < s.out_channels; ++co) {
      for (std::size_t oy = 0; oy < oh; ++oy) {
        for (std::size_t ox = 0; ox < ow; ++ox) {
          const double go = g((co * oh + oy) * ow + ox, n);
          if (go == 0.0) continue;
          d_bias(co, 0) += go;
          for (std::size_t ci = 0; ci < s.in_channels; ++ci)
            for (std::size_t ky = 0; ky < s.kernel; ++ky)
              for (std::size_t kx = 0; kx < s.kernel; ++kx) {
                const std::size_t xi = (ci * s.height + oy + ky) * s.width + ox + kx;
                const std::size_t ki = ci * kk + ky * s.kernel + kx;
                d_kernel(co, ki) += go * x(xi, n);
                d_x(xi, n) += go * kernel(co, ki);
              }
        }
      }
    }
  }
}

// Runs all layers; when cache is non-null stores the input of each layer.
Matrix run_layers(const Network& net, const Matrix& batch, std::vector<Matrix>* cache) {
  if (batch.rows() != net.in_dim()) {
    throw DimensionError("split-nn", "batch has " + std::to_string(batch.rows()) +
                                         " rows, network expects " + std::to_string(net.in_dim()));
  }
  if (!all_finite(batch)) throw NumericError("split-nn", "batch contains non-finite entries");
  if (cache) cache->clear();
  Matrix x = batch;
  std::size_t slot = 0;
  for (const LayerSpec& layer : net.layers()) {
    Matrix y;
    switch (layer.kind) {
      case LayerKind::kDense:
        y = dense_forward(net.params()[slot], net.params()[slot + 1], x);
        break;
      case LayerKind::kRelu:
        y = relu_forward(x);
        break;
      case LayerKind::kFlatten:
        y = x;
        break;
      case LayerKind::kConvSmall:
        y = conv_forward(layer.conv, net.params()[slot], net.params()[slot + 1], x);
        break;
    }
    slot += layer.param_slots();
    if (cache) cache->push_back(std::move(x));
    x = std::move(y);
  }
  return x;
}

// Backpropagates grad_out through all layers using cached inputs; fills
// grads (same layout as params) and returns the gradient w.r.t. the input.
Matrix backprop_layers(const Network& net, const std::vector<Matrix>& inputs, Matrix grad,
                       ParamList& grads) {
  grads = zeros_like(net.params());
  std::size_t slot = net.params().size();
  for (std::size_t li = net.layers().size(); li-- > 0;) {
    const LayerSpec& layer = net.layers()[li];
    const Matrix& x = inputs[li];
    slot -= layer.param_slots();
    switch (layer.kind) {
      case LayerKind::kDense: {
        const Matrix& w = net.params()[slot];
        grads[slot] = matmul_nt(grad, x);
        Matrix db(grad.rows(), 1);
        for (std::size_t r = 0; r < grad.rows(); ++r) {
          double acc = 0.0;
          for (double v : grad.row(r)) acc += v;
          db(r, 0) = acc;
        }
        grads[slot + 1] = std::move(db);
        grad = matmul_tn(w, grad);
        break;
      }
      case LayerKind::kRelu:
        for (std::size_t i = 0; i < grad.size(); ++i)
          if (!(x.data()[i] > 0.0)) grad.data()[i] = 0.0;
        break;
      case LayerKind::kFlatten:
        break;
      case LayerKind::kConvSmall: {
        Matrix dk, db, dx;
        conv_backward(layer.conv, net.params()[slot], x, grad, dk, db, dx);
        grads[slot] = std::move(dk);
        grads[slot + 1] = std::move(db);
        grad = std::move(dx);
        break;
      }
    }
  }
  return grad;
}

void require_trace(const Network& net, const ForwardTrace& trace, TraceKind kind, const char* op) {
  if (trace.kind == TraceKind::kEmpty) {
    throw Error("split-nn", std::string(op) + ": missing forward trace");
  }
  if (trace.kind != kind || trace.inputs.size() != net.layers().size()) {
    throw Error("split-nn", std::string(op) + ": stale trace does not match this network");
  }
  for (std::size_t i = 0; i < net.layers().size(); ++i) {
    if (trace.inputs[i].rows() != net.layers()[i].in_dim) {
      throw Error("split-nn", std::string(op) + ": stale trace does not match this network");
    }
  }
}

}  // namespace

LayerSpec LayerSpec::dense(std::size_t in, std::size_t out) {
  return LayerSpec{LayerKind::kDense, in, out, {}};
}

LayerSpec LayerSpec::relu(std::size_t dim) { return LayerSpec{LayerKind::kRelu, dim, dim, {}}; }

LayerSpec LayerSpec::flatten(std::size_t dim) {
  return LayerSpec{LayerKind::kFlatten, dim, dim, {}};
}

LayerSpec LayerSpec::conv_small(std::size_t in_channels, std::size_t height, std::size_t width,
                                std::size_t out_channels, std::size_t kernel) {
  if (kernel == 0 || kernel > height || kernel > width) {
    throw DimensionError("split-nn", "conv-small kernel " + std::to_string(kernel) +
                                         " does not fit a " + std::to_string(height) + "x" +
                                         std::to_string(width) + " input");
  }
  ConvShape s{in_channels, height, width, out_channels, kernel};
  return LayerSpec{LayerKind::kConvSmall, in_channels * height * width,
                   out_channels * s.out_height() * s.out_width(), s};
}

std::size_t LayerSpec::param_slots() const noexcept {
  return kind == LayerKind::kDense || kind == LayerKind::kConvSmall ? 2 : 0;
}

std::size_t scalar_count(const ParamList& params) noexcept {
  std::size_t n = 0;
  for (const Matrix& p : params) n += p.size();
  return n;
}

ParamList zeros_like(const ParamList& params) {
  ParamList out;
  out.reserve(params.size());
  for (const Matrix& p : params) out.emplace_back(p.rows(), p.cols());
  return out;
}

double l2_norm(const ParamList& params) {
  double acc = 0.0;
  for (const Matrix& p : params)
    for (double v : p.data()) acc += v * v;
  return std::sqrt(acc);
}

bool same_layout(const ParamList& a, const ParamList& b) noexcept {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (!a[i].same_shape(b[i])) return false;
  return true;
}

Network::Network(std::vector<LayerSpec> layers, ParamList params)
    : layers_(std::move(layers)), params_(std::move(params)) {
  if (layers_.empty()) throw DimensionError("split-nn", "network has no layers");
  std::size_t slot = 0;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const LayerSpec& l = layers_[i];
    if (i > 0 && layers_[i - 1].out_dim != l.in_dim) {
      throw DimensionError("split-nn", "layer " + std::to_string(i) + " (" + kind_name(l.kind) +
                                           ") expects input " + std::to_string(l.in_dim) +
                                           " but previous layer produces " +
                                           std::to_string(layers_[i - 1].out_dim));
    }
    if (l.param_slots() == 0) continue;
    if (slot + 2 > params_.size()) {
      throw DimensionError("split-nn", "missing parameters for layer " + std::to_string(i));
    }
    std::size_t wr = l.out_dim, wc = l.in_dim, br = l.out_dim;
    if (l.kind == LayerKind::kConvSmall) {
      wr = l.conv.out_channels;
      wc = l.conv.in_channels * l.conv.kernel * l.conv.kernel;
      br = l.conv.out_channels;
    }
    if (params_[slot].rows() != wr || params_[slot].cols() != wc || params_[slot + 1].rows() != br ||
        params_[slot + 1].cols() != 1) {
      throw DimensionError("split-nn", "parameter shapes for layer " + std::to_string(i) + " are " +
                                           params_[slot].shape_string() + " / " +
                                           params_[slot + 1].shape_string() + ", expected " +
                                           std::to_string(wr) + "x" + std::to_string(wc) + " / " +
                                           std::to_string(br) + "x1");
    }
    slot += 2;
  }
  if (slot != params_.size()) {
    throw DimensionError("split-nn", "network has " + std::to_string(params_.size()) +
                                         " parameter matrices, layers need " + std::to_string(slot));
  }
}

Network Network::initialize(std::vector<LayerSpec> layers, std::uint64_t seed) {
  Rng rng(seed);
  ParamList params;
  for (const LayerSpec& l : layers) {
    if (l.param_slots() == 0) continue;
    std::size_t rows = l.out_dim, cols = l.in_dim, fan_in = l.in_dim, fan_out = l.out_dim;
    if (l.kind == LayerKind::kConvSmall) {
      const std::size_t kk = l.conv.kernel * l.conv.kernel;
      rows = l.conv.out_channels;
      cols = l.conv.in_channels * kk;
      fan_in = l.conv.in_channels * kk;
      fan_out = l.conv.out_channels * kk;
    }
    const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Matrix w(rows, cols);
    for (double& v : w.data()) v = rng.uniform(-a, a);
    params.push_back(std::move(w));
    params.emplace_back(rows, 1);
  }
  return Network(std::move(layers), std::move(params));
}

void Network::set_params(ParamList params) {
  if (!same_layout(params, params_)) {
    throw DimensionError("split-nn", "replacement parameters do not match the network layout");
  }
  params_ = std::move(params);
}

std::size_t Network::in_dim() const { return layers_.empty() ? 0 : layers_.front().in_dim; }
std::size_t Network::out_dim() const { return layers_.empty() ? 0 : layers_.back().out_dim; }

ShallowForward forward_shallow(const Network& shallow, const Matrix& batch) {
  ShallowForward out;
  out.trace.kind = TraceKind::kShallow;
  out.features = run_layers(shallow, batch, &out.trace.inputs);
  return out;
}

DeepForward forward_deep(const Network& deep, const Matrix& features, std::span<const int> labels) {
  if (labels.size() != features.cols()) {
    throw DimensionError("split-nn", "got " + std::to_string(labels.size()) + " labels for " +
                                         std::to_string(features.cols()) + " examples");
  }
  const auto classes = static_cast<int>(deep.out_dim());
  for (int y : labels) {
    if (y < 0 || y >= classes) {
      throw Error("split-nn", "label " + std::to_string(y) + " outside class range [0, " +
                                  std::to_string(classes) + ")");
    }
  }
  DeepForward out;
  out.trace.kind = TraceKind::kDeep;
  const Matrix logits = run_layers(deep, features, &out.trace.inputs);
  const std::size_t n = logits.cols();
  Matrix probs(logits.rows(), n);
  double total = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    double peak = logits(0, j);
    for (std::size_t c = 1; c < logits.rows(); ++c) peak = std::max(peak, logits(c, j));
    double sum = 0.0;
    for (std::size_t c = 0; c < logits.rows(); ++c) {
      probs(c, j) = std::exp(logits(c, j) - peak);
      sum += probs(c, j);
    }
    for (std::size_t c = 0; c < logits.rows(); ++c) probs(c, j) /= sum;
    const auto y = static_cast<std::size_t>(labels[j]);
    total += std::log(sum) - (logits(y, j) - peak);
  }
  out.loss = n == 0 ? 0.0 : total / static_cast<double>(n);
  if (!std::isfinite(out.loss)) throw NumericError("split-nn", "cross-entropy loss is not finite");
  out.trace.probabilities = std::move(probs);
  out.trace.labels.assign(labels.begin(), labels.end());
  out.trace.loss = out.loss;
  return out;
}

DeepBackward backward_deep(const Network& deep, const ForwardTrace& trace) {
  require_trace(deep, trace, TraceKind::kDeep, "backward_deep");
  Matrix grad = trace.probabilities;
  const std::size_t n = grad.cols();
  for (std::size_t j = 0; j < n; ++j) grad(static_cast<std::size_t>(trace.labels[j]), j) -= 1.0;
  if (n > 0) grad *= 1.0 / static_cast<double>(n);
  DeepBackward out;
  out.grad_features = backprop_layers(deep, trace.inputs, std::move(grad), out.grads);
  return out;
}

ParamList backward_shallow(const Network& shallow, const ForwardTrace& trace,
                           const Matrix& grad_features) {
  require_trace(shallow, trace, TraceKind::kShallow, "backward_shallow");
  if (grad_features.rows() != shallow.out_dim() || grad_features.cols() != trace.inputs.front().cols()) {
    throw DimensionError("split-nn", "feature gradient is " + grad_features.shape_string() +
                                         ", shallow output is " + std::to_string(shallow.out_dim()) +
                                         "x" + std::to_string(trace.inputs.front().cols()));
  }
  ParamList grads;
  backprop_layers(shallow, trace.inputs, grad_features, grads);
  return grads;
}

Matrix forward(const Network& net, const Matrix& batch) { return run_layers(net, batch, nullptr); }

std::vector<int> predict(const Network& net, const Matrix& batch) {
  const Matrix out = forward(net, batch);
  std::vector<int> labels(out.cols());
  for (std::size_t j = 0; j < out.cols(); ++j) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < out.rows(); ++c)
      if (out(c, j) > out(best, j)) best = c;
    labels[j] = static_cast<int>(best);
  }
  return labels;
}

ParamList sgd_step(const ParamList& params, const ParamList& grads, double eta) {
  if (!same_layout(params, grads)) {
    throw DimensionError("split-nn", "sgd_step: gradient layout does not match parameters");
  }
  ParamList out = params;
  for (std::size_t i = 0; i < out.size(); ++i) {
    auto dst = out[i].data();
    auto g = grads[i].data();
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] -= eta * g[k];
  }
  return out;
}

ParamList finite_diff_gradient(const std::function<double(const ParamList&)>& loss,
                               const ParamList& params, double step) {
  if (!(step > 0.0)) throw NumericError("split-nn", "finite-difference step must be positive");
  ParamList grads = zeros_like(params);
  ParamList probe = params;
  for (std::size_t i = 0; i < params.size(); ++i) {
    for (std::size_t k = 0; k < params[i].size(); ++k) {
      const double original = params[i].data()[k];
      probe[i].data()[k] = original + step;
      const double up = loss(probe);
      probe[i].data()[k] = original - step;
      const double down = loss(probe);
      probe[i].data()[k] = original;
      if (!std::isfinite(up) || !std::isfinite(down)) {
        throw NumericError("split-nn", "loss became non-finite while probing parameter " +
                                           std::to_string(i) + "[" + std::to_string(k) + "]");
      }
      grads[i].data()[k] = (up - down) / (2.0 * step);
    }
  }
  return grads;
}

SplitModel::SplitModel(Network shallow_part, Network deep_part)
    : shallow(std::move(shallow_part)), deep(std::move(deep_part)) {
  if (shallow.out_dim() != deep.in_dim()) {
    throw DimensionError("split-nn", "shallow output " + std::to_string(shallow.out_dim()) +
                                         " does not match deep input " + std::to_string(deep.in_dim()));
  }
}

Network SplitModel::merged() const {
  std::vector<LayerSpec> layers = shallow.layers();
  layers.insert(layers.end(), deep.layers().begin(), deep.layers().end());
  ParamList params = shallow.params();
  params.insert(params.end(), deep.params().begin(), deep.params().end());
  return Network(std::move(layers), std::move(params));
}

SplitModel make_default_split_model(std::size_t input_dim, std::size_t hidden, std::size_t classes,
                                    std::uint64_t seed) {
  Network shallow = Network::initialize({LayerSpec::dense(input_dim, hidden), LayerSpec::relu(hidden)},
                                        derive_seed(seed, {1}));
  Network deep = Network::initialize({LayerSpec::dense(hidden, hidden), LayerSpec::relu(hidden),
                                      LayerSpec::dense(hidden, classes)},
                                     derive_seed(seed, {2}));
  return SplitModel(std::move(shallow), std::move(deep));
}

SplitModel split_network(const Network& net, std::size_t cut_layers) {
  const auto& layers = net.layers();
  if (cut_layers == 0 || cut_layers >= layers.size()) {
    throw DimensionError("split-nn", "cut after layer " + std::to_string(cut_layers) +
                                         " leaves an empty half");
  }
  std::size_t slots = 0;
  for (std::size_t i = 0; i < cut_layers; ++i) slots += layers[i].param_slots();
  const auto cut = static_cast<std::ptrdiff_t>(cut_layers);
  const auto pcut = static_cast<std::ptrdiff_t>(slots);
  Network shallow({layers.begin(), layers.begin() + cut},
                  {net.params().begin(), net.params().begin() + pcut});
  Network deep({layers.begin() + cut, layers.end()}, {net.params().begin() + pcut, net.params().end()});
  return SplitModel(std::move(shallow), std::move(deep));
}

}  // namespace hfl
