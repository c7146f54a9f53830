// Copyright 2026 The Derev Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "derev/nn/layers.hpp"

namespace derev::nn {

template <typename Scalar>
struct ModelParams {
  UNetSpec spec;
  std::vector<LayerParams<Scalar>> layers;
  Mode mode = Mode::kTrain;

  static ModelParams zeros(const UNetSpec& spec) {
    validate(spec);
    ModelParams p;
    p.spec = spec;
    for (const auto& layer : spec.layers) p.layers.push_back(LayerParams<Scalar>::zeros(layer));
    return p;
  }

  template <typename Other>
  ModelParams<Other> cast() const {
    ModelParams<Other> out;
    out.spec = spec;
    out.mode = mode;
    for (const auto& l : layers) out.layers.push_back(l.template cast<Other>());
    return out;
  }
};

// Same layout as ModelParams; running statistics stay unused.
template <typename Scalar>
using Gradients = std::vector<LayerParams<Scalar>>;

template <typename Scalar>
Gradients<Scalar> zero_gradients(const UNetSpec& spec) {
  Gradients<Scalar> g = ModelParams<Scalar>::zeros(spec).layers;
  for (auto& l : g) {
    l.bn_scale.setZero();
    l.running_var.setZero();
  }
  return g;
}

// Flat views over the trainable tensors of one layer set, in a fixed order:
// per layer weight, bias, then batch-norm scale and shift when present.
template <typename Scalar>
std::vector<Eigen::Map<Vector<Scalar>>> trainable_views(std::vector<LayerParams<Scalar>>& layers) {
  std::vector<Eigen::Map<Vector<Scalar>>> views;
  const auto add = [&](auto& m) {
    if (m.size() > 0) views.emplace_back(m.data(), m.size());
  };
  for (auto& l : layers) {
    add(l.weight);
    add(l.bias);
    add(l.bn_scale);
    add(l.bn_shift);
  }
  return views;
}

template <typename Scalar>
Index parameter_count(const ModelParams<Scalar>& p, bool include_running_stats = false) {
  Index n = 0;
  for (const auto& l : p.layers) {
    n += l.weight.size() + l.bias.size() + l.bn_scale.size() + l.bn_shift.size();
    if (include_running_stats) n += l.running_mean.size() + l.running_var.size();
  }
  return n;
}

// He-uniform kernels (bound sqrt(6 / fan_in)), zero biases, unit batch-norm
// scale and zero shift.
template <typename Scalar>
ModelParams<Scalar> init_params(const UNetSpec& spec, std::uint64_t seed) {
  ModelParams<Scalar> p = ModelParams<Scalar>::zeros(spec);
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& layer = spec.layers[i];
    double fan_in = static_cast<double>(layer.in_channels * layer.taps());
    if (layer.kind == LayerKind::kTransposedConv) fan_in /= static_cast<double>(layer.stride_k);
    const double bound = std::sqrt(6.0 / fan_in);
    std::uniform_real_distribution<double> u(-bound, bound);
    auto& w = p.layers[i].weight;
    for (Index j = 0; j < w.size(); ++j) w.data()[j] = static_cast<Scalar>(u(rng));
  }
  return p;
}

// Activations recorded by a forward pass.
template <typename Scalar>
struct UNetTape {
  Batch<Scalar> input;
  std::vector<Batch<Scalar>> outputs;  // post-activation output of each layer
  std::vector<BatchNormCache<Scalar>> norms;

  bool empty() const { return outputs.empty(); }
  void clear() {
    input.clear();
    outputs.clear();
    norms.clear();
  }
};

namespace detail {

template <typename Scalar>
Grid3<Scalar> layer_input(const UNetSpec& spec, int layer, const Batch<Scalar>& input,
                          const std::vector<Batch<Scalar>>& outputs, std::size_t example) {
  const Grid3<Scalar>& prev = layer == 1 ? input[example] : outputs[static_cast<std::size_t>(layer - 2)][example];
  if (const int src = spec.skip_source(layer); src > 0) {
    return concat_channels(prev, outputs[static_cast<std::size_t>(src - 1)][example]);
  }
  return prev;
}

}  // namespace detail

// Runs the network over a batch of 1 x K x L inputs (K divisible by
// spec.bin_multiple()). In train mode batch statistics update the running
// estimates in `params`. When `tape` is given the activations needed by
// unet_backward are recorded.
template <typename Scalar>
Batch<Scalar> unet_forward(ModelParams<Scalar>& params, const Batch<Scalar>& input, UNetTape<Scalar>* tape = nullptr) {
  const UNetSpec& spec = params.spec;
  if (input.empty()) throw UsageError("unet_forward on an empty batch");
  for (const auto& x : input) {
    if (x.channels != spec.input_channels()) throw DataError("U-net input has the wrong channel count");
    if (x.bins % spec.bin_multiple() != 0) {
      throw DataError("U-net input bins (" + std::to_string(x.bins) + ") must be a multiple of " +
                      std::to_string(spec.bin_multiple()));
    }
  }
  const int n = static_cast<int>(spec.layers.size());
  std::vector<Batch<Scalar>> outputs(static_cast<std::size_t>(n));
  std::vector<BatchNormCache<Scalar>> norms(static_cast<std::size_t>(n));
  for (int i = 1; i <= n; ++i) {
    const auto idx = static_cast<std::size_t>(i - 1);
    const LayerSpec& layer = spec.layers[idx];
    LayerParams<Scalar>& p = params.layers[idx];
    Batch<Scalar>& out = outputs[idx];
    out.reserve(input.size());
    for (std::size_t e = 0; e < input.size(); ++e) {
      const Grid3<Scalar> x = detail::layer_input(spec, i, input, outputs, e);
      out.push_back(layer.kind == LayerKind::kConv ? conv2d(x, layer, p) : tconv2d(x, layer, p));
    }
    if (layer.batchnorm) batchnorm(out, p, params.mode, tape ? &norms[idx] : nullptr);
    if (layer.activation == Activation::kReLU) {
      for (auto& y : out) relu_inplace(y);
    }
    // Skip sources must stay alive; everything else only feeds the next layer.
    if (!tape && i >= 2) {
      bool needed = false;
      for (const auto& s : spec.skips) needed |= s.encoder == i - 1;
      if (!needed) outputs[idx - 1].clear();
    }
  }
  Batch<Scalar> result = outputs.back();
  if (tape) {
    tape->input = input;
    tape->outputs = std::move(outputs);
    tape->norms = std::move(norms);
  }
  return result;
}

// Exact reverse-mode gradients of sum(grad_output . output) with respect to
// every trainable parameter, given the tape of the matching forward pass.
template <typename Scalar>
Gradients<Scalar> unet_backward(const ModelParams<Scalar>& params, const UNetTape<Scalar>& tape,
                                const Batch<Scalar>& grad_output) {
  if (tape.empty()) throw UsageError("unet_backward called without a recorded forward pass");
  const UNetSpec& spec = params.spec;
  const int n = static_cast<int>(spec.layers.size());
  if (grad_output.size() != tape.input.size()) throw DataError("gradient batch size does not match the forward pass");
  for (std::size_t e = 0; e < grad_output.size(); ++e) {
    if (!grad_output[e].same_shape(tape.outputs.back()[e])) throw DataError("gradient shape does not match output");
  }

  Gradients<Scalar> grads = zero_gradients<Scalar>(spec);
  std::vector<Batch<Scalar>> upstream(static_cast<std::size_t>(n));
  upstream.back() = grad_output;

  for (int i = n; i >= 1; --i) {
    const auto idx = static_cast<std::size_t>(i - 1);
    const LayerSpec& layer = spec.layers[idx];
    const LayerParams<Scalar>& p = params.layers[idx];
    Batch<Scalar> grad = std::move(upstream[idx]);
    const Batch<Scalar>& out = tape.outputs[idx];
    if (grad.empty()) {
      for (const auto& y : out) grad.emplace_back(y.channels, y.bins, y.frames);
    }
    if (layer.activation == Activation::kReLU) {
      for (std::size_t e = 0; e < grad.size(); ++e) {
        grad[e].values = (out[e].values.array() > Scalar(0)).select(grad[e].values, Scalar(0));
      }
    }
    if (layer.batchnorm) batchnorm_backward(grad, tape.norms[idx], p, grads[idx]);

    const bool want_input = i > 1;
    const int src = spec.skip_source(i);
    for (std::size_t e = 0; e < grad.size(); ++e) {
      const Grid3<Scalar> x = detail::layer_input(spec, i, tape.input, tape.outputs, e);
      Grid3<Scalar> dx = layer.kind == LayerKind::kConv ? conv2d_backward(x, grad[e], layer, p, grads[idx], want_input)
                                                        : tconv2d_backward(x, grad[e], layer, p, grads[idx], want_input);
      if (!want_input) continue;
      const auto route = [&](int target, Index row0, Index rows) {
        Batch<Scalar>& dst = upstream[static_cast<std::size_t>(target - 1)];
        if (dst.empty()) {
          for (const auto& y : tape.outputs[static_cast<std::size_t>(target - 1)]) {
            dst.emplace_back(y.channels, y.bins, y.frames);
          }
        }
        dst[e].values += dx.values.middleRows(row0, rows);
      };
      const Index prev_channels = spec.layers[idx - 1].out_channels;
      route(i - 1, 0, prev_channels);
      if (src > 0) route(src, prev_channels, dx.channels - prev_channels);
    }
  }
  return grads;
}

}  // namespace derev::nn
