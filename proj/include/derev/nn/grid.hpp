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

#include <Eigen/Core>
#include <string>
#include <utility>
#include <vector>

#include "derev/error.hpp"

namespace derev::nn {

using Eigen::Index;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

// Channels x frequency x frames tensor. Stored as a channels-by-(bins*frames)
// matrix whose column index is frame * bins + bin, so every (k, l) cell is a
// contiguous channel vector.
template <typename Scalar>
struct Grid3 {
  Index channels = 0;
  Index bins = 0;
  Index frames = 0;
  Matrix<Scalar> values;

  Grid3() = default;
  Grid3(Index c, Index k, Index l) : channels(c), bins(k), frames(l), values(Matrix<Scalar>::Zero(c, k * l)) {}

  Scalar& operator()(Index c, Index k, Index l) { return values(c, l * bins + k); }
  Scalar operator()(Index c, Index k, Index l) const { return values(c, l * bins + k); }

  // Channel c viewed as a bins x frames matrix.
  Eigen::Map<Matrix<Scalar>, 0, Eigen::Stride<Eigen::Dynamic, Eigen::Dynamic>> channel(Index c) {
    return {values.data() + c, bins, frames, Eigen::Stride<Eigen::Dynamic, Eigen::Dynamic>(channels * bins, channels)};
  }
  Eigen::Map<const Matrix<Scalar>, 0, Eigen::Stride<Eigen::Dynamic, Eigen::Dynamic>> channel(Index c) const {
    return {values.data() + c, bins, frames, Eigen::Stride<Eigen::Dynamic, Eigen::Dynamic>(channels * bins, channels)};
  }

  bool same_shape(const Grid3& other) const {
    return channels == other.channels && bins == other.bins && frames == other.frames;
  }

  template <typename Other>
  Grid3<Other> cast() const {
    Grid3<Other> out;
    out.channels = channels;
    out.bins = bins;
    out.frames = frames;
    out.values = values.template cast<Other>();
    return out;
  }
};

// Single-channel grid from a bins x frames matrix.
template <typename Scalar, typename Derived>
Grid3<Scalar> grid_from_matrix(const Eigen::MatrixBase<Derived>& m) {
  Grid3<Scalar> g(1, m.rows(), m.cols());
  g.channel(0) = m.template cast<Scalar>();
  return g;
}

// Stacks a's channels on top of b's. Throws DataError unless the two grids
// share the same bins and frames.
template <typename Scalar>
Grid3<Scalar> concat_channels(const Grid3<Scalar>& a, const Grid3<Scalar>& b) {
  if (a.bins != b.bins || a.frames != b.frames) {
    throw DataError("skip concatenation shape mismatch: " + std::to_string(a.bins) + "x" +
                    std::to_string(a.frames) + " vs " + std::to_string(b.bins) + "x" + std::to_string(b.frames));
  }
  Grid3<Scalar> out(a.channels + b.channels, a.bins, a.frames);
  out.values.topRows(a.channels) = a.values;
  out.values.bottomRows(b.channels) = b.values;
  return out;
}

// A mini-batch: one grid per example. Examples may differ in frame count.
template <typename Scalar>
using Batch = std::vector<Grid3<Scalar>>;

enum class LayerKind { kConv, kTransposedConv };
enum class Activation { kReLU, kLinear };
enum class Mode { kTrain, kEval };

struct LayerSpec {
  LayerKind kind = LayerKind::kConv;
  Index in_channels = 1;
  Index out_channels = 1;
  Index kernel_k = 9;
  Index kernel_l = 1;
  Index stride_k = 1;
  Index stride_l = 1;
  bool batchnorm = true;
  Activation activation = Activation::kReLU;

  Index taps() const { return kernel_k * kernel_l; }
  bool operator==(const LayerSpec&) const = default;
};

// A skip pair (e, d) concatenates the output of layer e onto the output of
// layer d to form the input of layer d + 1. Layers are numbered from 1.
struct SkipPair {
  int encoder;
  int decoder;
  bool operator==(const SkipPair&) const = default;
};

struct UNetSpec {
  std::vector<LayerSpec> layers;  // hidden layers followed by the output layer
  std::vector<SkipPair> skips;

  Index output_channels() const { return layers.empty() ? 0 : layers.back().out_channels; }
  Index input_channels() const { return layers.empty() ? 0 : layers.front().in_channels; }
  Index context() const { return layers.empty() ? 0 : layers.front().kernel_l; }
  // Frequency bins must be divisible by this for the down/up schedule to close.
  Index bin_multiple() const;
  // Encoder layer concatenated into the input of `layer` (1-based), or 0.
  int skip_source(int layer) const;
  bool operator==(const UNetSpec&) const = default;
};

// Throws ConfigError on even kernels along k, strides outside {1, 2},
// stride along l other than 1, or channel counts that do not chain.
void validate(const UNetSpec& spec);

// Eleven hidden layers with channels [16,16,32,32,64,64,64,32,32,16,16]:
// five stride-2 encoder convolutions, a stride-1 bottleneck, five stride-2
// transposed convolutions and a 9x1 linear output convolution. The first
// layer's kernel spans `context` frames. A different eleven-entry channel plan
// may be supplied; an empty plan selects the default.
UNetSpec default_unet_spec(Index output_channels = 9, Index context = 5, const std::vector<Index>& channels = {});

inline const std::vector<Index>& default_channel_plan() {
  static const std::vector<Index> plan{16, 16, 32, 32, 64, 64, 64, 32, 32, 16, 16};
  return plan;
}

// Two hidden layers (3x3 stride-2 conv, 3x1 conv) with a skip into a
// stride-2 transposed-conv output layer. Used for gradient checks.
UNetSpec tiny_unet_spec(Index output_channels = 2);

}  // namespace derev::nn
