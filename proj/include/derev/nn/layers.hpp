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

#include <cmath>

#include "derev/nn/grid.hpp"

namespace derev::nn {

constexpr double kBatchNormEpsilon = 1e-5;
constexpr double kBatchNormMomentum = 0.9;

// Kernel geometry with same-padding: output bin ko reads input bins
// ko*stride + a - (kernel_k-1)/2, output frame l reads frames
// l + b - (kernel_l-1)/2. Out-of-range cells read as zero.
struct KernelGeometry {
  Index kernel_k = 1;
  Index kernel_l = 1;
  Index stride = 1;

  Index taps() const { return kernel_k * kernel_l; }
  Index reduced_bins(Index bins) const { return (bins + stride - 1) / stride; }
};

inline KernelGeometry geometry(const LayerSpec& layer) { return {layer.kernel_k, layer.kernel_l, layer.stride_k}; }

// Parameters of one layer. Conv weights are out x (taps * in); transposed
// conv weights are in x (taps * out), i.e. the weight of the adjoint conv.
// Column index is tap * channels + channel with tap = a * kernel_l + b.
template <typename Scalar>
struct LayerParams {
  Matrix<Scalar> weight;
  Vector<Scalar> bias;
  Vector<Scalar> bn_scale;
  Vector<Scalar> bn_shift;
  Vector<Scalar> running_mean;
  Vector<Scalar> running_var;

  static LayerParams zeros(const LayerSpec& spec) {
    LayerParams p;
    if (spec.kind == LayerKind::kConv) {
      p.weight = Matrix<Scalar>::Zero(spec.out_channels, spec.taps() * spec.in_channels);
    } else {
      p.weight = Matrix<Scalar>::Zero(spec.in_channels, spec.taps() * spec.out_channels);
    }
    p.bias = Vector<Scalar>::Zero(spec.out_channels);
    if (spec.batchnorm) {
      p.bn_scale = Vector<Scalar>::Ones(spec.out_channels);
      p.bn_shift = Vector<Scalar>::Zero(spec.out_channels);
      p.running_mean = Vector<Scalar>::Zero(spec.out_channels);
      p.running_var = Vector<Scalar>::Ones(spec.out_channels);
    }
    return p;
  }

  template <typename Other>
  LayerParams<Other> cast() const {
    return {weight.template cast<Other>(),       bias.template cast<Other>(),
            bn_scale.template cast<Other>(),     bn_shift.template cast<Other>(),
            running_mean.template cast<Other>(), running_var.template cast<Other>()};
  }
};

// Gathers the receptive field of every output cell: rows tap*C + c,
// columns l * reduced_bins + ko.
template <typename Scalar>
Matrix<Scalar> im2col(const Grid3<Scalar>& x, const KernelGeometry& g) {
  const Index c = x.channels, kb = x.bins, frames = x.frames;
  const Index ks = g.reduced_bins(kb);
  const Index pk = (g.kernel_k - 1) / 2, pl = (g.kernel_l - 1) / 2;
  Matrix<Scalar> cols = Matrix<Scalar>::Zero(c * g.taps(), ks * frames);
  for (Index l = 0; l < frames; ++l) {
    for (Index b = 0; b < g.kernel_l; ++b) {
      const Index src_l = l + b - pl;
      if (src_l < 0 || src_l >= frames) continue;
      for (Index ko = 0; ko < ks; ++ko) {
        const Index col = l * ks + ko;
        for (Index a = 0; a < g.kernel_k; ++a) {
          const Index src_k = ko * g.stride + a - pk;
          if (src_k < 0 || src_k >= kb) continue;
          cols.block((a * g.kernel_l + b) * c, col, c, 1) = x.values.col(src_l * kb + src_k);
        }
      }
    }
  }
  return cols;
}

// Adjoint of im2col: scatters-adds columns back onto a channels x bins x
// frames grid.
template <typename Scalar>
Grid3<Scalar> col2im(const Matrix<Scalar>& cols, Index channels, Index bins, Index frames,
                     const KernelGeometry& g) {
  const Index ks = g.reduced_bins(bins);
  const Index pk = (g.kernel_k - 1) / 2, pl = (g.kernel_l - 1) / 2;
  Grid3<Scalar> x(channels, bins, frames);
  for (Index l = 0; l < frames; ++l) {
    for (Index b = 0; b < g.kernel_l; ++b) {
      const Index dst_l = l + b - pl;
      if (dst_l < 0 || dst_l >= frames) continue;
      for (Index ko = 0; ko < ks; ++ko) {
        const Index col = l * ks + ko;
        for (Index a = 0; a < g.kernel_k; ++a) {
          const Index dst_k = ko * g.stride + a - pk;
          if (dst_k < 0 || dst_k >= bins) continue;
          x.values.col(dst_l * bins + dst_k) += cols.block((a * g.kernel_l + b) * channels, col, channels, 1);
        }
      }
    }
  }
  return x;
}

// Strided cross-correlation with same padding; bins_out = ceil(bins_in / s).
template <typename Scalar>
Grid3<Scalar> conv2d(const Grid3<Scalar>& x, const LayerSpec& layer, const LayerParams<Scalar>& p) {
  if (x.channels != layer.in_channels) {
    throw DataError("conv2d expects " + std::to_string(layer.in_channels) + " input channels, got " +
                    std::to_string(x.channels));
  }
  const KernelGeometry g = geometry(layer);
  Grid3<Scalar> y(layer.out_channels, g.reduced_bins(x.bins), x.frames);
  y.values.noalias() = p.weight * im2col(x, g);
  y.values.colwise() += p.bias;
  return y;
}

// Gradients of conv2d. Accumulates into grad_weight / grad_bias and returns
// the gradient with respect to x (skipped when want_input is false).
template <typename Scalar>
Grid3<Scalar> conv2d_backward(const Grid3<Scalar>& x, const Grid3<Scalar>& grad_y, const LayerSpec& layer,
                              const LayerParams<Scalar>& p, LayerParams<Scalar>& grad, bool want_input = true) {
  const KernelGeometry g = geometry(layer);
  grad.weight.noalias() += grad_y.values * im2col(x, g).transpose();
  grad.bias.noalias() += grad_y.values.rowwise().sum();
  if (!want_input) return {};
  const Matrix<Scalar> cols = p.weight.transpose() * grad_y.values;
  return col2im(cols, x.channels, x.bins, x.frames, g);
}

// Fractionally strided counterpart of conv2d: bins_out = s * bins_in, and
// without bias it is exactly the adjoint of conv2d with the same weight.
template <typename Scalar>
Grid3<Scalar> tconv2d(const Grid3<Scalar>& x, const LayerSpec& layer, const LayerParams<Scalar>& p) {
  if (x.channels != layer.in_channels) {
    throw DataError("tconv2d expects " + std::to_string(layer.in_channels) + " input channels, got " +
                    std::to_string(x.channels));
  }
  const KernelGeometry g = geometry(layer);
  const Matrix<Scalar> cols = p.weight.transpose() * x.values;
  Grid3<Scalar> y = col2im(cols, layer.out_channels, x.bins * g.stride, x.frames, g);
  y.values.colwise() += p.bias;
  return y;
}

template <typename Scalar>
Grid3<Scalar> tconv2d_backward(const Grid3<Scalar>& x, const Grid3<Scalar>& grad_y, const LayerSpec& layer,
                               const LayerParams<Scalar>& p, LayerParams<Scalar>& grad, bool want_input = true) {
  const KernelGeometry g = geometry(layer);
  const Matrix<Scalar> cols = im2col(grad_y, g);
  grad.weight.noalias() += x.values * cols.transpose();
  grad.bias.noalias() += grad_y.values.rowwise().sum();
  if (!want_input) return {};
  Grid3<Scalar> dx(x.channels, x.bins, x.frames);
  dx.values.noalias() = p.weight * cols;
  return dx;
}

// Per-channel statistics of a batch-norm forward pass, kept for backward.
template <typename Scalar>
struct BatchNormCache {
  Batch<Scalar> normalized;  // x_hat
  Vector<Scalar> inv_std;
  Mode mode = Mode::kEval;
};

// Normalizes each channel over (batch, k, l). Train mode uses the batch
// statistics and folds them into the running estimates with momentum 0.9;
// eval mode uses the running estimates. Operates in place.
template <typename Scalar>
void batchnorm(Batch<Scalar>& batch, LayerParams<Scalar>& p, Mode mode, BatchNormCache<Scalar>* cache = nullptr) {
  if (batch.empty()) throw UsageError("batchnorm on an empty batch");
  const Index channels = batch.front().channels;
  const auto eps = static_cast<Scalar>(kBatchNormEpsilon);
  Vector<Scalar> mean, var;
  if (mode == Mode::kTrain) {
    if (batch.size() < 2) throw UsageError("train-mode batchnorm needs at least two examples");
    Index count = 0;
    mean = Vector<Scalar>::Zero(channels);
    for (const auto& x : batch) {
      mean += x.values.rowwise().sum();
      count += x.values.cols();
    }
    mean /= static_cast<Scalar>(count);
    var = Vector<Scalar>::Zero(channels);
    for (const auto& x : batch) var += (x.values.colwise() - mean).array().square().matrix().rowwise().sum();
    var /= static_cast<Scalar>(count);
    const auto m = static_cast<Scalar>(kBatchNormMomentum);
    const Scalar unbias = static_cast<Scalar>(count) / static_cast<Scalar>(std::max<Index>(1, count - 1));
    p.running_mean = m * p.running_mean + (1 - m) * mean;
    p.running_var = m * p.running_var + (1 - m) * unbias * var;
  } else {
    mean = p.running_mean;
    var = p.running_var;
  }
  const Vector<Scalar> inv_std = (var.array() + eps).rsqrt().matrix();
  if (cache) {
    cache->inv_std = inv_std;
    cache->mode = mode;
    cache->normalized.clear();
  }
  for (auto& x : batch) {
    x.values = ((x.values.colwise() - mean).array().colwise() * inv_std.array()).matrix();
    if (cache) cache->normalized.push_back(x);
    x.values = ((x.values.array().colwise() * p.bn_scale.array()).colwise() + p.bn_shift.array()).matrix();
  }
}

// In-place backward of batchnorm: grad holds dL/dy on entry and dL/dx on
// return; scale and shift gradients are accumulated.
template <typename Scalar>
void batchnorm_backward(Batch<Scalar>& grad, const BatchNormCache<Scalar>& cache, const LayerParams<Scalar>& p,
                        LayerParams<Scalar>& pgrad) {
  const Index channels = p.bn_scale.size();
  Vector<Scalar> sum_dxhat = Vector<Scalar>::Zero(channels);
  Vector<Scalar> sum_dxhat_xhat = Vector<Scalar>::Zero(channels);
  Index count = 0;
  for (std::size_t e = 0; e < grad.size(); ++e) {
    const Matrix<Scalar>& xhat = cache.normalized[e].values;
    pgrad.bn_scale += grad[e].values.cwiseProduct(xhat).rowwise().sum();
    pgrad.bn_shift += grad[e].values.rowwise().sum();
    grad[e].values = (grad[e].values.array().colwise() * p.bn_scale.array()).matrix();  // d x_hat
    sum_dxhat += grad[e].values.rowwise().sum();
    sum_dxhat_xhat += grad[e].values.cwiseProduct(xhat).rowwise().sum();
    count += xhat.cols();
  }
  const auto n = static_cast<Scalar>(count);
  for (std::size_t e = 0; e < grad.size(); ++e) {
    auto g = grad[e].values.array();
    if (cache.mode == Mode::kTrain) {
      const auto& xhat = cache.normalized[e].values.array();
      g = (g.colwise() - sum_dxhat.array() / n) - xhat.colwise() * (sum_dxhat_xhat.array() / n);
    }
    g.colwise() *= cache.inv_std.array();
  }
}

template <typename Scalar>
void relu_inplace(Grid3<Scalar>& x) {
  x.values = x.values.cwiseMax(Scalar(0));
}

}  // namespace derev::nn
