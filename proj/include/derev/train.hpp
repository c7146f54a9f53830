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
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "derev/inverse_filter.hpp"
#include "derev/nn/adam.hpp"
#include "derev/types.hpp"

namespace derev {

// Network heads: per-frame inverse filter, direct LPS regression and a
// Wiener-style ratio mask.
enum class Head { kIFilt, kDsm, kDirm };

std::string to_string(Head head);
Head parse_head(const std::string& name);

struct TrainConfig {
  int epochs = 200;
  int batch_size = 32;
  Index context = 5;     // L_m, frames seen by the input layer
  Index taps = 9;        // P_d, inverse filter length
  Index early_len = 32;  // Q_e
  nn::LrSchedule lr;
  std::uint64_t seed = 0;
  int checkpoint_every = 10;
  std::vector<Index> channels;  // empty selects the default plan

  bool operator==(const TrainConfig&) const = default;
};

void validate(const TrainConfig& config);

Index head_output_channels(Head head, Index taps);

nn::UNetSpec make_unet_spec(Head head, const TrainConfig& config);

template <typename Scalar>
struct LossValue {
  double value = 0.0;
  nn::Matrix<Scalar> grad;  // d loss / d estimate
};

// Mean squared error over the valid cells. The normalizer defaults to the
// number of valid cells; batches pass their total so that per-example sums
// add up to the batch mean.
template <typename Scalar>
LossValue<Scalar> mse_loss(const nn::Matrix<Scalar>& estimate, const nn::Matrix<Scalar>& target,
                           const Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>& valid, double normalizer = 0.0) {
  if (estimate.rows() != target.rows() || estimate.cols() != target.cols() || valid.rows() != target.rows() ||
      valid.cols() != target.cols()) {
    throw DataError("loss inputs have mismatched shapes");
  }
  const auto count = static_cast<double>(valid.count());
  if (count == 0.0) throw DataError("loss mask has no valid cells");
  const double norm = normalizer > 0.0 ? normalizer : count;
  const nn::Matrix<Scalar> diff = valid.select(target - estimate, Scalar(0));
  LossValue<Scalar> out;
  out.value = diff.template cast<double>().squaredNorm() / norm;
  out.grad = static_cast<Scalar>(-2.0 / norm) * diff;
  return out;
}

template <typename Scalar>
LossValue<Scalar> mse_loss(const nn::Matrix<Scalar>& estimate, const nn::Matrix<Scalar>& target,
                           double normalizer = 0.0) {
  const Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> all =
      Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(target.rows(), target.cols(), true);
  return mse_loss<Scalar>(estimate, target, all, normalizer);
}

// |Y^E|^2 / (|Y^E|^2 + |Y^L|^2) with the denominator floored at 1e-10.
Mask wiener_mask_target(const SpectralFrameSet& early, const SpectralFrameSet& late);

// One utterance prepared for a head: network input, reverberant magnitude
// (for the filter and mask heads) and the head's target, all K x L.
struct TrainingExample {
  std::string id;
  std::string split;
  nn::Grid3<float> features;     // 1 x (K-1) x L reverberant LPS
  nn::Matrix<float> magnitude;   // K x L |Y|
  nn::Matrix<float> lps;         // K x L ln |Y|^2
  nn::Matrix<float> target;      // K x L head target
  Index num_frames() const { return magnitude.cols(); }
};

TrainingExample make_example(std::string id, std::string split, const Waveform& reverberant, const Waveform& early,
                             Head head, const StftConfig& config = {});

// Maps a network output to the K x L estimate the loss compares with the
// target. The Nyquist bin bypasses the network: identity filter, reverberant
// LPS, or unit mask.
nn::Matrix<float> head_estimate(Head head, const nn::Grid3<float>& net_out, const TrainingExample& example);

nn::Grid3<float> head_backward(Head head, const nn::Grid3<float>& net_out, const TrainingExample& example,
                               const nn::Matrix<float>& grad_estimate);

struct Model {
  nn::ModelParams<float> params;
  Head head = Head::kIFilt;
  TrainConfig config;
  StftConfig stft;
};

// The inverse-filter head starts from the identity filter: the output bias
// of tap 0 is 1 and the output kernel is He-uniform scaled by this factor.
constexpr float kFilterInitWeightScale = 0.1f;

Model make_model(Head head, const TrainConfig& config, const StftConfig& stft = {});

// Full enhancement path in eval mode: stft, features, network, head, and
// reconstruction with the reverberant phase.
Waveform enhance(Model& model, const Waveform& reverberant);

// The unprocessed baseline pushed through the same path with W = delta(p).
Waveform enhance_identity(const Waveform& reverberant, Index taps, const StftConfig& stft = {});

struct Checkpoint {
  Model model;
  nn::AdamState<float> adam;
  int epoch = -1;  // last completed epoch
  double best_validation = 0.0;
  int best_epoch = -1;
};

struct TrainOptions {
  std::filesystem::path out_dir;
  bool resume = false;
  std::ostream* progress = nullptr;
  StftConfig stft;
};

struct TrainReport {
  double initial_loss = 0.0;
  std::vector<double> train_loss;       // per epoch, indexed from the first epoch run
  std::vector<double> validation_loss;  // empty without validation data
  int first_epoch = 0;
  int best_epoch = -1;
  double best_validation = 0.0;
  std::filesystem::path best_checkpoint;
  std::filesystem::path last_checkpoint;
};

// Mean loss of a model over examples (eval mode unless the params say train).
double evaluate_loss(Model& model, const std::vector<TrainingExample>& examples);

TrainReport train(const TrainConfig& config, Head head, const std::vector<TrainingExample>& train_set,
                  const std::vector<TrainingExample>& validation_set, const TrainOptions& options);

}  // namespace derev
