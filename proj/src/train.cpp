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

#include "derev/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <random>

#include "derev/checkpoint.hpp"
#include "derev/dsp.hpp"

namespace derev {
namespace {

using GridF = nn::Grid3<float>;
using MatrixF = nn::Matrix<float>;

// Appends identity rows for the bins the network does not see.
GridF extend_bins(const GridF& w, Index bins) {
  GridF out(w.channels, bins, w.frames);
  out.channel(0).setOnes();
  for (Index p = 0; p < w.channels; ++p) out.channel(p).topRows(w.bins) = w.channel(p);
  return out;
}

GridF crop_bins(const GridF& g, Index bins) {
  GridF out(g.channels, bins, g.frames);
  for (Index p = 0; p < g.channels; ++p) out.channel(p) = g.channel(p).topRows(bins);
  return out;
}

MatrixF sigmoid(const MatrixF& z) { return (1.0f / (1.0f + (-z.array()).exp())).matrix(); }

std::uint64_t epoch_seed(std::uint64_t seed, int epoch) {
  return seed * 0x9E3779B97F4A7C15ULL + static_cast<std::uint64_t>(epoch) + 1;
}

std::vector<std::vector<std::size_t>> make_batches(std::size_t count, int batch_size, std::uint64_t seed) {
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<std::size_t>> batches;
  const auto size = static_cast<std::size_t>(batch_size);
  for (std::size_t start = 0; start < count; start += size) {
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(std::min(count, start + size)));
  }
  // Batch statistics need two examples; fold a trailing singleton into its neighbour.
  if (batches.size() > 1 && batches.back().size() == 1) {
    batches[batches.size() - 2].push_back(batches.back().front());
    batches.pop_back();
  }
  return batches;
}

struct BatchResult {
  double loss_sum = 0.0;  // sum of squared errors
  double cells = 0.0;
};

// Forward (and optionally backward + Adam) over one batch in train mode.
BatchResult run_batch(Model& model, const std::vector<TrainingExample>& data, const std::vector<std::size_t>& batch,
                      nn::AdamState<float>* adam, double lr) {
  nn::Batch<float> inputs;
  double cells = 0.0;
  for (std::size_t i : batch) {
    inputs.push_back(data[i].features);
    cells += static_cast<double>(data[i].target.size());
  }
  nn::UNetTape<float> tape;
  const nn::Batch<float> outs = nn::unet_forward(model.params, inputs, adam ? &tape : nullptr);
  BatchResult result;
  result.cells = cells;
  nn::Batch<float> grads;
  for (std::size_t e = 0; e < batch.size(); ++e) {
    const TrainingExample& ex = data[batch[e]];
    const MatrixF est = head_estimate(model.head, outs[e], ex);
    const LossValue<float> loss = mse_loss<float>(est, ex.target, cells);
    result.loss_sum += loss.value * cells;
    if (adam) grads.push_back(head_backward(model.head, outs[e], ex, loss.grad));
  }
  if (!std::isfinite(result.loss_sum)) {
    throw NumericError("training diverged: non-finite loss in a " + to_string(model.head) + " batch");
  }
  if (adam) nn::adam_step(model.params, nn::unet_backward(model.params, tape, grads), *adam, lr);
  return result;
}

void check_split(const std::vector<TrainingExample>& data, const std::string& expected) {
  for (const auto& ex : data) {
    if (ex.split != expected) {
      throw UsageError("example " + ex.id + " from split '" + ex.split + "' passed where '" + expected +
                       "' data is required");
    }
  }
}

}  // namespace

std::string to_string(Head head) {
  switch (head) {
    case Head::kIFilt:
      return "ifilt";
    case Head::kDsm:
      return "dsm";
    case Head::kDirm:
      return "dirm";
  }
  return "unknown";
}

Head parse_head(const std::string& name) {
  if (name == "ifilt") return Head::kIFilt;
  if (name == "dsm") return Head::kDsm;
  if (name == "dirm") return Head::kDirm;
  throw ConfigError("unknown head '" + name + "' (expected ifilt, dsm or dirm)");
}

void validate(const TrainConfig& c) {
  if (c.epochs < 0) throw ConfigError("train.epochs must be non-negative");
  if (c.batch_size < 2) throw ConfigError("train.batch_size must be at least 2 (batch normalization)");
  if (c.context < 1 || c.context % 2 == 0) throw ConfigError("train.context (L_m) must be odd and positive");
  if (c.taps < 1) throw ConfigError("train.taps (P_d) must be positive");
  if (c.early_len < 1) throw ConfigError("train.early_len (Q_e) must be positive");
  if (!(c.lr.initial > 0.0) || !(c.lr.decay > 0.0) || c.lr.period < 1) {
    throw ConfigError("train.lr needs a positive initial rate, decay and period");
  }
  if (c.checkpoint_every < 1) throw ConfigError("train.checkpoint_every must be positive");
}

Index head_output_channels(Head head, Index taps) { return head == Head::kIFilt ? taps : 1; }

nn::UNetSpec make_unet_spec(Head head, const TrainConfig& config) {
  return nn::default_unet_spec(head_output_channels(head, config.taps), config.context, config.channels);
}

Mask wiener_mask_target(const SpectralFrameSet& early, const SpectralFrameSet& late) {
  if (early.num_bins() != late.num_bins() || early.num_frames() != late.num_frames()) {
    throw DataError("early and late spectra have different shapes");
  }
  const Eigen::ArrayXXd e2 = early.coeffs.cwiseAbs2().array();
  const Eigen::ArrayXXd l2 = late.coeffs.cwiseAbs2().array();
  return {(e2 / (e2 + l2).max(kPowerFloor)).matrix()};
}

TrainingExample make_example(std::string id, std::string split, const Waveform& reverberant, const Waveform& early,
                             Head head, const StftConfig& config) {
  if (reverberant.size() != early.size()) throw DataError("reverberant and early signals differ in length: " + id);
  const SpectralFrameSet y = stft(reverberant, config);
  const SpectralFrameSet ye = stft(early, config);
  TrainingExample ex;
  ex.id = std::move(id);
  ex.split = std::move(split);
  const RealGrid v = lps(y).values;
  ex.features = nn::grid_from_matrix<float>(v.topRows(v.rows() - 1));
  ex.magnitude = magnitude(y).cast<float>();
  ex.lps = v.cast<float>();
  switch (head) {
    case Head::kIFilt:
      ex.target = magnitude(ye).cast<float>();
      break;
    case Head::kDsm:
      ex.target = lps(ye).values.cast<float>();
      break;
    case Head::kDirm: {
      const Waveform late{reverberant.samples - early.samples, reverberant.sample_rate};
      ex.target = wiener_mask_target(ye, stft(late, config)).values.cast<float>();
      break;
    }
  }
  return ex;
}

MatrixF head_estimate(Head head, const GridF& net_out, const TrainingExample& ex) {
  const Index bins = ex.magnitude.rows(), frames = ex.magnitude.cols();
  if (net_out.frames != frames || net_out.bins != bins - 1) throw DataError("network output does not match example");
  switch (head) {
    case Head::kIFilt: {
      const GridF stack = shifted_magnitude_stack<float>(ex.magnitude, net_out.channels);
      return apply_inverse_filter(stack, extend_bins(net_out, bins));
    }
    case Head::kDsm: {
      MatrixF est(bins, frames);
      est.topRows(bins - 1) = net_out.channel(0);
      est.row(bins - 1) = ex.lps.row(bins - 1);
      return est;
    }
    case Head::kDirm: {
      MatrixF est(bins, frames);
      est.topRows(bins - 1) = sigmoid(net_out.channel(0));
      est.row(bins - 1).setOnes();
      return est;
    }
  }
  throw UsageError("unknown head");
}

GridF head_backward(Head head, const GridF& net_out, const TrainingExample& ex, const MatrixF& grad_estimate) {
  const Index bins = ex.magnitude.rows();
  switch (head) {
    case Head::kIFilt: {
      const GridF stack = shifted_magnitude_stack<float>(ex.magnitude, net_out.channels);
      return crop_bins(apply_inverse_filter_backward(stack, extend_bins(net_out, bins), grad_estimate), bins - 1);
    }
    case Head::kDsm:
      return nn::grid_from_matrix<float>(grad_estimate.topRows(bins - 1));
    case Head::kDirm: {
      const MatrixF s = sigmoid(net_out.channel(0));
      const MatrixF g = grad_estimate.topRows(bins - 1).cwiseProduct(s).cwiseProduct((1.0f - s.array()).matrix());
      return nn::grid_from_matrix<float>(g);
    }
  }
  throw UsageError("unknown head");
}

Model make_model(Head head, const TrainConfig& config, const StftConfig& stft) {
  validate(config);
  Model m;
  m.params = nn::init_params<float>(make_unet_spec(head, config), config.seed);
  if (head == Head::kIFilt) {
    // Start near W = delta(p): most filtered cells would otherwise sit
    // below the rectifier with no gradient.
    auto& out = m.params.layers.back();
    out.weight *= kFilterInitWeightScale;
    out.bias[0] = 1.0f;
  }
  m.head = head;
  m.config = config;
  m.stft = stft;
  return m;
}

Waveform enhance(Model& model, const Waveform& reverberant) {
  validate(reverberant);
  const SpectralFrameSet y = stft(reverberant, model.stft);
  TrainingExample ex;
  const RealGrid v = lps(y).values;
  ex.features = nn::grid_from_matrix<float>(v.topRows(v.rows() - 1));
  ex.magnitude = magnitude(y).cast<float>();
  ex.lps = v.cast<float>();
  const nn::Mode saved = model.params.mode;
  model.params.mode = nn::Mode::kEval;
  const nn::Batch<float> out = nn::unet_forward(model.params, nn::Batch<float>{ex.features});
  model.params.mode = saved;
  const RealGrid est = head_estimate(model.head, out.front(), ex).cast<double>();
  switch (model.head) {
    case Head::kIFilt:
      return reconstruct(est, y);
    case Head::kDsm:
      return reconstruct(dsm_head_decode(est), y);
    case Head::kDirm:
      return istft(apply_mask(y, Mask{est}));
  }
  throw UsageError("unknown head");
}

Waveform enhance_identity(const Waveform& reverberant, Index taps, const StftConfig& config) {
  const SpectralFrameSet y = stft(reverberant, config);
  const RealGrid mag = magnitude(y);
  const RealGrid est = apply_inverse_filter(shifted_magnitude_stack<double>(mag, taps),
                                            identity_filter(taps, mag.rows(), mag.cols()));
  return reconstruct(est, y);
}

double evaluate_loss(Model& model, const std::vector<TrainingExample>& examples) {
  if (examples.empty()) throw DataError("no examples to evaluate");
  double sum = 0.0, cells = 0.0;
  for (const auto& ex : examples) {
    const nn::Batch<float> out = nn::unet_forward(model.params, nn::Batch<float>{ex.features});
    const LossValue<float> loss = mse_loss<float>(head_estimate(model.head, out.front(), ex), ex.target);
    sum += loss.value * static_cast<double>(ex.target.size());
    cells += static_cast<double>(ex.target.size());
  }
  if (!std::isfinite(sum)) throw NumericError("non-finite evaluation loss");
  return sum / cells;
}

TrainReport train(const TrainConfig& config, Head head, const std::vector<TrainingExample>& train_set,
                  const std::vector<TrainingExample>& validation_set, const TrainOptions& options) {
  validate(config);
  check_split(train_set, "train");
  check_split(validation_set, "validation");
  if (train_set.size() < 2) throw UsageError("training needs at least two examples (batch normalization)");
  std::filesystem::create_directories(options.out_dir);
  const auto last_path = options.out_dir / "last.ckpt";
  const auto best_path = options.out_dir / "best.ckpt";
  const auto log_path = options.out_dir / "train_log.csv";

  Checkpoint state;
  TrainReport report;
  const bool resuming = options.resume && std::filesystem::exists(last_path);
  if (resuming) {
    state = load_checkpoint(last_path);
    if (state.model.head != head) throw ConfigError("checkpoint head differs from the requested head");
    if (state.model.params.spec != make_unet_spec(head, config)) {
      throw ConfigError("checkpoint network layout differs from the configuration");
    }
    state.model.config.epochs = config.epochs;
  } else {
    state.model = make_model(head, config, options.stft);
    state.adam = nn::AdamState<float>::zeros(state.model.params.spec);
    state.best_validation = std::numeric_limits<double>::infinity();
  }
  Model& model = state.model;
  report.first_epoch = state.epoch + 1;

  std::ofstream log(log_path, resuming ? std::ios::app : std::ios::trunc);
  if (!log) throw DataError("cannot write " + log_path.string());
  if (!resuming) log << "epoch,split,loss,lr\n";
  log << std::setprecision(10);

  if (!resuming) {
    // Loss of the untrained network on the first epoch's batches.
    Model probe = model;
    double sum = 0.0, cells = 0.0;
    for (const auto& batch : make_batches(train_set.size(), config.batch_size, epoch_seed(config.seed, 0))) {
      const BatchResult r = run_batch(probe, train_set, batch, nullptr, 0.0);
      sum += r.loss_sum;
      cells += r.cells;
    }
    report.initial_loss = sum / cells;
    if (options.progress) *options.progress << to_string(head) << " initial loss " << report.initial_loss << "\n";
  }

  for (int epoch = report.first_epoch; epoch < config.epochs; ++epoch) {
    const double lr = nn::lr_schedule(epoch, config.lr);
    model.params.mode = nn::Mode::kTrain;
    double sum = 0.0, cells = 0.0;
    for (const auto& batch : make_batches(train_set.size(), config.batch_size, epoch_seed(config.seed, epoch))) {
      const BatchResult r = run_batch(model, train_set, batch, &state.adam, lr);
      sum += r.loss_sum;
      cells += r.cells;
    }
    const double train_loss = sum / cells;
    report.train_loss.push_back(train_loss);
    log << epoch << ",train," << train_loss << "," << lr << "\n";

    model.params.mode = nn::Mode::kEval;
    double val_loss = std::numeric_limits<double>::quiet_NaN();
    if (!validation_set.empty()) {
      val_loss = evaluate_loss(model, validation_set);
      report.validation_loss.push_back(val_loss);
      log << epoch << ",validation," << val_loss << "," << lr << "\n";
    }
    log.flush();
    state.epoch = epoch;

    // Selection: lowest validation loss, or training loss without validation data.
    const double score = validation_set.empty() ? train_loss : val_loss;
    if (score < state.best_validation) {
      state.best_validation = score;
      state.best_epoch = epoch;
      save_checkpoint(best_path, state);
    }
    const bool last = epoch + 1 == config.epochs;
    if ((epoch + 1) % config.checkpoint_every == 0 || last) {
      save_checkpoint(last_path, state);
      char name[32];
      std::snprintf(name, sizeof(name), "epoch_%04d.ckpt", epoch);
      save_checkpoint(options.out_dir / name, state);
    }
    if (options.progress) {
      *options.progress << to_string(head) << " epoch " << epoch << " lr " << lr << " train " << train_loss;
      if (!validation_set.empty()) *options.progress << " validation " << val_loss;
      *options.progress << std::endl;
    }
  }
  if (report.first_epoch >= config.epochs && !std::filesystem::exists(last_path)) save_checkpoint(last_path, state);
  model.params.mode = nn::Mode::kEval;
  report.best_epoch = state.best_epoch;
  report.best_validation = state.best_validation;
  report.best_checkpoint = best_path;
  report.last_checkpoint = last_path;
  return report;
}

}  // namespace derev
