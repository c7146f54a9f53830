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
#include <cstdint>

#include "derev/nn/unet.hpp"

namespace derev::nn {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

template <typename Scalar>
struct AdamState {
  Gradients<Scalar> first_moment;
  Gradients<Scalar> second_moment;
  std::int64_t step = 0;
  AdamConfig config;

  static AdamState zeros(const UNetSpec& spec) {
    return {zero_gradients<Scalar>(spec), zero_gradients<Scalar>(spec), 0, {}};
  }
};

// One bias-corrected Adam update of every trainable tensor.
template <typename Scalar>
void adam_step(ModelParams<Scalar>& params, Gradients<Scalar> grads, AdamState<Scalar>& state, double lr) {
  auto p = trainable_views(params.layers);
  auto g = trainable_views(grads);
  auto m = trainable_views(state.first_moment);
  auto v = trainable_views(state.second_moment);
  if (p.size() != g.size() || p.size() != m.size() || p.size() != v.size()) {
    throw DataError("Adam: parameter, gradient and moment layouts differ");
  }
  ++state.step;
  const double b1 = state.config.beta1, b2 = state.config.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i].size() != g[i].size()) throw DataError("Adam: gradient shape mismatch");
    m[i] = static_cast<Scalar>(b1) * m[i] + static_cast<Scalar>(1.0 - b1) * g[i];
    v[i] = static_cast<Scalar>(b2) * v[i] + static_cast<Scalar>(1.0 - b2) * g[i].cwiseAbs2();
    const auto m_hat = m[i].array() / static_cast<Scalar>(c1);
    const auto v_hat = v[i].array() / static_cast<Scalar>(c2);
    p[i].array() -= static_cast<Scalar>(lr) * m_hat / (v_hat.sqrt() + static_cast<Scalar>(state.config.epsilon));
  }
}

struct LrSchedule {
  double initial = 1e-3;
  double decay = 0.9;
  int period = 10;

  bool operator==(const LrSchedule&) const = default;
};

// initial * decay^floor(epoch / period).
inline double lr_schedule(int epoch, const LrSchedule& schedule = {}) {
  if (epoch < 0) throw UsageError("epoch must be non-negative");
  return schedule.initial * std::pow(schedule.decay, epoch / schedule.period);
}

}  // namespace derev::nn
