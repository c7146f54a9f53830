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

// Versioned little-endian container for a trained model and its optimizer
// state.
//
//   magic     8 bytes  "DEREVCK\0"
//   version   u32      1
//   head      u32      0 ifilt, 1 dsm, 2 dirm
//   epoch     i32      last completed epoch, -1 before training
//   best_ep   i32
//   best_val  f64
//   seed      u64
//   train     i32 epochs, batch_size; i64 context, taps, early_len;
//             f64 lr initial, decay; i32 lr period, checkpoint_every;
//             u32 n, then n x i64 channel plan
//   stft      i64 window_len, hop, fft_len
//   spec      u32 layer count, per layer: u32 kind, i64 in, out, kernel_k,
//             kernel_l, stride_k, stride_l, u8 batchnorm, u32 activation;
//             u32 skip count, per skip: i32 encoder, decoder
//   params    per layer: weight, bias, bn_scale, bn_shift, running_mean,
//             running_var as (u64 rows, u64 cols, f32 data column-major)
//   adam      i64 step, then first and second moments laid out like params
//   checksum  u64 FNV-1a over every preceding byte

#pragma once

#include <filesystem>

#include "derev/train.hpp"

namespace derev {

constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);

Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace derev
