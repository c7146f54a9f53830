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

#include "derev/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "derev/digest.hpp"

namespace derev {
namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

constexpr char kMagic[8] = {'D', 'E', 'R', 'E', 'V', 'C', 'K', '\0'};

class Writer {
 public:
  template <typename T>
  void put(T v) {
    const auto* p = reinterpret_cast<const char*>(&v);
    bytes_.insert(bytes_.end(), p, p + sizeof(T));
  }
  void put_matrix(const nn::Matrix<float>& m) {
    put<std::uint64_t>(static_cast<std::uint64_t>(m.rows()));
    put<std::uint64_t>(static_cast<std::uint64_t>(m.cols()));
    if (m.size() == 0) return;
    const auto* p = reinterpret_cast<const char*>(m.data());
    bytes_.insert(bytes_.end(), p, p + m.size() * static_cast<Index>(sizeof(float)));
  }
  void put_matrix(const nn::Vector<float>& v) { put_matrix(nn::Matrix<float>(v)); }
  std::vector<char>& bytes() { return bytes_; }

 private:
  std::vector<char> bytes_;
};

class Reader {
 public:
  Reader(const std::vector<char>& bytes, std::size_t end, const std::filesystem::path& path)
      : bytes_(bytes), end_(end), path_(path) {}
  template <typename T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  nn::Matrix<float> get_matrix() {
    const auto rows = get<std::uint64_t>(), cols = get<std::uint64_t>();
    if (rows > (1u << 28) || cols > (1u << 28) || rows * cols > (1u << 28)) corrupt("implausible tensor shape");
    nn::Matrix<float> m(static_cast<Index>(rows), static_cast<Index>(cols));
    const std::size_t n = rows * cols * sizeof(float);
    need(n);
    if (n > 0) std::memcpy(m.data(), bytes_.data() + pos_, n);
    pos_ += n;
    return m;
  }
  void get_into(nn::Matrix<float>& dst) {
    nn::Matrix<float> m = get_matrix();
    if (m.rows() != dst.rows() || m.cols() != dst.cols()) corrupt("tensor shape does not match the network layout");
    dst = std::move(m);
  }
  void get_into(nn::Vector<float>& dst) {
    nn::Matrix<float> m = get_matrix();
    if (m.size() != dst.size() || m.cols() != 1) corrupt("vector shape does not match the network layout");
    dst = m.col(0);
  }
  bool done() const { return pos_ == end_; }
  [[noreturn]] void corrupt(const std::string& what) const {
    throw DataError("corrupt checkpoint " + path_.string() + ": " + what);
  }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > end_) corrupt("truncated");
  }
  const std::vector<char>& bytes_;
  std::size_t end_;
  std::size_t pos_ = 0;
  const std::filesystem::path& path_;
};

void put_layers(Writer& w, const std::vector<nn::LayerParams<float>>& layers) {
  for (const auto& l : layers) {
    w.put_matrix(l.weight);
    w.put_matrix(l.bias);
    w.put_matrix(l.bn_scale);
    w.put_matrix(l.bn_shift);
    w.put_matrix(l.running_mean);
    w.put_matrix(l.running_var);
  }
}

void get_layers(Reader& r, std::vector<nn::LayerParams<float>>& layers) {
  for (auto& l : layers) {
    r.get_into(l.weight);
    r.get_into(l.bias);
    r.get_into(l.bn_scale);
    r.get_into(l.bn_shift);
    r.get_into(l.running_mean);
    r.get_into(l.running_var);
  }
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  Writer w;
  for (char c : kMagic) w.put(c);
  w.put<std::uint32_t>(kCheckpointVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(ck.model.head));
  w.put<std::int32_t>(ck.epoch);
  w.put<std::int32_t>(ck.best_epoch);
  w.put<double>(ck.best_validation);
  const TrainConfig& c = ck.model.config;
  w.put<std::uint64_t>(c.seed);
  w.put<std::int32_t>(c.epochs);
  w.put<std::int32_t>(c.batch_size);
  w.put<std::int64_t>(c.context);
  w.put<std::int64_t>(c.taps);
  w.put<std::int64_t>(c.early_len);
  w.put<double>(c.lr.initial);
  w.put<double>(c.lr.decay);
  w.put<std::int32_t>(c.lr.period);
  w.put<std::int32_t>(c.checkpoint_every);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(c.channels.size()));
  for (Index ch : c.channels) w.put<std::int64_t>(ch);
  w.put<std::int64_t>(ck.model.stft.window_len);
  w.put<std::int64_t>(ck.model.stft.hop);
  w.put<std::int64_t>(ck.model.stft.fft_len);

  const nn::UNetSpec& spec = ck.model.params.spec;
  w.put<std::uint32_t>(static_cast<std::uint32_t>(spec.layers.size()));
  for (const auto& l : spec.layers) {
    w.put<std::uint32_t>(static_cast<std::uint32_t>(l.kind));
    for (Index v : {l.in_channels, l.out_channels, l.kernel_k, l.kernel_l, l.stride_k, l.stride_l}) {
      w.put<std::int64_t>(v);
    }
    w.put<std::uint8_t>(l.batchnorm ? 1 : 0);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(l.activation));
  }
  w.put<std::uint32_t>(static_cast<std::uint32_t>(spec.skips.size()));
  for (const auto& s : spec.skips) {
    w.put<std::int32_t>(s.encoder);
    w.put<std::int32_t>(s.decoder);
  }
  put_layers(w, ck.model.params.layers);
  w.put<std::int64_t>(ck.adam.step);
  const bool has_moments = !ck.adam.first_moment.empty();
  w.put<std::uint8_t>(has_moments ? 1 : 0);
  if (has_moments) {
    put_layers(w, ck.adam.first_moment);
    put_layers(w, ck.adam.second_moment);
  }
  Fnv1a h;
  h.update(w.bytes().data(), w.bytes().size());
  w.put<std::uint64_t>(h.value());

  std::filesystem::create_directories(path.parent_path().empty() ? "." : path.parent_path());
  // Write then rename so a crash never leaves a half-written checkpoint.
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out.write(w.bytes().data(), static_cast<std::streamsize>(w.bytes().size()));
    if (!out) throw DataError("cannot write checkpoint " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  const std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < sizeof(kMagic) + 12 || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw DataError("corrupt checkpoint " + path.string() + ": bad magic");
  }
  const std::size_t body = bytes.size() - sizeof(std::uint64_t);
  Fnv1a h;
  h.update(bytes.data(), body);
  std::uint64_t stored;
  std::memcpy(&stored, bytes.data() + body, sizeof(stored));
  if (stored != h.value()) throw DataError("corrupt checkpoint " + path.string() + ": checksum mismatch");

  Reader r(bytes, body, path);
  for (std::size_t i = 0; i < sizeof(kMagic); ++i) r.get<char>();
  if (const auto version = r.get<std::uint32_t>(); version != kCheckpointVersion) {
    r.corrupt("unsupported version " + std::to_string(version));
  }
  Checkpoint ck;
  const auto head = r.get<std::uint32_t>();
  if (head > 2) r.corrupt("unknown head");
  ck.model.head = static_cast<Head>(head);
  ck.epoch = r.get<std::int32_t>();
  ck.best_epoch = r.get<std::int32_t>();
  ck.best_validation = r.get<double>();
  TrainConfig& c = ck.model.config;
  c.seed = r.get<std::uint64_t>();
  c.epochs = r.get<std::int32_t>();
  c.batch_size = r.get<std::int32_t>();
  c.context = r.get<std::int64_t>();
  c.taps = r.get<std::int64_t>();
  c.early_len = r.get<std::int64_t>();
  c.lr.initial = r.get<double>();
  c.lr.decay = r.get<double>();
  c.lr.period = r.get<std::int32_t>();
  c.checkpoint_every = r.get<std::int32_t>();
  const auto plan = r.get<std::uint32_t>();
  if (plan > 64) r.corrupt("implausible channel plan");
  for (std::uint32_t i = 0; i < plan; ++i) c.channels.push_back(r.get<std::int64_t>());
  ck.model.stft.window_len = r.get<std::int64_t>();
  ck.model.stft.hop = r.get<std::int64_t>();
  ck.model.stft.fft_len = r.get<std::int64_t>();

  nn::UNetSpec spec;
  const auto layers = r.get<std::uint32_t>();
  if (layers == 0 || layers > 256) r.corrupt("implausible layer count");
  for (std::uint32_t i = 0; i < layers; ++i) {
    nn::LayerSpec l;
    const auto kind = r.get<std::uint32_t>();
    if (kind > 1) r.corrupt("unknown layer kind");
    l.kind = static_cast<nn::LayerKind>(kind);
    l.in_channels = r.get<std::int64_t>();
    l.out_channels = r.get<std::int64_t>();
    l.kernel_k = r.get<std::int64_t>();
    l.kernel_l = r.get<std::int64_t>();
    l.stride_k = r.get<std::int64_t>();
    l.stride_l = r.get<std::int64_t>();
    l.batchnorm = r.get<std::uint8_t>() != 0;
    const auto act = r.get<std::uint32_t>();
    if (act > 1) r.corrupt("unknown activation");
    l.activation = static_cast<nn::Activation>(act);
    spec.layers.push_back(l);
  }
  const auto skips = r.get<std::uint32_t>();
  if (skips > 256) r.corrupt("implausible skip count");
  for (std::uint32_t i = 0; i < skips; ++i) {
    const int e = r.get<std::int32_t>();
    const int d = r.get<std::int32_t>();
    spec.skips.push_back({e, d});
  }
  try {
    validate(c);
    validate(ck.model.stft);
    ck.model.params = nn::ModelParams<float>::zeros(spec);
  } catch (const ConfigError& e) {
    r.corrupt(e.what());
  }
  get_layers(r, ck.model.params.layers);
  ck.model.params.mode = nn::Mode::kEval;
  ck.adam = nn::AdamState<float>::zeros(spec);
  ck.adam.step = r.get<std::int64_t>();
  if (r.get<std::uint8_t>() != 0) {
    get_layers(r, ck.adam.first_moment);
    get_layers(r, ck.adam.second_moment);
  }
  if (!r.done()) r.corrupt("trailing bytes");
  return ck;
}

}  // namespace derev
