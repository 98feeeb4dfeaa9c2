// Copyright 2026 The fsclab Authors
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

#include "fsc/checkpoint.hpp"

#include <bit>
#include <cmath>
#include <cstring>

#include "json.hpp"

#include "fsc/errors.hpp"
#include "fsc/util.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint serialization assumes a little-endian host");

namespace fsc {

using nlohmann::json;

namespace {

constexpr char kMagic[4] = {'F', 'S', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint8_t kMaxRank = 8;

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

// Cursor over an in-memory file image; every read is bounds-checked so a
// truncated or lying file surfaces as CorruptFile instead of UB.
struct Reader {
  const std::string& bytes;
  std::size_t pos = 0;

  void need(std::size_t n) const {
    if (pos + n > bytes.size())
      fail(ErrorCode::CorruptFile, "checkpoint truncated at byte " +
                                       std::to_string(pos));
  }
  template <typename T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, bytes.data() + pos, sizeof(T));
    pos += sizeof(T);
    return v;
  }
  std::string get_str(std::size_t n) {
    need(n);
    std::string s = bytes.substr(pos, n);
    pos += n;
    return s;
  }
};

}  // namespace

void Checkpoint::add(std::string name, Shape shape, std::vector<float> data) {
  if (name.empty() || name.size() > 0xFFFF)
    fail(ErrorCode::ConfigError, "bad tensor name length");
  if (shape.size() > kMaxRank)
    fail(ErrorCode::ConfigError, "tensor rank too large");
  if (data.size() != shape_numel(shape))
    fail(ErrorCode::ShapeMismatch, "tensor '" + name + "' data size " +
                                       std::to_string(data.size()) +
                                       " does not fill " + shape_str(shape));
  if (index_.count(name))
    fail(ErrorCode::ConfigError, "duplicate tensor name '" + name + "'");
  index_.emplace(name, tensors_.size());
  tensors_.push_back({std::move(name), std::move(shape), std::move(data)});
}

bool Checkpoint::has(const std::string& name) const {
  return index_.count(name) != 0;
}

const TensorEntry& Checkpoint::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end())
    fail(ErrorCode::StructureMismatch, "no tensor named '" + name + "'");
  return tensors_[it->second];
}

Checkpoint Checkpoint::from_model(const DualEncoder<float>& model,
                                  CheckpointMeta meta) {
  Checkpoint ck;
  for (const auto& p : model.params())
    ck.add(p.name, p.tensor.shape(), p.tensor.value());
  meta.temperature = 1.0 / std::exp(static_cast<double>(ck.at("log_inv_tau").data[0]));
  ck.meta = meta;
  return ck;
}

void Checkpoint::load_into(DualEncoder<float>& model) const {
  auto& params = model.params();
  if (params.size() != tensors_.size())
    fail(ErrorCode::StructureMismatch,
         "checkpoint holds " + std::to_string(tensors_.size()) +
             " tensors, model expects " + std::to_string(params.size()));
  for (auto& p : params) {
    const auto& entry = at(p.name);
    if (entry.shape != p.tensor.shape())
      fail(ErrorCode::StructureMismatch,
           "tensor '" + p.name + "' is " + shape_str(entry.shape) +
               " in the checkpoint but " + shape_str(p.tensor.shape()) +
               " in the model");
    p.tensor.mutable_value() = entry.data;
  }
}

std::string Checkpoint::to_bytes() const {
  std::string out;
  out.append(kMagic, 4);
  put<std::uint32_t>(out, kVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(tensors_.size()));
  for (const auto& t : tensors_) {
    put<std::uint16_t>(out, static_cast<std::uint16_t>(t.name.size()));
    out.append(t.name);
    put<std::uint8_t>(out, static_cast<std::uint8_t>(t.shape.size()));
    for (std::size_t d : t.shape) put<std::uint64_t>(out, d);
    const char* raw = reinterpret_cast<const char*>(t.data.data());
    out.append(raw, t.data.size() * sizeof(float));
  }
  json j{{"step", meta.step},
         {"seed", meta.seed},
         {"temperature", meta.temperature},
         {"config_digest", meta.config_digest}};
  if (meta.alpha) j["alpha"] = *meta.alpha;
  const std::string js = j.dump();
  put<std::uint32_t>(out, static_cast<std::uint32_t>(js.size()));
  out.append(js);
  return out;
}

Checkpoint Checkpoint::from_bytes(const std::string& bytes) {
  Reader r{bytes};
  if (r.get_str(4) != std::string(kMagic, 4))
    fail(ErrorCode::CorruptFile, "bad checkpoint magic");
  const auto version = r.get<std::uint32_t>();
  if (version != kVersion)
    fail(ErrorCode::CorruptFile,
         "unsupported checkpoint version " + std::to_string(version));
  const auto count = r.get<std::uint32_t>();
  Checkpoint ck;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = r.get<std::uint16_t>();
    std::string name = r.get_str(name_len);
    const auto rank = r.get<std::uint8_t>();
    if (rank > kMaxRank) fail(ErrorCode::CorruptFile, "absurd tensor rank");
    Shape shape(rank);
    std::size_t numel = 1;
    for (auto& d : shape) {
      d = static_cast<std::size_t>(r.get<std::uint64_t>());
      if (d == 0 || numel > (1ULL << 32) / std::max<std::size_t>(d, 1))
        fail(ErrorCode::CorruptFile, "absurd tensor dims");
      numel *= d;
    }
    std::vector<float> data(numel);
    r.need(numel * sizeof(float));
    std::memcpy(data.data(), bytes.data() + r.pos, numel * sizeof(float));
    r.pos += numel * sizeof(float);
    try {
      ck.add(std::move(name), std::move(shape), std::move(data));
    } catch (const Error& e) {
      fail(ErrorCode::CorruptFile, e.what());
    }
  }
  const auto meta_len = r.get<std::uint32_t>();
  const std::string js = r.get_str(meta_len);
  if (r.pos != bytes.size())
    fail(ErrorCode::CorruptFile, "trailing bytes after metadata");
  try {
    json j = json::parse(js);
    ck.meta.step = j.at("step").get<std::uint64_t>();
    ck.meta.seed = j.at("seed").get<std::uint64_t>();
    ck.meta.temperature = j.at("temperature").get<double>();
    ck.meta.config_digest = j.at("config_digest").get<std::uint64_t>();
    if (j.contains("alpha")) ck.meta.alpha = j.at("alpha").get<double>();
  } catch (const json::exception& e) {
    fail(ErrorCode::CorruptFile, std::string("bad metadata: ") + e.what());
  }
  return ck;
}

void Checkpoint::save(const std::string& path) const {
  atomic_write_file(path, to_bytes());
}

Checkpoint Checkpoint::load(const std::string& path) {
  return from_bytes(read_file(path));
}

std::uint64_t Checkpoint::digest() const {
  return fnv1a64(to_bytes());
}

void Checkpoint::verify_config(std::uint64_t expected) const {
  if (meta.config_digest != expected)
    fail(ErrorCode::ConfigError,
         "checkpoint was produced under a different configuration (digest " +
             std::to_string(meta.config_digest) + ", expected " + std::to_string(expected) +
             ")");
}

Checkpoint wise_ft_interpolate(const Checkpoint& pre, const Checkpoint& ft,
                               double alpha) {
  if (pre.tensors().size() != ft.tensors().size())
    fail(ErrorCode::StructureMismatch, "checkpoint tensor counts differ");
  Checkpoint out;
  for (const auto& tp : pre.tensors()) {
    const auto& tf = ft.at(tp.name);
    if (tf.shape != tp.shape)
      fail(ErrorCode::StructureMismatch,
           "tensor '" + tp.name + "' shapes differ: " + shape_str(tp.shape) +
               " vs " + shape_str(tf.shape));
    std::vector<float> mix(tp.data.size());
    // Endpoints copy bits through so alpha 0/1 reproduce the inputs exactly.
    if (alpha == 0.0) {
      mix = tp.data;
    } else if (alpha == 1.0) {
      mix = tf.data;
    } else {
      for (std::size_t i = 0; i < mix.size(); ++i)
        mix[i] = static_cast<float>((1.0 - alpha) * tp.data[i] +
                                    alpha * tf.data[i]);
    }
    out.add(tp.name, tp.shape, std::move(mix));
  }
  out.meta.step = ft.meta.step;
  out.meta.seed = ft.meta.seed;
  if (out.has("log_inv_tau"))
    out.meta.temperature =
        1.0 / std::exp(static_cast<double>(out.at("log_inv_tau").data[0]));
  out.meta.config_digest =
      pre.meta.config_digest == ft.meta.config_digest ? pre.meta.config_digest : 0;
  out.meta.alpha = alpha;
  return out;
}

}  // namespace fsc
