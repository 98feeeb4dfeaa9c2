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

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fsc/encoder.hpp"
#include "fsc/tensor.hpp"

namespace fsc {

struct CheckpointMeta {
  std::uint64_t step = 0;
  std::uint64_t seed = 0;
  double temperature = 0.0;  // tau implied by log_inv_tau at save time
  std::uint64_t config_digest = 0;
  std::optional<double> alpha;  // set by weight interpolation
};

struct TensorEntry {
  std::string name;
  Shape shape;
  std::vector<float> data;
};

// Immutable-ish snapshot of named f32 tensors plus run metadata.
//
// File layout (all integers little-endian): magic "FSCK", version u32,
// tensor count u32; per tensor: name length u16 + UTF-8 name, rank u8,
// dims u64 each, f32 payload; then metadata as u32 length + UTF-8 JSON.
class Checkpoint {
 public:
  CheckpointMeta meta;

  void add(std::string name, Shape shape, std::vector<float> data);
  bool has(const std::string& name) const;
  const TensorEntry& at(const std::string& name) const;  // StructureMismatch
  const std::vector<TensorEntry>& tensors() const { return tensors_; }

  // Snapshot of the model's registered parameters in registry order;
  // meta.temperature is derived from log_inv_tau.
  static Checkpoint from_model(const DualEncoder<float>& model,
                               CheckpointMeta meta);

  // Writes every parameter back. Missing names, extra tensors, or shape
  // drift raise StructureMismatch.
  void load_into(DualEncoder<float>& model) const;

  void save(const std::string& path) const;          // IoError
  static Checkpoint load(const std::string& path);   // CorruptFile, IoError
  static Checkpoint from_bytes(const std::string& bytes);
  std::string to_bytes() const;

  // FNV-1a of the serialized image; equal checkpoints hash equal.
  std::uint64_t digest() const;

  // Guards a load against a drifted run configuration: ConfigError when the
  // stored config digest differs from `expected`.
  void verify_config(std::uint64_t expected) const;

 private:
  std::vector<TensorEntry> tensors_;
  std::map<std::string, std::size_t> index_;
};

// theta = (1 - alpha) * pre + alpha * ft per tensor; metadata records alpha
// and inherits step/seed from ft. Name or shape disagreement raises
// StructureMismatch.
Checkpoint wise_ft_interpolate(const Checkpoint& pre, const Checkpoint& ft,
                               double alpha);

}  // namespace fsc
