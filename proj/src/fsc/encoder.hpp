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

// Tiny dual encoders over a shared embedding width. The image side eats
// precomputed patch features on a GxG grid; the text side eats token ids
// with BOS/EOS framing. Both return row-normalized sequence embeddings plus
// a unit-norm pooled global vector (mean pooling for patches, EOS-position
// pooling for tokens).

#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "fsc/nn.hpp"
#include "fsc/rng.hpp"
#include "fsc/tensor.hpp"

namespace fsc {

struct EncoderConfig {
  std::size_t d = 32;          // shared embedding width
  std::size_t layers = 2;      // transformer blocks per tower
  std::size_t heads = 4;       // attention heads
  std::size_t d_in = 9;        // raw patch feature width
  std::size_t vocab_size = 0;  // set from the lexicon
  std::size_t w_max = 16;      // token positions incl. BOS/EOS
  std::size_t grid = 4;        // G; patches P = G*G

  std::size_t patches() const { return grid * grid; }

  void validate() const {
    if (d == 0 || heads == 0 || d % heads != 0)
      fail(ErrorCode::ConfigError, "embed width must be a positive multiple of heads");
    if (layers == 0 || w_max < 3 || grid == 0 || d_in == 0 || vocab_size < 4)
      fail(ErrorCode::ConfigError, "degenerate encoder configuration");
  }
};

struct TextInput {
  std::vector<std::uint32_t> token_ids;  // length <= w_max, BOS first, one EOS
  std::vector<bool> pad_mask;            // true = real token (incl. BOS/EOS)
};

template <typename S>
struct EncodedText {
  Tensor<S> T;                 // [W, d], rows unit-normalized
  Tensor<S> t;                 // [d], unit norm (EOS row)
  std::vector<bool> pad_mask;  // copied from input
  std::size_t eos_pos = 0;
};

template <typename S>
struct EncodedImage {
  Tensor<S> V;  // [P, d], rows unit-normalized
  Tensor<S> v;  // [d], unit norm (normalized mean of rows)
};

template <typename S>
class TextEncoder {
 public:
  TextEncoder() = default;
  explicit TextEncoder(const EncoderConfig& cfg)
      : cfg_(cfg),
        tok_emb_(Tensor<S>::param({cfg.vocab_size, cfg.d}, std::vector<S>(cfg.vocab_size * cfg.d, S(0)))),
        pos_emb_(Tensor<S>::param({cfg.w_max, cfg.d}, std::vector<S>(cfg.w_max * cfg.d, S(0)))),
        final_ln_(cfg.d) {
    blocks_.reserve(cfg.layers);
    for (std::size_t i = 0; i < cfg.layers; ++i) blocks_.emplace_back(cfg.d, cfg.heads);
  }

  EncodedText<S> encode(const TextInput& txt, std::uint32_t eos_id) const {
    const std::size_t w = txt.token_ids.size();
    if (w == 0 || w > cfg_.w_max)
      fail(ErrorCode::ShapeMismatch, "token sequence length " + std::to_string(w) +
                                         " outside [1, " + std::to_string(cfg_.w_max) + "]");
    if (txt.pad_mask.size() != w)
      fail(ErrorCode::ShapeMismatch, "pad mask length differs from token count");
    std::size_t eos_pos = w;  // sentinel
    for (std::size_t i = 0; i < w; ++i) {
      if (txt.token_ids[i] == eos_id && txt.pad_mask[i]) {
        if (eos_pos != w) fail(ErrorCode::MissingEOS, "more than one EOS token");
        eos_pos = i;
      }
    }
    if (eos_pos == w) fail(ErrorCode::MissingEOS, "no EOS token in sequence");

    auto x = add(embed_rows(tok_emb_, txt.token_ids), slice(pos_emb_, 0, 0, w));

    // Additive attention bias: padded keys are unreachable from any query.
    Tensor<S> key_bias;
    const Tensor<S>* bias_ptr = nullptr;
    bool any_pad = false;
    for (bool m : txt.pad_mask) any_pad = any_pad || !m;
    if (any_pad) {
      std::vector<S> bias(w * w, S(0));
      for (std::size_t j = 0; j < w; ++j)
        if (!txt.pad_mask[j])
          for (std::size_t i = 0; i < w; ++i) bias[i * w + j] = S(-1e9);
      key_bias = Tensor<S>::from({w, w}, std::move(bias));
      bias_ptr = &key_bias;
    }

    for (const auto& b : blocks_) x = b.forward(x, bias_ptr);
    auto T = l2_normalize(final_ln_.forward(x));
    EncodedText<S> out;
    out.T = T;
    out.t = row(T, eos_pos);
    out.pad_mask = txt.pad_mask;
    out.eos_pos = eos_pos;
    return out;
  }

  void collect(std::vector<ParamRef<S>>& out) {
    out.push_back({"text.tok_emb", tok_emb_, ParamKind::Embedding});
    out.push_back({"text.pos_emb", pos_emb_, ParamKind::PosEmbed});
    for (std::size_t i = 0; i < blocks_.size(); ++i)
      blocks_[i].collect("text.block" + std::to_string(i), out);
    final_ln_.collect("text.ln_final", out);
  }

 private:
  EncoderConfig cfg_;
  Tensor<S> tok_emb_, pos_emb_;
  std::vector<Block<S>> blocks_;
  LayerNorm<S> final_ln_;
};

template <typename S>
class ImageEncoder {
 public:
  ImageEncoder() = default;
  explicit ImageEncoder(const EncoderConfig& cfg)
      : cfg_(cfg),
        proj_(cfg.d_in, cfg.d),
        pos_emb_(Tensor<S>::param({cfg.patches(), cfg.d}, std::vector<S>(cfg.patches() * cfg.d, S(0)))),
        final_ln_(cfg.d) {
    blocks_.reserve(cfg.layers);
    for (std::size_t i = 0; i < cfg.layers; ++i) blocks_.emplace_back(cfg.d, cfg.heads);
  }

  EncodedImage<S> encode(const Tensor<S>& patch_features) const {
    if (patch_features.rank() != 2 || patch_features.extent(0) != cfg_.patches() ||
        patch_features.extent(1) != cfg_.d_in)
      fail(ErrorCode::ShapeMismatch, "patch features must be [P, d_in] = [" +
                                         std::to_string(cfg_.patches()) + ", " +
                                         std::to_string(cfg_.d_in) + "], got " +
                                         shape_str(patch_features.shape()));
    auto x = add(proj_.forward(patch_features), pos_emb_);
    for (const auto& b : blocks_) x = b.forward(x);
    auto V = l2_normalize(final_ln_.forward(x));
    EncodedImage<S> out;
    out.V = V;
    out.v = l2_normalize(mean(V, 0));
    return out;
  }

  void collect(std::vector<ParamRef<S>>& out) {
    proj_.collect("image.proj", out);
    out.push_back({"image.pos_emb", pos_emb_, ParamKind::PosEmbed});
    for (std::size_t i = 0; i < blocks_.size(); ++i)
      blocks_[i].collect("image.block" + std::to_string(i), out);
    final_ln_.collect("image.ln_final", out);
  }

 private:
  EncoderConfig cfg_;
  Linear<S> proj_;
  Tensor<S> pos_emb_;
  std::vector<Block<S>> blocks_;
  LayerNorm<S> final_ln_;
};

// Both towers plus the shared learnable temperature, with the parameter
// registry that fixes iteration order for init/optimizer/serialization.
template <typename S>
class DualEncoder {
 public:
  DualEncoder() = default;
  explicit DualEncoder(const EncoderConfig& cfg, double temperature_init = 0.07)
      : cfg_(validated(cfg)),
        text_(cfg_),
        image_(cfg_),
        log_inv_tau_(Tensor<S>::param({1}, {static_cast<S>(std::log(1.0 / temperature_init))})) {
    text_.collect(params_);
    image_.collect(params_);
    params_.push_back({"log_inv_tau", log_inv_tau_, ParamKind::LogTemp});
  }

  // Tensors are shared handles, so a copied encoder would silently alias
  // the original's parameters; moves keep the registry valid.
  DualEncoder(const DualEncoder&) = delete;
  DualEncoder& operator=(const DualEncoder&) = delete;
  DualEncoder(DualEncoder&&) = default;
  DualEncoder& operator=(DualEncoder&&) = default;

  // Seeded init: weights/embeddings uniform(-0.02, 0.02) drawn in registry
  // order; positional tables and biases zero; layer-norm gains one. The
  // temperature keeps its constructor value.
  void init_params(std::uint64_t seed) {
    Rng rng(hash64({seed, 0x1417}));
    for (auto& p : params_) {
      switch (p.kind) {
        case ParamKind::Weight:
        case ParamKind::Embedding: {
          auto& v = p.tensor.mutable_value();
          for (auto& x : v) x = static_cast<S>(rng.uniform(-0.02, 0.02));
          break;
        }
        case ParamKind::Bias:
        case ParamKind::PosEmbed:
        case ParamKind::Gain:
        case ParamKind::LogTemp:
          break;  // constructor defaults already correct
      }
    }
  }

  const EncoderConfig& config() const { return cfg_; }
  std::vector<ParamRef<S>>& params() { return params_; }
  const std::vector<ParamRef<S>>& params() const { return params_; }

  EncodedText<S> encode_text(const TextInput& txt, std::uint32_t eos_id) const {
    return text_.encode(txt, eos_id);
  }
  EncodedImage<S> encode_image(const Tensor<S>& patch_features) const {
    return image_.encode(patch_features);
  }

  Tensor<S> log_inv_tau() const { return log_inv_tau_; }

  // Scale clamp applied outside the graph after each optimizer step:
  // effective 1/tau is kept in [1, 100].
  void clamp_temperature() {
    S lo = static_cast<S>(0.0);               // log(1)
    S hi = static_cast<S>(std::log(100.0));   // log(100)
    S& v = log_inv_tau_.mutable_value()[0];
    if (v < lo) v = lo;
    if (v > hi) v = hi;
  }

  void zero_grad() {
    for (auto& p : params_) p.tensor.zero_grad();
  }

 private:
  static EncoderConfig validated(EncoderConfig c) {
    c.validate();
    return c;
  }

  EncoderConfig cfg_;
  TextEncoder<S> text_;
  ImageEncoder<S> image_;
  Tensor<S> log_inv_tau_;
  std::vector<ParamRef<S>> params_;
};

}  // namespace fsc
