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

// Transformer building blocks assembled from the autodiff core. Every
// parameter is registered with a stable name and a kind; initialization,
// the optimizer, and checkpointing all walk the same registry in the same
// order, which is what makes runs reproducible.

#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "fsc/tensor.hpp"

namespace fsc {

enum class ParamKind {
  Weight,     // dense projection matrices: seeded uniform init
  Bias,       // zero init
  Gain,       // layer-norm scale: ones init
  PosEmbed,   // positional table: zero init
  Embedding,  // token table: seeded uniform init
  LogTemp,    // learnable log(1/tau): excluded from weight decay
};

template <typename S>
struct ParamRef {
  std::string name;
  Tensor<S> tensor;  // aliasing handle; mutations hit the registered storage
  ParamKind kind;
};

template <typename S>
using ParamVisitor = std::vector<ParamRef<S>>&;

template <typename S>
class LayerNorm {
 public:
  LayerNorm() = default;
  explicit LayerNorm(std::size_t d)
      : gain_(Tensor<S>::param({d}, std::vector<S>(d, S(1)))),
        bias_(Tensor<S>::param({d}, std::vector<S>(d, S(0)))) {}

  // x: [N, d] -> [N, d], normalized per row.
  Tensor<S> forward(const Tensor<S>& x) const {
    std::size_t n = x.extent(0), d = x.extent(1);
    auto mu = mean(x, 1);                                        // [N]
    auto centered = sub(x, broadcast(mu, {n, d}, 1));            // [N, d]
    auto var = mean(mul(centered, centered), 1);                 // [N]
    auto denom = pow_const(add_const(var, 1e-5), 0.5);           // [N]
    auto normed = div(centered, broadcast(denom, {n, d}, 1));    // [N, d]
    return add(mul(normed, broadcast(gain_, {n, d}, 0)), broadcast(bias_, {n, d}, 0));
  }

  void collect(const std::string& prefix, std::vector<ParamRef<S>>& out) {
    out.push_back({prefix + ".gain", gain_, ParamKind::Gain});
    out.push_back({prefix + ".bias", bias_, ParamKind::Bias});
  }

 private:
  Tensor<S> gain_, bias_;
};

template <typename S>
class Linear {
 public:
  Linear() = default;
  Linear(std::size_t in, std::size_t out)
      : w_(Tensor<S>::param({in, out}, std::vector<S>(in * out, S(0)))),
        b_(Tensor<S>::param({out}, std::vector<S>(out, S(0)))) {}

  Tensor<S> forward(const Tensor<S>& x) const {
    std::size_t n = x.extent(0);
    return add(matmul(x, w_), broadcast(b_, {n, b_.size()}, 0));
  }

  void collect(const std::string& prefix, std::vector<ParamRef<S>>& out) {
    out.push_back({prefix + ".w", w_, ParamKind::Weight});
    out.push_back({prefix + ".b", b_, ParamKind::Bias});
  }

 private:
  Tensor<S> w_, b_;
};

template <typename S>
class MultiHeadAttention {
 public:
  MultiHeadAttention() = default;
  MultiHeadAttention(std::size_t d, std::size_t heads)
      : d_(d), heads_(heads), q_(d, d), k_(d, d), v_(d, d), o_(d, d) {}

  // x: [N, d]; key_bias: optional [N, N] additive logit bias (0 for open
  // positions, a large negative number to exclude padded keys).
  Tensor<S> forward(const Tensor<S>& x, const Tensor<S>* key_bias = nullptr) const {
    std::size_t n = x.extent(0);
    std::size_t dh = d_ / heads_;
    auto q = q_.forward(x);
    auto k = k_.forward(x);
    auto v = v_.forward(x);
    std::vector<Tensor<S>> heads_out;
    heads_out.reserve(heads_);
    double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
    for (std::size_t h = 0; h < heads_; ++h) {
      auto qh = slice(q, 1, h * dh, dh);
      auto kh = slice(k, 1, h * dh, dh);
      auto vh = slice(v, 1, h * dh, dh);
      auto scores = scale(matmul(qh, transpose(kh)), inv_sqrt);  // [N, N]
      if (key_bias != nullptr) scores = add(scores, *key_bias);
      auto attn = softmax(scores);
      heads_out.push_back(matmul(attn, vh));  // [N, dh]
    }
    (void)n;
    return o_.forward(concat(heads_out, 1));
  }

  void collect(const std::string& prefix, std::vector<ParamRef<S>>& out) {
    q_.collect(prefix + ".q", out);
    k_.collect(prefix + ".k", out);
    v_.collect(prefix + ".v", out);
    o_.collect(prefix + ".o", out);
  }

 private:
  std::size_t d_ = 0, heads_ = 0;
  Linear<S> q_, k_, v_, o_;
};

// Pre-norm transformer block: x += attn(ln1(x)); x += mlp(ln2(x)).
template <typename S>
class Block {
 public:
  Block() = default;
  Block(std::size_t d, std::size_t heads)
      : ln1_(d), attn_(d, heads), ln2_(d), fc1_(d, 4 * d), fc2_(4 * d, d) {}

  Tensor<S> forward(const Tensor<S>& x, const Tensor<S>* key_bias = nullptr) const {
    auto h = add(x, attn_.forward(ln1_.forward(x), key_bias));
    return add(h, fc2_.forward(gelu(fc1_.forward(ln2_.forward(h)))));
  }

  void collect(const std::string& prefix, std::vector<ParamRef<S>>& out) {
    ln1_.collect(prefix + ".ln1", out);
    attn_.collect(prefix + ".attn", out);
    ln2_.collect(prefix + ".ln2", out);
    fc1_.collect(prefix + ".fc1", out);
    fc2_.collect(prefix + ".fc2", out);
  }

 private:
  LayerNorm<S> ln1_;
  MultiHeadAttention<S> attn_;
  LayerNorm<S> ln2_;
  Linear<S> fc1_, fc2_;
};

}  // namespace fsc
