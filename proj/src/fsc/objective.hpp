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

// The training objective: batch contrastive loss, global and local
// hard-negative candidate distributions, focal weighting with label
// smoothing, and the weighted total. Hard-negative candidates compete only
// within their own item; they never enter the batch contrastive
// denominators. All probability computations run through log-space
// softmax so large inverse temperatures stay finite in float.

#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "fsc/encoder.hpp"
#include "fsc/tensor.hpp"

namespace fsc {

enum class NormMode { MinMax, MinMaxSparse, Softmax };

inline const char* norm_mode_name(NormMode m) {
  switch (m) {
    case NormMode::MinMax: return "minmax";
    case NormMode::MinMaxSparse: return "minmax_sparse";
    case NormMode::Softmax: return "softmax";
  }
  return "?";
}

inline NormMode parse_norm_mode(const std::string& s) {
  if (s == "minmax") return NormMode::MinMax;
  if (s == "minmax_sparse") return NormMode::MinMaxSparse;
  if (s == "softmax") return NormMode::Softmax;
  fail(ErrorCode::ConfigError, "unknown attention normalization mode: " + s);
}

struct LossConfig {
  double lambda_g = 0.5;
  double lambda_l = 0.2;
  double gamma = 2.0;
  double beta = 0.02;
  NormMode norm_mode = NormMode::MinMax;
  double temperature_init = 0.07;

  void validate() const {
    if (lambda_g < 0 || lambda_l < 0 || gamma < 0 || beta < 0 || beta >= 1)
      fail(ErrorCode::ConfigError, "loss weights out of range");
    if (temperature_init <= 0)
      fail(ErrorCode::ConfigError, "temperature must be positive");
  }
};

// Candidate probabilities for one (item, path). Stored compactly over the
// valid slots; slot index 0 is always the original caption.
template <typename S>
struct CandidateDist {
  Tensor<S> p;                     // [n_valid], sums to 1
  std::vector<std::size_t> slots;  // original slot of each entry; slots[0] == 0
  std::size_t total_slots = 0;     // 1 + K including invalid slots

  // Dense (1+K) view with zeros at invalid slots; forward values only.
  std::vector<S> dense() const {
    std::vector<S> out(total_slots, S(0));
    for (std::size_t i = 0; i < slots.size(); ++i) out[slots[i]] = p.at(i);
    return out;
  }
};

template <typename S>
struct LossBreakdown {
  Tensor<S> total;  // scalar on the tape
  double l_clip = 0, l_neg_g = 0, l_neg_l = 0, l_total = 0;
  double lambda_g = 0, lambda_l = 0;
};

// ---------------------------------------------------------------------------
// Similarities
// ---------------------------------------------------------------------------

// exp(cos(v, t) * inv_tau) for unit vectors. inv_tau is a scalar tensor so
// the temperature is trainable.
template <typename S>
Tensor<S> global_similarity(const Tensor<S>& v, const Tensor<S>& t, const Tensor<S>& inv_tau) {
  return exp(mul(dot(v, t), inv_tau));
}

// log(sum(exp(x))) for rank-1 x. The stabilizing max enters as a detached
// constant: the identity holds for any shift, the gradient (softmax of x)
// is unaffected, and no spurious tie-point is introduced.
template <typename S>
Tensor<S> logsumexp(const Tensor<S>& x) {
  double m = static_cast<double>(*std::max_element(x.value().begin(), x.value().end()));
  return add_const(log(sum(exp(add_const(x, -m)))), m);
}

// Normalizes a raw token-to-patch score map per row.
template <typename S>
Tensor<S> attention_weights(const Tensor<S>& s, NormMode mode) {
  switch (mode) {
    case NormMode::MinMax: return rownorm_minmax(s);
    case NormMode::MinMaxSparse: return rownorm_minmax_sparse(s);
    case NormMode::Softmax: return softmax(s);
  }
  fail(ErrorCode::ConfigError, "unknown attention normalization mode");
}

// Attention-weighted patch aggregate per token row: rows of T_tokens attend
// over rows of V, and each token's selected patch mass is renormalized by
// its own attention sum. Inputs must be row-normalized.
template <typename S>
Tensor<S> textual_aligned_patches(const Tensor<S>& V, const Tensor<S>& T_tokens, NormMode mode) {
  auto s = matmul(T_tokens, transpose(V));  // [W, P] cosine map
  auto a = attention_weights(s, mode);
  std::size_t w = a.extent(0), d = V.extent(1);
  auto mass = sum(a, 1);  // >= 1 in every mode (row max is 1, or rows sum to 1)
  return div(matmul(a, V), broadcast(mass, {w, d}, 1));
}

// Token rows of an encoded text at non-padded positions.
template <typename S>
Tensor<S> valid_token_rows(const EncodedText<S>& txt) {
  std::vector<Tensor<S>> rows;
  for (std::size_t i = 0; i < txt.pad_mask.size(); ++i)
    if (txt.pad_mask[i]) rows.push_back(row(txt.T, i));
  if (rows.empty()) fail(ErrorCode::NoValidTokens, "text has no non-padded tokens");
  return stack_rows(rows);
}

// log of the local similarity: logsumexp over non-pad tokens of
// cos(aligned patch aggregate, token) * inv_tau.
template <typename S>
Tensor<S> local_log_similarity(const Tensor<S>& V, const EncodedText<S>& txt,
                               const Tensor<S>& inv_tau, NormMode mode) {
  auto T_tokens = valid_token_rows(txt);
  auto aligned = l2_normalize(textual_aligned_patches(V, T_tokens, mode));
  auto cos = row_dot(aligned, T_tokens);  // [W_valid]
  return logsumexp(mul(cos, inv_tau));
}

// The aggregated local similarity itself (sum over tokens of exponentiated
// per-token similarity). Kept for direct inspection; the losses use the log
// form for stability.
template <typename S>
Tensor<S> local_similarity(const Tensor<S>& V, const EncodedText<S>& txt,
                           const Tensor<S>& inv_tau, NormMode mode) {
  return exp(local_log_similarity(V, txt, inv_tau, mode));
}

// Length-normalized diagnostic: S_l / W_valid, reported alongside the raw
// sum so caption-length bias is visible in logs.
template <typename S>
double local_similarity_per_token(const Tensor<S>& V, const EncodedText<S>& txt,
                                  const Tensor<S>& inv_tau, NormMode mode) {
  std::size_t w_valid = 0;
  for (bool m : txt.pad_mask) w_valid += m ? 1 : 0;
  if (w_valid == 0) fail(ErrorCode::NoValidTokens, "text has no non-padded tokens");
  return static_cast<double>(local_similarity(V, txt, inv_tau, mode).item()) /
         static_cast<double>(w_valid);
}

// ---------------------------------------------------------------------------
// Batch contrastive loss
// ---------------------------------------------------------------------------

namespace detail {

// Mean over rows of -log softmax(logits)[i, i]. Row maxima enter as
// detached constants (see logsumexp).
template <typename S>
Tensor<S> diag_nll(const Tensor<S>& logits) {
  std::size_t b = logits.extent(0);
  std::vector<S> mrow(b);
  for (std::size_t r = 0; r < b; ++r) {
    S m = logits.at(r, 0);
    for (std::size_t c = 1; c < b; ++c) m = std::max(m, logits.at(r, c));
    mrow[r] = m;
  }
  auto shifted = sub(logits, broadcast(Tensor<S>::from({b}, std::move(mrow)), {b, b}, 1));
  auto lse = log(sum(exp(shifted), 1));  // [b], sum >= 1 so log is safe
  std::vector<S> eye(b * b, S(0));
  for (std::size_t i = 0; i < b; ++i) eye[i * b + i] = S(1);
  auto diag = sum(mul(shifted, Tensor<S>::from({b, b}, std::move(eye))), 1);  // [b]
  return mean(sub(lse, diag));
}

}  // namespace detail

// Symmetric InfoNCE over the batch: only original captions participate.
// v_stack, t_stack: [B, d] unit rows body-to-body with their pairing.
template <typename S>
Tensor<S> clip_loss(const Tensor<S>& v_stack, const Tensor<S>& t_stack, const Tensor<S>& inv_tau) {
  if (v_stack.rank() != 2 || t_stack.rank() != 2 || v_stack.shape() != t_stack.shape())
    fail(ErrorCode::ShapeMismatch, "contrastive stacks must both be [B, d]");
  std::size_t b = v_stack.extent(0);
  if (b < 2) fail(ErrorCode::BatchTooSmall, "contrastive loss needs at least 2 items");
  auto logits = mul(matmul(v_stack, transpose(t_stack)), inv_tau);  // [B, B]
  auto l_i2t = detail::diag_nll(logits);
  auto l_t2i = detail::diag_nll(transpose(logits));
  return scale(add(l_i2t, l_t2i), 0.5);
}

// ---------------------------------------------------------------------------
// Hard-negative candidate distributions
// ---------------------------------------------------------------------------

// Global path: softmax over [cos(v, t_orig), cos(v, t_hn_k)] * inv_tau for
// the valid slots of one item. Equivalent to the ratio of exponentiated
// similarities, computed stably.
template <typename S>
CandidateDist<S> hn_distribution_global(const Tensor<S>& v, const Tensor<S>& t_orig,
                                        const std::vector<Tensor<S>>& t_hns,
                                        const std::vector<bool>& valid,
                                        const Tensor<S>& inv_tau) {
  if (t_hns.size() != valid.size())
    fail(ErrorCode::ShapeMismatch, "hard-negative count differs from validity mask");
  CandidateDist<S> out;
  out.total_slots = 1 + valid.size();
  std::vector<Tensor<S>> cos;
  cos.push_back(dot(v, t_orig));
  out.slots.push_back(0);
  for (std::size_t k = 0; k < t_hns.size(); ++k) {
    if (!valid[k]) continue;
    cos.push_back(dot(v, t_hns[k]));
    out.slots.push_back(k + 1);
  }
  if (cos.size() < 2) fail(ErrorCode::AllInvalid, "item has no valid hard negative");
  out.p = softmax(mul(concat(cos), inv_tau));
  return out;
}

// Local path: same softmax, but over per-candidate local log-similarities
// against the item's patches.
template <typename S>
CandidateDist<S> hn_distribution_local(const Tensor<S>& V, const EncodedText<S>& orig,
                                       const std::vector<EncodedText<S>>& hns,
                                       const std::vector<bool>& valid,
                                       const Tensor<S>& inv_tau, NormMode mode) {
  if (hns.size() != valid.size())
    fail(ErrorCode::ShapeMismatch, "hard-negative count differs from validity mask");
  CandidateDist<S> out;
  out.total_slots = 1 + valid.size();
  std::vector<Tensor<S>> lse;
  lse.push_back(local_log_similarity(V, orig, inv_tau, mode));
  out.slots.push_back(0);
  for (std::size_t k = 0; k < hns.size(); ++k) {
    if (!valid[k]) continue;
    lse.push_back(local_log_similarity(V, hns[k], inv_tau, mode));
    out.slots.push_back(k + 1);
  }
  if (lse.size() < 2) fail(ErrorCode::AllInvalid, "item has no valid hard negative");
  out.p = softmax(concat(lse));
  return out;
}

// ---------------------------------------------------------------------------
// Focal-weighted, label-smoothed candidate cross entropy
// ---------------------------------------------------------------------------

// Labels smooth toward beta / (1 + K) over the nominal slot count (invalid
// slots keep label zero and simply drop their share). The focal factor
// (1 - p_k)^gamma is part of the graph and differentiated through. With
// gamma = 0 and beta = 0 this is exactly -log p_0.
template <typename S>
Tensor<S> scr_hn_loss(const CandidateDist<S>& dist, double gamma, double beta) {
  if (dist.total_slots < 2 || dist.slots.empty() || dist.slots[0] != 0)
    fail(ErrorCode::ShapeMismatch, "candidate distribution must start at the original slot");
  for (std::size_t i = 0; i < dist.p.size(); ++i)
    if (!(dist.p.at(i) + S(1e-12) > S(0)))
      fail(ErrorCode::DegenerateP, "candidate probability not positive");
  const double k_nominal = static_cast<double>(dist.total_slots - 1);
  const std::size_t n = dist.p.size();
  std::vector<S> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    double yi = beta / (1.0 + k_nominal);
    if (dist.slots[i] == 0) yi += 1.0 - beta;
    labels[i] = static_cast<S>(yi);
  }
  auto y = Tensor<S>::from({n}, std::move(labels));
  auto focal = pow_const(sub(Tensor<S>::scalar(S(1)), dist.p), gamma);
  auto ce = neg(mul(y, log(clamp_min(dist.p, 1e-12))));
  return sum(mul(focal, ce));
}

// ---------------------------------------------------------------------------
// Total objective
// ---------------------------------------------------------------------------

// One batch item's encodings. hn and hn_valid are parallel over the K
// slots; entries at invalid slots are never touched and may be empty.
template <typename S>
struct ItemEncodings {
  EncodedImage<S> img;
  EncodedText<S> orig;
  std::vector<EncodedText<S>> hn;
  std::vector<bool> hn_valid;

  bool has_valid_hn() const {
    for (bool v : hn_valid)
      if (v) return true;
    return false;
  }
};

// L_total = L_clip + lambda_g * mean_i HN_g(i) + lambda_l * mean_i HN_l(i),
// the means taken over items with at least one valid hard negative. Either
// hard-negative path is skipped entirely when its weight is zero.
template <typename S>
LossBreakdown<S> total_loss(const std::vector<ItemEncodings<S>>& items, const LossConfig& cfg,
                            const Tensor<S>& inv_tau) {
  cfg.validate();
  std::vector<Tensor<S>> v_rows, t_rows;
  v_rows.reserve(items.size());
  t_rows.reserve(items.size());
  for (const auto& it : items) {
    v_rows.push_back(it.img.v);
    t_rows.push_back(it.orig.t);
  }
  auto l_clip = clip_loss(stack_rows(v_rows), stack_rows(t_rows), inv_tau);

  auto hn_mean = [&](auto&& per_item) -> Tensor<S> {
    std::vector<Tensor<S>> terms;
    for (const auto& it : items) {
      if (!it.has_valid_hn()) continue;
      terms.push_back(per_item(it));
    }
    if (terms.empty()) return Tensor<S>::scalar(S(0));
    return mean(concat(terms));
  };

  LossBreakdown<S> out;
  out.lambda_g = cfg.lambda_g;
  out.lambda_l = cfg.lambda_l;

  auto total = l_clip;
  if (cfg.lambda_g > 0) {
    auto l_g = hn_mean([&](const ItemEncodings<S>& it) {
      std::vector<Tensor<S>> hn_ts;
      for (const auto& h : it.hn) hn_ts.push_back(h.t);  // invalid slots never read
      auto dist = hn_distribution_global(it.img.v, it.orig.t, hn_ts, it.hn_valid, inv_tau);
      return scr_hn_loss(dist, cfg.gamma, cfg.beta);
    });
    out.l_neg_g = static_cast<double>(l_g.item());
    total = add(total, scale(l_g, cfg.lambda_g));
  }
  if (cfg.lambda_l > 0) {
    auto l_l = hn_mean([&](const ItemEncodings<S>& it) {
      auto dist = hn_distribution_local(it.img.V, it.orig, it.hn, it.hn_valid, inv_tau, cfg.norm_mode);
      return scr_hn_loss(dist, cfg.gamma, cfg.beta);
    });
    out.l_neg_l = static_cast<double>(l_l.item());
    total = add(total, scale(l_l, cfg.lambda_l));
  }

  out.total = total;
  out.l_clip = static_cast<double>(l_clip.item());
  out.l_total = static_cast<double>(total.item());
  return out;
}

}  // namespace fsc
