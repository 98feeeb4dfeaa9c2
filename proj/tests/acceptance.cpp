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

// Release acceptance harness. Each numbered criterion prints exactly one
// [PASS]/[FAIL] line (with indented detail lines where useful) and the exit
// code is the number of failures. The trend criterion trains real models,
// so a full run takes several minutes.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "fsc/checkpoint.hpp"
#include "fsc/encoder.hpp"
#include "fsc/eval.hpp"
#include "fsc/gradcheck.hpp"
#include "fsc/hardneg.hpp"
#include "fsc/objective.hpp"
#include "fsc/scene.hpp"
#include "fsc/tensor.hpp"
#include "fsc/trainer.hpp"
#include "fsc/util.hpp"

namespace {

using fsc::CandidateDist;
using fsc::EncodedText;
using fsc::Error;
using fsc::ErrorCode;
using fsc::NormMode;
using fsc::Rng;
using fsc::Tensor;
using Clock = std::chrono::steady_clock;

double secs_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

int g_failures = 0;

void report(int id, const char* name, bool pass, const std::string& detail) {
  if (!pass) ++g_failures;
  std::printf("[%s] %d. %s: %s\n", pass ? "PASS" : "FAIL", id, name, detail.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list args;
  va_start(args, f);
  std::vsnprintf(buf, sizeof buf, f, args);
  va_end(args);
  return buf;
}

// Every retrieval result produced anywhere in this run lands here; the
// metric-sanity criterion asserts R@5 >= R@1 across all of them.
std::mutex g_recall_mu;
std::vector<std::array<double, 4>> g_recalls;  // i2t r1, i2t r5, t2i r1, t2i r5

void note_recalls(const fsc::MetricReport& r) {
  std::lock_guard<std::mutex> lk(g_recall_mu);
  g_recalls.push_back({r.i2t_r1, r.i2t_r5, r.t2i_r1, r.t2i_r5});
}

void note_recalls(const fsc::RetrievalReport& r) {
  std::lock_guard<std::mutex> lk(g_recall_mu);
  g_recalls.push_back({r.i2t.at(1), r.i2t.at(5), r.t2i.at(1), r.t2i.at(5)});
}

// ---------------------------------------------------------------------------
// Random-instance helpers (double precision throughout the gradient suite)
// ---------------------------------------------------------------------------

std::vector<double> rand_vec(Rng& r, std::size_t n, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(n);
  for (auto& x : v) x = r.uniform(lo, hi);
  return v;
}

Tensor<double> unit_rows(std::size_t n, std::size_t d, Rng& r) {
  return fsc::l2_normalize(Tensor<double>::from({n, d}, rand_vec(r, n * d)));
}

EncodedText<double> plain_text(const Tensor<double>& T_unit) {
  EncodedText<double> out;
  out.T = T_unit;
  out.t = fsc::l2_normalize(fsc::row(T_unit, T_unit.extent(0) - 1));
  out.pad_mask.assign(T_unit.extent(0), true);
  out.eos_pos = T_unit.extent(0) - 1;
  return out;
}

// ---------------------------------------------------------------------------
// 1. Gradient suite
// ---------------------------------------------------------------------------

struct GradTally {
  double worst = 0.0;
  std::size_t skipped = 0;
  void add(const fsc::GradCheckReport& r) {
    worst = std::max(worst, r.max_rel_err);
    skipped += r.skipped;
  }
};

GradTally grad_clip(std::size_t instances) {
  GradTally tally;
  const std::size_t B = 4, d = 6;
  for (std::size_t i = 0; i < instances; ++i) {
    Rng r(fsc::hash64({0xACC1, i}));
    auto v_raw = rand_vec(r, B * d);
    auto t_raw = rand_vec(r, B * d);
    const double itau = r.uniform(1.0, 12.0);
    auto make = [&](const Tensor<double>& v, const Tensor<double>& t, const Tensor<double>& tau) {
      return fsc::clip_loss(fsc::l2_normalize(v), fsc::l2_normalize(t), tau);
    };
    tally.add(fsc::grad_check(
        [&](const Tensor<double>& x) {
          return make(x, Tensor<double>::from({B, d}, t_raw), Tensor<double>::scalar(itau));
        },
        Tensor<double>::from({B, d}, v_raw)));
    tally.add(fsc::grad_check(
        [&](const Tensor<double>& x) {
          return make(Tensor<double>::from({B, d}, v_raw), x, Tensor<double>::scalar(itau));
        },
        Tensor<double>::from({B, d}, t_raw)));
    tally.add(fsc::grad_check(
        [&](const Tensor<double>& x) {
          return make(Tensor<double>::from({B, d}, v_raw), Tensor<double>::from({B, d}, t_raw), x);
        },
        Tensor<double>::scalar(itau)));
  }
  return tally;
}

// Shared instance for the global candidate path; `gamma`/`beta` select the
// plain negative-log-likelihood or the focal/smoothed form.
GradTally grad_hn_global(std::size_t instances, double gamma, double beta, std::uint64_t tag) {
  GradTally tally;
  const std::size_t d = 6, K = 3;
  for (std::size_t i = 0; i < instances; ++i) {
    Rng r(fsc::hash64({tag, i}));
    auto v_raw = rand_vec(r, d);
    auto t_raw = rand_vec(r, d);
    auto h_raw = rand_vec(r, K * d);
    std::vector<bool> valid(K);
    bool any = false;
    for (std::size_t k = 0; k < K; ++k) {
      valid[k] = r.uniform() < 0.7;
      any = any || valid[k];
    }
    if (!any) valid[i % K] = true;
    const double itau = r.uniform(1.0, 12.0);

    auto make = [&](const Tensor<double>& v, const Tensor<double>& t, const Tensor<double>& h) {
      std::vector<Tensor<double>> hns;
      for (std::size_t k = 0; k < K; ++k)
        hns.push_back(fsc::l2_normalize(fsc::row(h, k)));
      auto dist = fsc::hn_distribution_global(fsc::l2_normalize(v), fsc::l2_normalize(t), hns,
                                              valid, Tensor<double>::scalar(itau));
      return fsc::scr_hn_loss(dist, gamma, beta);
    };
    auto ht = [&] { return Tensor<double>::from({K, d}, h_raw); };
    tally.add(fsc::grad_check(
        [&](const Tensor<double>& x) { return make(x, Tensor<double>::from({d}, t_raw), ht()); },
        Tensor<double>::from({d}, v_raw)));
    tally.add(fsc::grad_check(
        [&](const Tensor<double>& x) { return make(Tensor<double>::from({d}, v_raw), x, ht()); },
        Tensor<double>::from({d}, t_raw)));
    tally.add(fsc::grad_check(
        [&](const Tensor<double>& x) {
          return make(Tensor<double>::from({d}, v_raw), Tensor<double>::from({d}, t_raw), x);
        },
        ht()));
  }
  return tally;
}

GradTally grad_local(std::size_t instances) {
  GradTally tally;
  const std::size_t W = 3, P = 4, d = 6;
  const NormMode modes[3] = {NormMode::MinMax, NormMode::Softmax, NormMode::MinMaxSparse};
  for (std::size_t i = 0; i < instances; ++i) {
    Rng r(fsc::hash64({0xACC3, i}));
    auto v_raw = rand_vec(r, P * d);
    auto t_raw = rand_vec(r, W * d);
    const double itau = r.uniform(1.0, 8.0);
    const NormMode mode = modes[i % 3];

    auto make = [&](const Tensor<double>& vr, const Tensor<double>& tr) {
      auto txt = plain_text(fsc::l2_normalize(tr));
      return fsc::local_similarity(fsc::l2_normalize(vr), txt, Tensor<double>::scalar(itau), mode);
    };
    tally.add(fsc::grad_check(
        [&](const Tensor<double>& x) { return make(x, Tensor<double>::from({W, d}, t_raw)); },
        Tensor<double>::from({P, d}, v_raw)));
    tally.add(fsc::grad_check(
        [&](const Tensor<double>& x) { return make(Tensor<double>::from({P, d}, v_raw), x); },
        Tensor<double>::from({W, d}, t_raw)));
  }
  return tally;
}

GradTally grad_total(std::size_t instances) {
  GradTally tally;
  const std::size_t B = 3, P = 4, W = 3, d = 6, K = 2;
  fsc::LossConfig cfg;  // published fine-tune weights incl. focal and smoothing
  for (std::size_t i = 0; i < instances; ++i) {
    Rng r(fsc::hash64({0xACC5, i}));
    struct RawItem {
      std::vector<double> v, V, T;
      std::vector<std::vector<double>> hn;
      std::vector<bool> valid;
    };
    std::vector<RawItem> raw(B);
    for (std::size_t b = 0; b < B; ++b) {
      raw[b].v = rand_vec(r, d);
      raw[b].V = rand_vec(r, P * d);
      raw[b].T = rand_vec(r, W * d);
      for (std::size_t k = 0; k < K; ++k) raw[b].hn.push_back(rand_vec(r, W * d));
      raw[b].valid = {true, r.uniform() < 0.5};
    }
    raw[B - 1].valid = {false, false};  // one item exercises the exclusion rule
    const double itau = r.uniform(1.0, 8.0);

    // which leaf the check differentiates: rotate through patch matrix,
    // caption tokens, pooled image vector, and the temperature
    const int which = static_cast<int>(i % 4);
    auto build = [&](const Tensor<double>& x) {
      std::vector<fsc::ItemEncodings<double>> items(B);
      for (std::size_t b = 0; b < B; ++b) {
        auto vt = (which == 2 && b == 0) ? x : Tensor<double>::from({d}, raw[b].v);
        auto Vt = (which == 0 && b == 0) ? x : Tensor<double>::from({P, d}, raw[b].V);
        auto Tt = (which == 1 && b == 1) ? x : Tensor<double>::from({W, d}, raw[b].T);
        items[b].img.v = fsc::l2_normalize(vt);
        items[b].img.V = fsc::l2_normalize(Vt);
        items[b].orig = plain_text(fsc::l2_normalize(Tt));
        for (std::size_t k = 0; k < K; ++k)
          items[b].hn.push_back(
              plain_text(fsc::l2_normalize(Tensor<double>::from({W, d}, raw[b].hn[k]))));
        items[b].hn_valid = raw[b].valid;
      }
      auto tau = (which == 3) ? x : Tensor<double>::scalar(itau);
      return fsc::total_loss(items, cfg, tau).total;
    };

    Tensor<double> x0 = (which == 0)   ? Tensor<double>::from({P, d}, raw[0].V)
                        : (which == 1) ? Tensor<double>::from({W, d}, raw[1].T)
                        : (which == 2) ? Tensor<double>::from({d}, raw[0].v)
                                       : Tensor<double>::scalar(itau);
    tally.add(fsc::grad_check(build, x0));
  }
  return tally;
}

void criterion_1() {
  auto t0 = Clock::now();
  GradTally clip = grad_clip(20);
  GradTally hng = grad_hn_global(20, 0.0, 0.0, 0xACC2);
  GradTally local = grad_local(21);
  GradTally scr = grad_hn_global(20, 2.0, 0.02, 0xACC4);
  GradTally total = grad_total(20);
  const double worst = std::max({clip.worst, hng.worst, local.worst, scr.worst, total.worst});
  const std::size_t skipped = clip.skipped + hng.skipped + local.skipped + scr.skipped + total.skipped;
  const double dt = secs_since(t0);
  report(1, "gradient suite", worst < 1e-4 && dt < 60.0,
         fmt("max rel err %.2e (clip %.1e, hn %.1e, local %.1e, scr %.1e, total %.1e), "
             "%zu tie-skips, %.1fs < 60s",
             worst, clip.worst, hng.worst, local.worst, scr.worst, total.worst, skipped, dt));
}

// ---------------------------------------------------------------------------
// 2. Degeneracy identities
// ---------------------------------------------------------------------------

void criterion_2() {
  bool ok = true;
  std::ostringstream note;

  // scr at gamma=0, beta=0 is exactly -log p0, over random distributions
  double worst_nll = 0.0;
  for (std::size_t i = 0; i < 50; ++i) {
    Rng r(fsc::hash64({0xDE6, i}));
    std::vector<Tensor<double>> cos;
    for (int k = 0; k < 4; ++k) cos.push_back(Tensor<double>::scalar(r.uniform(-1.0, 1.0)));
    CandidateDist<double> dist;
    dist.p = fsc::softmax(fsc::scale(fsc::concat(cos), r.uniform(1.0, 14.0)));
    dist.slots = {0, 1, 2, 3};
    dist.total_slots = 4;
    const double got = fsc::scr_hn_loss(dist, 0.0, 0.0).item();
    worst_nll = std::max(worst_nll, std::abs(got - (-std::log(dist.p.at(0)))));
  }
  ok = ok && worst_nll < 1e-12;
  note << fmt("|scr - (-log p0)| <= %.1e", worst_nll);

  // beta=0 labels are exactly one-hot: replicate the smoothing arithmetic
  // and confirm behaviorally on a known distribution
  bool onehot = true;
  for (std::size_t slot = 0; slot < 4; ++slot) {
    double y = 0.0 / (1.0 + 3.0) + (slot == 0 ? 1.0 - 0.0 : 0.0);
    onehot = onehot && (y == (slot == 0 ? 1.0 : 0.0));
  }
  CandidateDist<double> fixed{Tensor<double>::from({4}, {0.7, 0.1, 0.1, 0.1}), {0, 1, 2, 3}, 4};
  onehot = onehot && fsc::scr_hn_loss(fixed, 0.0, 0.0).item() == -std::log(0.7);
  ok = ok && onehot;
  note << (onehot ? ", beta=0 one-hot exact" : ", beta=0 NOT one-hot");

  // minmax identities
  auto mm = fsc::rownorm_minmax(Tensor<double>::from({1, 3}, {1.0, 3.0, 2.0}));
  bool mm_ok = mm.at(0, 0) == 0.0 && mm.at(0, 1) == 1.0 && mm.at(0, 2) == 0.5;
  auto uni = fsc::rownorm_minmax(Tensor<double>::from({1, 4}, {5.0, 5.0, 5.0, 5.0}));
  bool uni_ok = true;
  for (std::size_t p = 0; p < 4; ++p) uni_ok = uni_ok && uni.at(0, p) == 0.25;
  ok = ok && mm_ok && uni_ok;
  note << (mm_ok ? ", minmax [1,3,2] -> [0,1,0.5] exact" : ", minmax identity FAILED")
       << (uni_ok ? ", constant row -> 1/P exact" : ", constant-row rule FAILED");

  report(2, "degeneracy identities", ok, note.str());
}

// ---------------------------------------------------------------------------
// 3. Aggregation order
// ---------------------------------------------------------------------------

void criterion_3() {
  Rng rng(19);
  auto one = Tensor<double>::scalar(1.0);

  auto V = unit_rows(4, 8, rng);
  auto txt = plain_text(unit_rows(3, 8, rng));
  auto v = fsc::l2_normalize(fsc::mean(V, 0));
  const double s_g = std::exp(fsc::dot(v, txt.t).item());
  const double s_l = fsc::local_similarity(V, txt, one, NormMode::MinMax).item();
  const double gap = std::abs(s_l - s_g);

  auto V1 = unit_rows(1, 8, rng);
  auto txt1 = plain_text(unit_rows(1, 8, rng));
  const double g1 = std::exp(fsc::dot(fsc::row(V1, 0), txt1.t).item());
  const double l1 = fsc::local_similarity(V1, txt1, one, NormMode::Softmax).item();
  const double coincide = std::abs(l1 - g1);

  report(3, "aggregation order", gap > 1e-6 && coincide < 1e-9,
         fmt("W=3,P=4: |S_l - S_g| = %.3g (distinct); W=1,P=1 softmax: |S_l - S_g| = %.2e < 1e-9",
             gap, coincide));
}

// ---------------------------------------------------------------------------
// 4. Weight interpolation
// ---------------------------------------------------------------------------

bool same_payload(const fsc::Checkpoint& a, const fsc::Checkpoint& b) {
  if (a.tensors().size() != b.tensors().size()) return false;
  for (std::size_t i = 0; i < a.tensors().size(); ++i) {
    const auto& ta = a.tensors()[i];
    const auto& tb = b.tensors()[i];
    if (ta.name != tb.name || ta.shape != tb.shape || ta.data.size() != tb.data.size())
      return false;
    if (std::memcmp(ta.data.data(), tb.data.data(), ta.data.size() * sizeof(float)) != 0)
      return false;
  }
  return true;
}

bool within_one_ulp(float got, float want) {
  return got == want || got == std::nextafterf(want, INFINITY) ||
         got == std::nextafterf(want, -INFINITY);
}

void criterion_4(const fsc::EvalSuites& suites) {
  const auto& lex = fsc::Lexicon::builtin();
  fsc::Vocabulary vocab(lex);
  auto model_a = fsc::make_model(fsc::EncoderConfig{}, lex, 0.07);
  model_a.init_params(101);
  auto model_b = fsc::make_model(fsc::EncoderConfig{}, lex, 0.07);
  model_b.init_params(102);
  auto pre = fsc::Checkpoint::from_model(model_a, {0, 101, 0.0, 0, {}});
  auto ft = fsc::Checkpoint::from_model(model_b, {0, 102, 0.0, 0, {}});

  const bool end0 = same_payload(fsc::wise_ft_interpolate(pre, ft, 0.0), pre);
  const bool end1 = same_payload(fsc::wise_ft_interpolate(pre, ft, 1.0), ft);

  auto mid = fsc::wise_ft_interpolate(pre, ft, 0.5);
  bool mid_ok = mid.meta.alpha && *mid.meta.alpha == 0.5;
  for (std::size_t t = 0; t < mid.tensors().size() && mid_ok; ++t) {
    const auto& m = mid.tensors()[t];
    const auto& a = pre.tensors()[t];
    const auto& b = ft.tensors()[t];
    for (std::size_t i = 0; i < m.data.size(); ++i) {
      float want = static_cast<float>(0.5 * (static_cast<double>(a.data[i]) +
                                             static_cast<double>(b.data[i])));
      if (!within_one_ulp(m.data[i], want)) {
        mid_ok = false;
        break;
      }
    }
  }

  auto t0 = Clock::now();
  auto model = fsc::make_model(fsc::EncoderConfig{}, lex, 0.07);
  for (int k = 0; k <= 10; ++k) {
    auto merged = fsc::wise_ft_interpolate(pre, ft, static_cast<double>(k) / 10.0);
    merged.load_into(model);
    auto scorer = fsc::model_scorer(model, vocab, 0.05);
    note_recalls(fsc::evaluate_all(scorer, suites));
  }
  const double dt = secs_since(t0);

  report(4, "weight interpolation", end0 && end1 && mid_ok && dt < 120.0,
         fmt("alpha 0/1 bit-exact: %s/%s; alpha 0.5 within 1 ulp: %s; "
             "11-point trajectory evaluated in %.1fs < 120s",
             end0 ? "yes" : "NO", end1 ? "yes" : "NO", mid_ok ? "yes" : "NO", dt));
}

// ---------------------------------------------------------------------------
// 5. Hard-negative generator
// ---------------------------------------------------------------------------

std::vector<std::string> sorted_tokens(const std::string& s) {
  auto t = fsc::split_ws(s);
  std::sort(t.begin(), t.end());
  return t;
}

std::size_t hamming_tokens(const std::string& a, const std::string& b) {
  auto ta = fsc::split_ws(a), tb = fsc::split_ws(b);
  if (ta.size() != tb.size()) return ta.size() + tb.size();
  std::size_t h = 0;
  for (std::size_t i = 0; i < ta.size(); ++i) h += ta[i] != tb[i] ? 1 : 0;
  return h;
}

void criterion_5() {
  const auto& lex = fsc::Lexicon::builtin();
  bool ok = true;
  std::ostringstream note;

  // worked example: short caption, only the replacement rule applies
  auto short_set = fsc::generate_set("a red circle", lex, {1, 0, 0});
  ok = ok && short_set.valid == std::array<bool, 3>{false, true, false};
  ok = ok && hamming_tokens(short_set.negatives[fsc::kSlotReplace], "a red circle") == 1;

  // worked example: relational caption, all three rules apply
  const std::string rel = "a red circle left of a blue square";
  auto rel_set = fsc::generate_set(rel, lex, {1, 0, 0});
  ok = ok && rel_set.valid == std::array<bool, 3>{true, true, true};

  // worked example: same caption and seeds twice -> identical set
  auto again = fsc::generate_set(rel, lex, {1, 0, 0});
  ok = ok && again.negatives == rel_set.negatives && again.valid == rel_set.valid;
  note << (ok ? "worked examples match" : "worked examples MISMATCH");

  // corpus pass: multisets, hamming distance, determinism, throughput
  auto corpus = fsc::generate_train_set(10000, 4242);
  bool props = true;
  auto t0 = Clock::now();
  std::vector<fsc::HardNegativeSet> first_pass;
  first_pass.reserve(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    auto set = fsc::generate_set(corpus[i].caption, lex, {7, i, 0});
    const auto base = sorted_tokens(set.original);
    if (set.valid[fsc::kSlotNegclip])
      props = props && sorted_tokens(set.negatives[fsc::kSlotNegclip]) == base &&
              set.negatives[fsc::kSlotNegclip] != set.original;
    if (set.valid[fsc::kSlotBigram])
      props = props && sorted_tokens(set.negatives[fsc::kSlotBigram]) == base &&
              set.negatives[fsc::kSlotBigram] != set.original;
    if (set.valid[fsc::kSlotReplace])
      props = props && hamming_tokens(set.negatives[fsc::kSlotReplace], set.original) == 1;
    first_pass.push_back(std::move(set));
  }
  const double dt = secs_since(t0);
  bool det = true;
  for (std::size_t i = 0; i < 200; ++i) {
    auto set = fsc::generate_set(corpus[i].caption, lex, {7, i, 0});
    det = det && set.negatives == first_pass[i].negatives && set.valid == first_pass[i].valid;
  }
  ok = ok && props && det && dt < 10.0;
  note << fmt("; 10k corpus: multiset/hamming %s, deterministic %s, %.2fs < 10s",
              props ? "hold" : "VIOLATED", det ? "yes" : "NO", dt);

  report(5, "hard-negative generator", ok, note.str());
}

// ---------------------------------------------------------------------------
// 6. Trend reproduction
// ---------------------------------------------------------------------------

struct TrendOutcome {
  double comp_pre = 0, comp_hn = 0;
  double r1_contrast = 0, r1_hn = 0, r1_scr = 0;
  std::string error;
};

void run_trend_seed(std::uint64_t seed, const fsc::EvalSuites& suites, TrendOutcome& out) {
  try {
    const auto& lex = fsc::Lexicon::builtin();
    fsc::Vocabulary vocab(lex);
    auto data = fsc::generate_train_set(2000, seed);
    fsc::EncoderConfig enc;

    auto eval_ck = [&](const fsc::Checkpoint& ck, double* comp, double* r1) {
      auto model = fsc::make_model(enc, lex, 0.07);
      ck.load_into(model);
      auto scorer = fsc::model_scorer(model, vocab, 0.05);
      if (comp) *comp = fsc::eval_comp_i2t(scorer, suites.comp_i2t);
      auto ret = fsc::eval_retrieval(scorer, suites.retrieval, {1, 5});
      note_recalls(ret);
      if (r1) *r1 = ret.i2t.at(1);
    };

    fsc::TrainConfig pre;  // desk defaults: 2000 steps, batch 64, lr 3e-4
    pre.phase = fsc::TrainPhase::PretrainContrastive;
    pre.seed = seed;
    pre.loss.lambda_g = 0;
    pre.loss.lambda_l = 0;
    auto v0 = fsc::train(data, enc, pre, lex);
    eval_ck(v0.checkpoint, &out.comp_pre, nullptr);

    auto finetune = [&](double lg, double ll, double gamma, double beta) {
      fsc::TrainConfig cfg;
      cfg.phase = fsc::TrainPhase::Finetune;
      cfg.seed = seed;
      cfg.steps = 500;
      cfg.lr = 1e-4;
      cfg.loss.lambda_g = lg;
      cfg.loss.lambda_l = ll;
      cfg.loss.gamma = gamma;
      cfg.loss.beta = beta;
      return fsc::train(data, enc, cfg, lex, &v0.checkpoint);
    };
    eval_ck(finetune(0.0, 0.0, 0.0, 0.0).checkpoint, nullptr, &out.r1_contrast);
    eval_ck(finetune(0.5, 0.2, 0.0, 0.0).checkpoint, &out.comp_hn, &out.r1_hn);
    eval_ck(finetune(0.5, 0.2, 2.0, 0.02).checkpoint, nullptr, &out.r1_scr);
  } catch (const std::exception& e) {
    out.error = e.what();
  }
}

void criterion_6() {
  auto t0 = Clock::now();
  auto suites = fsc::make_eval_suites(500, 777);
  const std::uint64_t seeds[3] = {1, 2, 3};
  TrendOutcome outs[3];
  {
    std::vector<std::thread> workers;
    for (int s = 0; s < 3; ++s)
      workers.emplace_back(run_trend_seed, seeds[s], std::cref(suites), std::ref(outs[s]));
    for (auto& w : workers) w.join();
  }
  const double dt = secs_since(t0);

  int votes_a = 0, votes_b = 0, votes_c = 0;
  bool errored = false;
  for (int s = 0; s < 3; ++s) {
    const auto& o = outs[s];
    if (!o.error.empty()) {
      std::printf("       seed %llu FAILED: %s\n", (unsigned long long)seeds[s], o.error.c_str());
      errored = true;
      continue;
    }
    const bool a = o.comp_hn - o.comp_pre >= 0.15;
    const bool b = o.r1_scr >= o.r1_hn;
    const bool c = o.r1_hn < o.r1_contrast;
    votes_a += a;
    votes_b += b;
    votes_c += c;
    std::printf(
        "       seed %llu: comp_i2t %.3f -> %.3f (%+.1f pts)%s | i2t R@1 contrast %.3f, "
        "hn %.3f%s, hn+scr %.3f%s\n",
        (unsigned long long)seeds[s], o.comp_pre, o.comp_hn, 100.0 * (o.comp_hn - o.comp_pre),
        a ? "" : " [a miss]", o.r1_contrast, o.r1_hn, c ? " [degraded]" : " [c miss]", o.r1_scr,
        b ? "" : " [b miss]");
  }
  std::fflush(stdout);

  const bool pass = !errored && votes_a >= 2 && votes_b >= 2 && votes_c >= 2 && dt < 900.0;
  report(6, "trend reproduction (3 seeds, majority)", pass,
         fmt("(a) HN fine-tune lifts comp_i2t >= 15 pts: %d/3; (b) SCR keeps i2t R@1: %d/3; "
             "(c) HN without SCR degrades R@1: %d/3; %.1f min < 15 min",
             votes_a, votes_b, votes_c, dt / 60.0));
}

// ---------------------------------------------------------------------------
// 7. Metric sanity
// ---------------------------------------------------------------------------

void criterion_7(const fsc::EvalSuites& suites) {
  const auto& lex = fsc::Lexicon::builtin();
  fsc::Vocabulary vocab(lex);
  auto model = fsc::make_model(fsc::EncoderConfig{}, lex, 0.07);
  model.init_params(6);
  auto scorer = fsc::model_scorer(model, vocab, 0.05);
  auto rep = fsc::evaluate_all(scorer, suites);
  note_recalls(rep);

  const bool comp_ok = std::abs(rep.comp_i2t_acc - 0.5) <= 0.06;
  const bool zs_ok = std::abs(rep.zs_acc - 1.0 / 12.0) <= 0.04;

  bool recalls_ok = true;
  std::size_t n_reports;
  {
    std::lock_guard<std::mutex> lk(g_recall_mu);
    n_reports = g_recalls.size();
    for (const auto& r : g_recalls) recalls_ok = recalls_ok && r[1] >= r[0] && r[3] >= r[2];
  }

  report(7, "metric sanity", comp_ok && zs_ok && recalls_ok,
         fmt("random model: comp_i2t %.3f in 0.5+-0.06 %s; zs %.3f in 0.083+-0.04 %s; "
             "R@5 >= R@1 on all %zu reports %s",
             rep.comp_i2t_acc, comp_ok ? "yes" : "NO", rep.zs_acc, zs_ok ? "yes" : "NO",
             n_reports, recalls_ok ? "yes" : "NO"));
}

// ---------------------------------------------------------------------------
// 8. Serialization
// ---------------------------------------------------------------------------

void criterion_8() {
  namespace fs = std::filesystem;
  const auto& lex = fsc::Lexicon::builtin();
  auto model = fsc::make_model(fsc::EncoderConfig{}, lex, 0.07);
  model.init_params(7);
  auto ck = fsc::Checkpoint::from_model(model, {3, 7, 0.0, 0xD1335, {}});

  const auto path = (fs::temp_directory_path() / "fsc_acceptance_roundtrip.ckpt").string();
  ck.save(path);
  auto back = fsc::Checkpoint::load(path);
  const bool roundtrip = back.to_bytes() == ck.to_bytes();
  const bool digest_stored = back.meta.config_digest == 0xD1335;

  bool verify_ok = true;
  try {
    back.verify_config(0xD1335);
  } catch (...) {
    verify_ok = false;
  }
  bool verify_trips = false;
  try {
    back.verify_config(0xD1336);
  } catch (const Error& e) {
    verify_trips = e.code() == ErrorCode::ConfigError;
  }

  auto bytes = ck.to_bytes();
  auto code_of = [](const std::string& blob) {
    try {
      fsc::Checkpoint::from_bytes(blob);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::ShapeMismatch;  // sentinel: no error raised
  };
  auto magicked = bytes;
  magicked[0] = 'X';
  const bool magic_trips = code_of(magicked) == ErrorCode::CorruptFile;
  const bool trunc_trips = code_of(bytes.substr(0, bytes.size() / 2)) == ErrorCode::CorruptFile;
  fs::remove(path);

  report(8, "serialization", roundtrip && digest_stored && verify_ok && verify_trips &&
                                 magic_trips && trunc_trips,
         fmt("round-trip bit-exact %s; digest stored %s, verified %s, mismatch rejected %s; "
             "corrupt magic -> CorruptFile %s; truncation -> CorruptFile %s",
             roundtrip ? "yes" : "NO", digest_stored ? "yes" : "NO", verify_ok ? "yes" : "NO",
             verify_trips ? "yes" : "NO", magic_trips ? "yes" : "NO", trunc_trips ? "yes" : "NO"));
}

}  // namespace

int main(int argc, char** argv) {
  auto t0 = Clock::now();
  std::printf("fsclab acceptance run\n");

  // Optional arguments select a subset of criteria, e.g. `fsc_acceptance 1 6`.
  bool want[9];
  std::fill(std::begin(want), std::end(want), argc < 2);
  for (int i = 1; i < argc; ++i) {
    int id = std::atoi(argv[i]);
    if (id >= 1 && id <= 8) want[id] = true;
  }

  auto suites = fsc::make_eval_suites(500, 20260823);

  try {
    if (want[1]) criterion_1();
    if (want[2]) criterion_2();
    if (want[3]) criterion_3();
    if (want[4]) criterion_4(suites);
    if (want[5]) criterion_5();
    if (want[6]) criterion_6();
    if (want[7]) criterion_7(suites);
    if (want[8]) criterion_8();
  } catch (const std::exception& e) {
    std::printf("[FAIL] harness aborted: %s\n", e.what());
    return 99;
  }

  int ran = 0;
  for (int id = 1; id <= 8; ++id) ran += want[id];
  std::printf("%d/%d criteria passed in %.1f min\n", ran - g_failures, ran,
              secs_since(t0) / 60.0);
  return g_failures;
}
