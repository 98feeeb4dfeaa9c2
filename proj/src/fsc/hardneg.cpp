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

#include "fsc/hardneg.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <set>
#include <utility>

#include "fsc/util.hpp"

namespace fsc {

namespace {

constexpr Pos kPosOrder[] = {Pos::Noun, Pos::Adj,  Pos::Verb,
                             Pos::Adp,  Pos::Det, Pos::Other};

std::string join_tokens(const std::vector<std::string>& toks) {
  return join_ws(toks);
}

}  // namespace

std::optional<std::string> negclip_swap(const TaggedCaption& tc, Rng& rng) {
  std::map<Pos, std::vector<std::size_t>> by_pos;
  for (std::size_t i = 0; i < tc.tokens.size(); ++i)
    by_pos[tc.tags[i]].push_back(i);

  // Classes scanned in a fixed POS order so the draw is reproducible.
  std::vector<const std::vector<std::size_t>*> eligible;
  for (Pos p : kPosOrder) {
    auto it = by_pos.find(p);
    if (it == by_pos.end()) continue;
    std::set<std::string> distinct;
    for (std::size_t i : it->second) distinct.insert(tc.tokens[i]);
    if (distinct.size() >= 2) eligible.push_back(&it->second);
  }
  if (eligible.empty()) return std::nullopt;

  const auto& cls = *eligible[rng.uniform_int(eligible.size())];
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t a = 0; a < cls.size(); ++a)
    for (std::size_t b = a + 1; b < cls.size(); ++b)
      if (tc.tokens[cls[a]] != tc.tokens[cls[b]])
        pairs.emplace_back(cls[a], cls[b]);
  // Nonempty: the class has two distinct token values somewhere.
  auto [i, j] = pairs[rng.uniform_int(pairs.size())];
  auto toks = tc.tokens;
  std::swap(toks[i], toks[j]);
  return join_tokens(toks);
}

std::optional<std::string> lexicon_replace(const TaggedCaption& tc,
                                           const Lexicon& lex, Rng& rng) {
  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < tc.tokens.size(); ++i) {
    if (tc.tags[i] != Pos::Adj && tc.tags[i] != Pos::Noun) continue;
    if (!lex.at(tc.tokens[i]).alternatives.empty()) candidates.push_back(i);
  }
  if (candidates.empty()) return std::nullopt;
  std::size_t i = candidates[rng.uniform_int(candidates.size())];
  const auto& alts = lex.at(tc.tokens[i]).alternatives;
  auto toks = tc.tokens;
  toks[i] = alts[rng.uniform_int(alts.size())];
  return join_tokens(toks);
}

std::optional<std::string> bigram_shuffle(const TaggedCaption& tc, Rng& rng) {
  const auto& toks = tc.tokens;
  if (toks.size() < 4) return std::nullopt;

  std::vector<std::pair<std::size_t, std::size_t>> blocks;  // [begin, end)
  for (std::size_t i = 0; i < toks.size(); i += 2)
    blocks.emplace_back(i, std::min(i + 2, toks.size()));
  const std::size_t nb = blocks.size();

  auto apply = [&](const std::vector<std::size_t>& order) {
    std::vector<std::string> out;
    out.reserve(toks.size());
    for (std::size_t b : order)
      for (std::size_t i = blocks[b].first; i < blocks[b].second; ++i)
        out.push_back(toks[i]);
    return out;
  };

  // With equal-length pair blocks plus at most one singleton tail, some
  // non-identity permutation changes the sequence iff some transposition
  // does, so transpositions decide validity exactly.
  std::vector<std::size_t> order(nb);
  std::iota(order.begin(), order.end(), 0);
  std::optional<std::vector<std::size_t>> fallback;
  for (std::size_t a = 0; a < nb && !fallback; ++a)
    for (std::size_t b = a + 1; b < nb && !fallback; ++b) {
      std::swap(order[a], order[b]);
      if (apply(order) != toks) fallback = order;
      std::swap(order[a], order[b]);
    }
  if (!fallback) return std::nullopt;

  for (int attempt = 0; attempt < 64; ++attempt) {
    std::vector<std::size_t> perm(nb);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm);
    bool identity = true;
    for (std::size_t k = 0; k < nb; ++k) identity = identity && perm[k] == k;
    if (identity) continue;
    auto out = apply(perm);
    if (out != toks) return join_tokens(out);
  }
  return join_tokens(apply(*fallback));
}

HardNegativeSet generate_set(const std::string& caption, const Lexicon& lex,
                             const StepSeed& seed) {
  HardNegativeSet out;
  out.original = caption;
  auto tc = lex.tag(caption);

  auto slot_rng = [&](std::size_t slot) {
    return Rng(hash64({seed.global_seed, seed.item_id, seed.step,
                       static_cast<std::uint64_t>(slot)}));
  };

  std::optional<std::string> results[kNumHardNegatives];
  {
    Rng r = slot_rng(kSlotNegclip);
    results[kSlotNegclip] = negclip_swap(tc, r);
  }
  {
    Rng r = slot_rng(kSlotReplace);
    results[kSlotReplace] = lexicon_replace(tc, lex, r);
  }
  {
    Rng r = slot_rng(kSlotBigram);
    results[kSlotBigram] = bigram_shuffle(tc, r);
  }
  for (std::size_t k = 0; k < kNumHardNegatives; ++k) {
    out.valid[k] = results[k].has_value();
    out.negatives[k] = out.valid[k] ? std::move(*results[k]) : caption;
  }
  return out;
}

}  // namespace fsc
