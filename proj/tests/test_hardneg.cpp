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
#include <chrono>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "fsc/errors.hpp"

using fsc::Error;
using fsc::ErrorCode;
using fsc::Lexicon;
using fsc::Pos;
using fsc::Rng;
using fsc::StepSeed;
using fsc::TaggedCaption;

namespace {

std::vector<std::string> sorted_tokens(const std::string& s) {
  auto t = fsc::tokenize_words(s);
  std::sort(t.begin(), t.end());
  return t;
}

std::size_t hamming(const std::string& a, const std::string& b) {
  auto ta = fsc::tokenize_words(a);
  auto tb = fsc::tokenize_words(b);
  REQUIRE(ta.size() == tb.size());
  std::size_t d = 0;
  for (std::size_t i = 0; i < ta.size(); ++i) d += ta[i] != tb[i];
  return d;
}

TaggedCaption plain(std::vector<std::string> toks) {
  TaggedCaption tc;
  tc.tags.assign(toks.size(), Pos::Other);
  tc.tokens = std::move(toks);
  return tc;
}

}  // namespace

TEST_CASE("negclip swap eligibility and outcomes") {
  const auto& lex = Lexicon::builtin();

  // No POS class holds two distinct tokens.
  auto tiny = lex.tag("a red circle");
  for (std::uint64_t s = 0; s < 16; ++s) {
    Rng rng(s);
    CHECK(!fsc::negclip_swap(tiny, rng).has_value());
  }

  // Two eligible classes (ADJ and NOUN); DET repeats "a" and never counts.
  auto tc = lex.tag("a red circle and a blue square");
  const std::string adj_out = "a blue circle and a red square";
  const std::string noun_out = "a red square and a blue circle";
  std::set<std::string> seen;
  for (std::uint64_t s = 0; s < 200; ++s) {
    Rng rng(s);
    auto out = fsc::negclip_swap(tc, rng);
    REQUIRE(out.has_value());
    CHECK((*out == adj_out || *out == noun_out));
    CHECK(*out != "a red circle and a blue square");
    CHECK(sorted_tokens(*out) == sorted_tokens("a red circle and a blue square"));
    seen.insert(*out);
  }
  CHECK(seen.size() == 2);  // both branches reachable

  // Deterministic under a fixed seed.
  Rng r1(42), r2(42);
  CHECK(*fsc::negclip_swap(tc, r1) == *fsc::negclip_swap(tc, r2));
}

TEST_CASE("lexicon replace changes exactly one token") {
  const auto& lex = Lexicon::builtin();
  auto tc = lex.tag("a red circle");
  std::set<std::string> seen;
  for (std::uint64_t s = 0; s < 200; ++s) {
    Rng rng(s);
    auto out = fsc::lexicon_replace(tc, lex, rng);
    REQUIRE(out.has_value());
    CHECK(hamming(*out, "a red circle") == 1);
    seen.insert(*out);
  }
  // red -> 3 antonyms, circle -> 2 co-hyponyms: all 5 one-token edits occur.
  CHECK(seen.size() == 5);
  CHECK(seen.count("a green circle") == 1);
  CHECK(seen.count("a red square") == 1);

  // ADP-and-DET-only captions offer nothing to replace.
  auto bare = lex.tag("left of the");
  Rng rng(0);
  CHECK(!fsc::lexicon_replace(bare, lex, rng).has_value());

  // "photo" is a NOUN with no co-hyponyms and must never be replaced.
  auto prompt = lex.tag("a photo of a red circle");
  for (std::uint64_t s = 0; s < 100; ++s) {
    Rng r(s);
    auto out = fsc::lexicon_replace(prompt, lex, r);
    REQUIRE(out.has_value());
    CHECK(fsc::tokenize_words(*out)[1] == "photo");
  }
}

TEST_CASE("bigram shuffle permutes blocks and rejects degenerates") {
  // Two blocks admit exactly one non-identity permutation.
  auto tc4 = plain({"w1", "w2", "w3", "w4"});
  for (std::uint64_t s = 0; s < 16; ++s) {
    Rng rng(s);
    auto out = fsc::bigram_shuffle(tc4, rng);
    REQUIRE(out.has_value());
    CHECK(*out == "w3 w4 w1 w2");
  }

  // All blocks identical: every permutation reproduces the original.
  Rng rng(7);
  CHECK(!fsc::bigram_shuffle(plain({"a", "a", "a", "a"}), rng).has_value());
  CHECK(!fsc::bigram_shuffle(plain({"a", "a", "a", "a", "a"}), rng).has_value());

  // Short captions are ineligible.
  CHECK(!fsc::bigram_shuffle(plain({"a", "red", "circle"}), rng).has_value());

  // Equal pairs plus a distinct singleton tail: still escapable.
  auto tail = plain({"red", "red", "red", "red", "blue"});
  std::set<std::string> seen;
  for (std::uint64_t s = 0; s < 100; ++s) {
    Rng r(s);
    auto out = fsc::bigram_shuffle(tail, r);
    REQUIRE(out.has_value());
    CHECK(*out != "red red red red blue");
    CHECK(sorted_tokens(*out) == sorted_tokens("red red red red blue"));
    seen.insert(*out);
  }
  CHECK(seen.size() >= 2);

  // Longer captions: multiset preserved, output differs, draw deterministic.
  auto tc8 = plain({"a", "red", "circle", "left", "of", "a", "blue", "square"});
  Rng ra(3), rb(3);
  auto oa = fsc::bigram_shuffle(tc8, ra);
  auto ob = fsc::bigram_shuffle(tc8, rb);
  REQUIRE(oa.has_value());
  CHECK(*oa == *ob);
  CHECK(sorted_tokens(*oa) == sorted_tokens("a red circle left of a blue square"));
  CHECK(*oa != "a red circle left of a blue square");
}

TEST_CASE("generate_set worked examples") {
  const auto& lex = Lexicon::builtin();

  // Short caption: only the replacement rule fires.
  auto short_set = fsc::generate_set("a red circle", lex, {1, 0, 0});
  CHECK(short_set.valid == std::array<bool, 3>{false, true, false});
  CHECK(short_set.negatives[fsc::kSlotNegclip] == "a red circle");
  CHECK(short_set.negatives[fsc::kSlotBigram] == "a red circle");
  CHECK(hamming(short_set.negatives[fsc::kSlotReplace], "a red circle") == 1);

  // Relational caption: all three rules fire.
  const std::string rel = "a red circle left of a blue square";
  auto rel_set = fsc::generate_set(rel, lex, {1, 0, 0});
  CHECK(rel_set.valid == std::array<bool, 3>{true, true, true});
  for (std::size_t k = 0; k < 3; ++k) CHECK(rel_set.negatives[k] != rel);
  CHECK(sorted_tokens(rel_set.negatives[fsc::kSlotNegclip]) == sorted_tokens(rel));
  CHECK(hamming(rel_set.negatives[fsc::kSlotReplace], rel) == 1);
  CHECK(sorted_tokens(rel_set.negatives[fsc::kSlotBigram]) == sorted_tokens(rel));

  CHECK_THROWS_AS(fsc::generate_set("a red blob", lex, {1, 0, 0}), Error);
}

TEST_CASE("generate_set determinism and published sub-seed derivation") {
  const auto& lex = Lexicon::builtin();
  const std::string cap = "a red circle left of a blue square";

  auto a = fsc::generate_set(cap, lex, {9, 4, 17});
  auto b = fsc::generate_set(cap, lex, {9, 4, 17});
  CHECK(a.negatives == b.negatives);
  CHECK(a.valid == b.valid);

  // Slot streams are Rng(hash64(global_seed, item_id, step, slot)).
  auto tc = lex.tag(cap);
  {
    Rng r(fsc::hash64({9, 4, 17, fsc::kSlotReplace}));
    CHECK(*fsc::lexicon_replace(tc, lex, r) == a.negatives[fsc::kSlotReplace]);
  }
  {
    Rng r(fsc::hash64({9, 4, 17, fsc::kSlotNegclip}));
    CHECK(*fsc::negclip_swap(tc, r) == a.negatives[fsc::kSlotNegclip]);
  }
  {
    Rng r(fsc::hash64({9, 4, 17, fsc::kSlotBigram}));
    CHECK(*fsc::bigram_shuffle(tc, r) == a.negatives[fsc::kSlotBigram]);
  }

  // Online variation: across steps, several distinct sets appear.
  std::set<std::array<std::string, 3>> sets;
  for (std::uint64_t step = 0; step < 20; ++step)
    sets.insert(fsc::generate_set(cap, lex, {9, 4, step}).negatives);
  CHECK(sets.size() >= 2);

  // Changing any seed component moves at least one slot eventually.
  CHECK(fsc::generate_set(cap, lex, {10, 4, 17}).negatives != a.negatives);
}

TEST_CASE("generate_set throughput is adequate for online use") {
  const auto& lex = Lexicon::builtin();
  const std::string cap = "a red circle left of a blue square";
  auto t0 = std::chrono::steady_clock::now();
  std::size_t validated = 0;
  for (std::uint64_t i = 0; i < 10000; ++i) {
    auto s = fsc::generate_set(cap, lex, {3, i, i % 500});
    validated += s.valid[0] + s.valid[1] + s.valid[2];
  }
  auto dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0);
  CHECK(validated == 30000);
  CHECK(dt.count() < 5.0);  // ~64-item batches x 500 steps must stay cheap
}
