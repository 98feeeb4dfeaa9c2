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

#include "fsc/lexicon.hpp"

#include <algorithm>
#include <string>
#include <vector>

#include "doctest.h"
#include "fsc/encoder.hpp"
#include "fsc/errors.hpp"
#include "fsc/util.hpp"

using fsc::Error;
using fsc::ErrorCode;
using fsc::Lexicon;
using fsc::Pos;
using fsc::Vocabulary;

TEST_CASE("builtin lexicon shape and tagging") {
  const auto& lex = Lexicon::builtin();
  CHECK(lex.size() == 30);

  auto tc = lex.tag("a red circle");
  REQUIRE(tc.tokens.size() == 3);
  CHECK(tc.tags == std::vector<Pos>{Pos::Det, Pos::Adj, Pos::Noun});

  auto rel = lex.tag("circle left of square");
  CHECK(rel.tags == std::vector<Pos>{Pos::Noun, Pos::Adp, Pos::Adp, Pos::Noun});

  auto empty = lex.tag("");
  CHECK(empty.tokens.empty());
  CHECK(empty.tags.empty());

  // Tokenization lowercases before lookup.
  auto upper = lex.tag("A Red CIRCLE");
  CHECK(upper.tokens == std::vector<std::string>{"a", "red", "circle"});
  CHECK(upper.tags == tc.tags);

  CHECK_THROWS_AS(lex.tag("a red blob"), Error);
  try {
    lex.tag("a red blob");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UnknownWord);
  }
}

TEST_CASE("shipped lexicon file is byte-identical to the builtin") {
  auto bytes = fsc::read_file(std::string(FSC_DATA_DIR) + "/lexicon.tsv");
  CHECK(bytes == fsc::builtin_lexicon_tsv());
  auto lex = Lexicon::from_file(std::string(FSC_DATA_DIR) + "/lexicon.tsv");
  CHECK(lex.words() == Lexicon::builtin().words());
}

TEST_CASE("replacement maps are closed, symmetric, and typed") {
  const auto& lex = Lexicon::builtin();
  for (const auto& w : lex.words()) {
    const auto& e = lex.at(w);
    for (const auto& alt : e.alternatives) {
      CHECK(lex.contains(alt));
      CHECK(lex.at(alt).pos == e.pos);
      CHECK(alt != w);
      // Mutuality: colors are mutual antonyms, shapes mutual co-hyponyms.
      const auto& back = lex.at(alt).alternatives;
      CHECK(std::find(back.begin(), back.end(), w) != back.end());
    }
  }
  CHECK(lex.at("red").alternatives ==
        std::vector<std::string>{"blue", "green", "yellow"});
  CHECK(lex.at("circle").alternatives ==
        std::vector<std::string>{"square", "triangle"});
  // Relation words carry no alternatives; "photo" is a NOUN but irreplaceable.
  CHECK(lex.at("left").alternatives.empty());
  CHECK(lex.at("photo").alternatives.empty());
  CHECK(lex.at("photo").pos == Pos::Noun);
}

TEST_CASE("lexicon parse rejections") {
  auto reject = [](const std::string& text) {
    try {
      Lexicon::from_string(text);
      return false;
    } catch (const Error& e) {
      return e.code() == ErrorCode::ConfigError;
    }
  };
  // A minimal valid core all rejection cases build on.
  std::string core = fsc::builtin_lexicon_tsv();
  CHECK_NOTHROW(Lexicon::from_string(core));

  CHECK(reject(core + "noise NOUN\n"));              // missing tabs
  CHECK(reject(core + "noise\tXYZ\t\n"));            // unknown POS
  CHECK(reject(core + "red\tADJ\t\n"));              // duplicate word
  CHECK(reject(core + "noise\tNOUN\tghost\n"));      // alternative not in vocab
  CHECK(reject(core + "noise\tADP\tof\n"));          // alternatives on ADP
  CHECK(reject(core + "noise\tNOUN\tnoise\n"));      // self-alternative
  CHECK(reject("a\tDET\t\n"));                       // grammar words missing
}

TEST_CASE("vocabulary id layout and encoding") {
  const auto& lex = Lexicon::builtin();
  Vocabulary vocab(lex);

  CHECK(vocab.pad_id() == 0);
  CHECK(vocab.bos_id() == 1);
  CHECK(vocab.size() == lex.size() + 3);
  CHECK(vocab.eos_id() == vocab.size() - 1);
  // EOS is the maximal id: argmax pooling over ids finds the EOS position.
  for (const auto& w : lex.words()) CHECK(vocab.id_of(w) < vocab.eos_id());
  for (const auto& w : lex.words()) CHECK(vocab.word_of(vocab.id_of(w)) == w);
  CHECK(vocab.word_of(vocab.eos_id()) == "<eos>");

  // Two builds assign identical ids.
  Vocabulary again(lex);
  for (const auto& w : lex.words()) CHECK(again.id_of(w) == vocab.id_of(w));

  auto enc = vocab.encode("a red circle", 12);
  REQUIRE(enc.token_ids.size() == 12);
  REQUIRE(enc.pad_mask.size() == 12);
  CHECK(std::count(enc.pad_mask.begin(), enc.pad_mask.end(), true) == 5);
  CHECK(enc.token_ids[0] == vocab.bos_id());
  CHECK(enc.token_ids[1] == vocab.id_of("a"));
  CHECK(enc.token_ids[2] == vocab.id_of("red"));
  CHECK(enc.token_ids[3] == vocab.id_of("circle"));
  CHECK(enc.token_ids[4] == vocab.eos_id());
  for (std::size_t i = 5; i < 12; ++i) {
    CHECK(enc.token_ids[i] == vocab.pad_id());
    CHECK(!enc.pad_mask[i]);
  }

  auto trimmed = vocab.encode("a red circle");
  CHECK(trimmed.token_ids.size() == 5);

  CHECK_THROWS_AS(vocab.encode("a red blob"), Error);
  CHECK_THROWS_AS(vocab.encode("a red circle left of a blue square", 4), Error);
  CHECK_THROWS_AS(vocab.word_of(10000), Error);
}

TEST_CASE("vocabulary feeds the text tower end to end") {
  const auto& lex = Lexicon::builtin();
  Vocabulary vocab(lex);
  fsc::EncoderConfig cfg;
  cfg.d = 16;
  cfg.layers = 1;
  cfg.heads = 2;
  cfg.vocab_size = vocab.size();
  cfg.w_max = 16;
  fsc::DualEncoder<float> model(cfg);
  model.init_params(11);
  auto enc = model.encode_text(vocab.encode("a red circle", 12), vocab.eos_id());
  CHECK(enc.eos_pos == 4);
  double n2 = 0;
  for (std::size_t c = 0; c < 16; ++c) n2 += enc.t.at(c) * enc.t.at(c);
  CHECK(n2 == doctest::Approx(1.0).epsilon(1e-5));
}
