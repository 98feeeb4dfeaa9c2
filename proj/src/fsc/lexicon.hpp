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
#include <string>
#include <vector>

#include "fsc/encoder.hpp"

namespace fsc {

enum class Pos : std::uint8_t { Noun, Adj, Verb, Adp, Det, Other };

const char* pos_name(Pos p);
Pos parse_pos(const std::string& s);  // throws ConfigError on unknown tag

// Source text of the compiled-in lexicon, byte-identical to data/lexicon.tsv.
const std::string& builtin_lexicon_tsv();

// Lowercased whitespace tokenization. The caption grammar is controlled, so
// this is the only text segmentation in the project.
std::vector<std::string> tokenize_words(const std::string& caption);

struct TaggedCaption {
  std::vector<std::string> tokens;
  std::vector<Pos> tags;  // same length as tokens
};

struct LexEntry {
  std::string word;
  Pos pos = Pos::Other;
  // ADJ: antonyms; NOUN: co-hyponyms; empty for everything else (and for
  // nouns like "photo" that must never be replaced).
  std::vector<std::string> alternatives;
};

// Closed word list with POS tags and replacement maps. Replaces a real
// POS tagger plus WordNet at shapes-world scale.
class Lexicon {
 public:
  // TSV records `word<TAB>POS<TAB>alt1,alt2,...` (third field may be empty).
  // Blank lines and lines starting with '#' are skipped. Throws ConfigError
  // on malformed records, duplicate words, alternatives that leave the
  // vocabulary, or a missing caption-grammar word.
  static Lexicon from_string(const std::string& text);
  static Lexicon from_file(const std::string& path);

  // The compiled-in table, byte-identical to the shipped data/lexicon.tsv.
  static const Lexicon& builtin();

  bool contains(const std::string& word) const;
  const LexEntry& at(const std::string& word) const;  // throws UnknownWord

  // Sorted word list; the Vocabulary id assignment is derived from it.
  const std::vector<std::string>& words() const { return words_; }
  std::size_t size() const { return words_.size(); }

  // Whitespace-tokenizes and tags every word. Throws UnknownWord.
  TaggedCaption tag(const std::string& caption) const;

 private:
  std::map<std::string, LexEntry> entries_;
  std::vector<std::string> words_;
};

// Token-id mapping for the text tower. Ids are PAD=0, BOS=1, then the
// lexicon words in sorted order, and EOS last -- EOS must carry the maximal
// id so that argmax pooling over ids is EOS pooling.
class Vocabulary {
 public:
  explicit Vocabulary(const Lexicon& lex);

  std::uint32_t pad_id() const { return 0; }
  std::uint32_t bos_id() const { return 1; }
  std::uint32_t eos_id() const { return eos_id_; }
  std::size_t size() const { return static_cast<std::size_t>(eos_id_) + 1; }

  std::uint32_t id_of(const std::string& word) const;  // throws UnknownWord
  const std::string& word_of(std::uint32_t id) const;  // throws ConfigError

  // [BOS] words [EOS], padded with PAD up to pad_to when pad_to > 0.
  // Throws ShapeMismatch when the sequence does not fit.
  TextInput encode(const std::string& caption, std::size_t pad_to = 0) const;

 private:
  std::map<std::string, std::uint32_t> ids_;
  std::vector<std::string> id_to_word_;
  std::uint32_t eos_id_ = 0;
};

}  // namespace fsc
