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
#include <cctype>
#include <sstream>

#include "fsc/errors.hpp"
#include "fsc/util.hpp"

namespace fsc {

const char* pos_name(Pos p) {
  switch (p) {
    case Pos::Noun: return "NOUN";
    case Pos::Adj: return "ADJ";
    case Pos::Verb: return "VERB";
    case Pos::Adp: return "ADP";
    case Pos::Det: return "DET";
    case Pos::Other: return "OTHER";
  }
  return "?";
}

Pos parse_pos(const std::string& s) {
  if (s == "NOUN") return Pos::Noun;
  if (s == "ADJ") return Pos::Adj;
  if (s == "VERB") return Pos::Verb;
  if (s == "ADP") return Pos::Adp;
  if (s == "DET") return Pos::Det;
  if (s == "OTHER") return Pos::Other;
  fail(ErrorCode::ConfigError, "unknown POS tag '" + s + "'");
}

std::vector<std::string> tokenize_words(const std::string& caption) {
  std::vector<std::string> out = split_ws(caption);
  for (auto& w : out)
    for (auto& c : w) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

namespace {

// Every word the caption templates and the zero-shot prompts can emit.
const char* const kGrammarWords[] = {
    "a",      "red",  "blue",  "green", "yellow", "circle", "square",
    "triangle", "left", "right", "of",   "above",  "below",  "photo",
};

std::vector<std::string> split_on(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  parts.push_back(cur);
  return parts;
}

}  // namespace

Lexicon Lexicon::from_string(const std::string& text) {
  Lexicon lex;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    auto where = [&] { return " (lexicon line " + std::to_string(line_no) + ")"; };
    auto fields = split_on(line, '\t');
    if (fields.size() != 3)
      fail(ErrorCode::ConfigError,
           "expected word<TAB>POS<TAB>alternatives" + where());
    LexEntry e;
    e.word = fields[0];
    if (e.word.empty() || e.word.find_first_of(" \t") != std::string::npos)
      fail(ErrorCode::ConfigError, "bad word field" + where());
    e.pos = parse_pos(fields[1]);
    if (!fields[2].empty()) {
      for (auto& alt : split_on(fields[2], ',')) {
        if (alt.empty())
          fail(ErrorCode::ConfigError, "empty alternative" + where());
        if (alt == e.word)
          fail(ErrorCode::ConfigError,
               "word listed as its own alternative" + where());
        e.alternatives.push_back(alt);
      }
    }
    if (!lex.entries_.emplace(e.word, e).second)
      fail(ErrorCode::ConfigError, "duplicate word '" + e.word + "'" + where());
  }

  // Replacement maps must be closed over the vocabulary and well-typed:
  // ADJ alternatives are antonymous ADJs, NOUN alternatives co-hyponym NOUNs.
  for (const auto& [word, e] : lex.entries_) {
    if (!e.alternatives.empty() && e.pos != Pos::Adj && e.pos != Pos::Noun)
      fail(ErrorCode::ConfigError,
           "alternatives only allowed on ADJ/NOUN ('" + word + "')");
    for (const auto& alt : e.alternatives) {
      auto it = lex.entries_.find(alt);
      if (it == lex.entries_.end())
        fail(ErrorCode::ConfigError,
             "alternative '" + alt + "' of '" + word + "' not in lexicon");
      if (it->second.pos != e.pos)
        fail(ErrorCode::ConfigError,
             "alternative '" + alt + "' of '" + word + "' has different POS");
    }
  }
  for (const char* w : kGrammarWords)
    if (lex.entries_.find(w) == lex.entries_.end())
      fail(ErrorCode::ConfigError,
           std::string("caption-grammar word '") + w + "' missing from lexicon");

  lex.words_.reserve(lex.entries_.size());
  for (const auto& [word, e] : lex.entries_) lex.words_.push_back(word);
  return lex;
}

Lexicon Lexicon::from_file(const std::string& path) {
  return from_string(read_file(path));
}

bool Lexicon::contains(const std::string& word) const {
  return entries_.find(word) != entries_.end();
}

const LexEntry& Lexicon::at(const std::string& word) const {
  auto it = entries_.find(word);
  if (it == entries_.end())
    fail(ErrorCode::UnknownWord, "word '" + word + "' not in lexicon");
  return it->second;
}

TaggedCaption Lexicon::tag(const std::string& caption) const {
  TaggedCaption tc;
  tc.tokens = tokenize_words(caption);
  tc.tags.reserve(tc.tokens.size());
  for (const auto& w : tc.tokens) tc.tags.push_back(at(w).pos);
  return tc;
}

const Lexicon& Lexicon::builtin() {
  static const Lexicon lex = from_string(builtin_lexicon_tsv());
  return lex;
}

const std::string& builtin_lexicon_tsv() {
  static const std::string tsv =
      "# fsclab shapes-world lexicon: word<TAB>POS<TAB>comma-separated alternatives.\n"
      "# ADJ alternatives are antonyms, NOUN alternatives are co-hyponyms.\n"
      "a\tDET\t\n"
      "the\tDET\t\n"
      "and\tOTHER\t\n"
      "with\tOTHER\t\n"
      "of\tADP\t\n"
      "left\tADP\t\n"
      "right\tADP\t\n"
      "above\tADP\t\n"
      "below\tADP\t\n"
      "near\tADP\t\n"
      "beside\tADP\t\n"
      "red\tADJ\tblue,green,yellow\n"
      "blue\tADJ\tred,green,yellow\n"
      "green\tADJ\tred,blue,yellow\n"
      "yellow\tADJ\tred,blue,green\n"
      "big\tADJ\tsmall\n"
      "small\tADJ\tbig\n"
      "bright\tADJ\tdark\n"
      "dark\tADJ\tbright\n"
      "circle\tNOUN\tsquare,triangle\n"
      "square\tNOUN\tcircle,triangle\n"
      "triangle\tNOUN\tcircle,square\n"
      "photo\tNOUN\t\n"
      "shape\tNOUN\t\n"
      "scene\tNOUN\t\n"
      "object\tNOUN\t\n"
      "is\tVERB\t\n"
      "sits\tVERB\t\n"
      "floats\tVERB\t\n"
      "touches\tVERB\t\n";
  return tsv;
}

Vocabulary::Vocabulary(const Lexicon& lex) {
  id_to_word_.push_back("<pad>");
  id_to_word_.push_back("<bos>");
  for (const auto& w : lex.words()) {
    ids_.emplace(w, static_cast<std::uint32_t>(id_to_word_.size()));
    id_to_word_.push_back(w);
  }
  eos_id_ = static_cast<std::uint32_t>(id_to_word_.size());
  id_to_word_.push_back("<eos>");
}

std::uint32_t Vocabulary::id_of(const std::string& word) const {
  auto it = ids_.find(word);
  if (it == ids_.end())
    fail(ErrorCode::UnknownWord, "word '" + word + "' not in vocabulary");
  return it->second;
}

const std::string& Vocabulary::word_of(std::uint32_t id) const {
  if (id >= id_to_word_.size())
    fail(ErrorCode::ConfigError, "token id " + std::to_string(id) + " out of range");
  return id_to_word_[id];
}

TextInput Vocabulary::encode(const std::string& caption, std::size_t pad_to) const {
  TextInput out;
  auto words = tokenize_words(caption);
  out.token_ids.reserve(words.size() + 2);
  out.token_ids.push_back(bos_id());
  for (const auto& w : words) out.token_ids.push_back(id_of(w));
  out.token_ids.push_back(eos_id());
  if (pad_to > 0 && out.token_ids.size() > pad_to)
    fail(ErrorCode::ShapeMismatch,
         "caption needs " + std::to_string(out.token_ids.size()) +
             " positions but pad_to is " + std::to_string(pad_to));
  out.pad_mask.assign(out.token_ids.size(), true);
  while (pad_to > 0 && out.token_ids.size() < pad_to) {
    out.token_ids.push_back(pad_id());
    out.pad_mask.push_back(false);
  }
  return out;
}

}  // namespace fsc
