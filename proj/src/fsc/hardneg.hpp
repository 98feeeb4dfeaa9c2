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

#include <array>
#include <cstdint>
#include <optional>
#include <string>

#include "fsc/lexicon.hpp"
#include "fsc/rng.hpp"

namespace fsc {

// Slot order inside a HardNegativeSet and in the seed derivation.
inline constexpr std::size_t kSlotNegclip = 0;
inline constexpr std::size_t kSlotReplace = 1;
inline constexpr std::size_t kSlotBigram = 2;
inline constexpr std::size_t kNumHardNegatives = 3;

struct HardNegativeSet {
  std::string original;
  // Invalid slots carry the original text and must be masked via `valid`.
  std::array<std::string, kNumHardNegatives> negatives;
  std::array<bool, kNumHardNegatives> valid{false, false, false};
};

// Identifies one (run, item, step) augmentation stream. Each generator slot
// draws from Rng(hash64(global_seed, item_id, step, slot)).
struct StepSeed {
  std::uint64_t global_seed = 0;
  std::uint64_t item_id = 0;
  std::uint64_t step = 0;
};

// Swap two positions of one POS class. A class is eligible when it covers
// >= 2 distinct tokens; the class and then a distinct-token position pair
// are drawn uniformly. nullopt when no class qualifies.
std::optional<std::string> negclip_swap(const TaggedCaption& tc, Rng& rng);

// Replace one ADJ by an antonym or one NOUN by a co-hyponym, both drawn
// uniformly. nullopt when no token has alternatives.
std::optional<std::string> lexicon_replace(const TaggedCaption& tc,
                                           const Lexicon& lex, Rng& rng);

// Partition into adjacent token pairs (odd tail forms a singleton) and
// permute the blocks with a seeded non-identity permutation that changes
// the token sequence. nullopt when fewer than 4 tokens or when every
// permutation reproduces the original.
std::optional<std::string> bigram_shuffle(const TaggedCaption& tc, Rng& rng);

// Runs all three generators with independent sub-seeds. Pure function of
// (caption, lexicon, seed). Throws UnknownWord for words outside the lexicon.
HardNegativeSet generate_set(const std::string& caption, const Lexicon& lex,
                             const StepSeed& seed);

}  // namespace fsc
