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

// Flat JSON run configuration shared by the C API and the command line.
// Every key is optional and falls back to the desk-scale default; unknown
// keys are rejected so typos cannot silently revert to defaults.

#pragma once

#include <cstdint>
#include <string>

#include "fsc/encoder.hpp"
#include "fsc/lexicon.hpp"
#include "fsc/trainer.hpp"

namespace fsc {

struct RunConfig {
  EncoderConfig encoder;  // vocab_size stays 0 until a lexicon is attached
  TrainConfig train;      // includes the loss weights and the seed
  std::size_t n_train = 2000;  // gen-data: training scenes
  std::size_t n_eval = 500;    // gen-data: items per eval suite
  std::string lexicon;         // TSV path; empty selects the builtin table
};

// Parses a flat JSON object; empty input yields the defaults, and under the
// pretrain phase the hard-negative weights default to zero unless given.
// ConfigError on malformed JSON, unknown keys, or mistyped values.
RunConfig parse_run_config(const std::string& json_text);

// The effective configuration with every field explicit, keys sorted.
std::string run_config_to_json(const RunConfig& cfg);

// The lexicon selected by the config (builtin or loaded from cfg.lexicon).
Lexicon load_lexicon(const RunConfig& cfg);

// Digest of the model-compatibility surface: encoder dimensions plus the
// canonicalized lexicon content, hashed as FNV-1a over canonical JSON. Two
// runs agree on this digest exactly when their checkpoints are
// interchangeable, so it is stored in checkpoint metadata and verified
// whenever weights are loaded back.
std::uint64_t model_config_digest(const RunConfig& cfg, const Lexicon& lex);

}  // namespace fsc
