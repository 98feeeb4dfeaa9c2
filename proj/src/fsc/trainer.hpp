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

// Seeded AdamW loop over the dual encoder: contrastive pretraining from
// scratch, or fine-tuning with online hard negatives from a checkpoint.
// Training is a deterministic function of (data, configs, seed).

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fsc/checkpoint.hpp"
#include "fsc/encoder.hpp"
#include "fsc/lexicon.hpp"
#include "fsc/objective.hpp"
#include "fsc/scene.hpp"

namespace fsc {

enum class TrainPhase { PretrainContrastive, Finetune };

const char* phase_name(TrainPhase p);
TrainPhase parse_phase(const std::string& s);

struct TrainConfig {
  TrainPhase phase = TrainPhase::PretrainContrastive;
  std::size_t batch_size = 64;
  std::size_t steps = 2000;
  double lr = 3e-4;  // desk-scale peak; fine-tune runs drop to 1e-4
  std::size_t warmup_steps = 50;
  double weight_decay = 0.1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  std::uint64_t seed = 0;
  double sigma = 0.05;  // render noise scale (the dataset stores only seeds)
  LossConfig loss;

  // ConfigError on out-of-range values and on a pretrain phase with nonzero
  // hard-negative weights; BatchTooSmall below two items.
  void validate() const;
};

// One CSV row of the metrics log.
struct StepLog {
  std::size_t step = 0;
  double l_clip = 0, l_neg_g = 0, l_neg_l = 0, l_total = 0;
  double lr = 0, inv_tau = 0;
};

std::string metrics_to_csv(const std::vector<StepLog>& log);

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<StepLog> log;
};

// Fills vocab_size from the lexicon when unset, then validates.
EncoderConfig complete_encoder_config(EncoderConfig cfg, const Lexicon& lex);

DualEncoder<float> make_model(const EncoderConfig& cfg, const Lexicon& lex,
                              double temperature_init);

// Runs cfg.steps AdamW updates with linear warmup and cosine decay. Weights
// start from the seeded init, or from `init` when given. Batch items are
// drawn with replacement from the "train" split; fine-tune batches attach
// the three online hard negatives per item when a hard-negative weight is
// active. `config_digest` is recorded in the checkpoint metadata. Throws
// Divergence with the step index when the loss leaves the finite range.
TrainResult train(const std::vector<DatasetItem>& data, const EncoderConfig& enc_cfg,
                  const TrainConfig& cfg, const Lexicon& lex,
                  const Checkpoint* init = nullptr, std::uint64_t config_digest = 0);

}  // namespace fsc
