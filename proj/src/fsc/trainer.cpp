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

#include "fsc/trainer.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>

#include "fsc/hardneg.hpp"
#include "fsc/optim.hpp"
#include "fsc/rng.hpp"

namespace fsc {

const char* phase_name(TrainPhase p) {
  switch (p) {
    case TrainPhase::PretrainContrastive: return "pretrain_contrastive";
    case TrainPhase::Finetune: return "finetune";
  }
  return "?";
}

TrainPhase parse_phase(const std::string& s) {
  if (s == "pretrain_contrastive") return TrainPhase::PretrainContrastive;
  if (s == "finetune") return TrainPhase::Finetune;
  fail(ErrorCode::ConfigError, "unknown training phase: " + s);
}

void TrainConfig::validate() const {
  if (batch_size < 2)
    fail(ErrorCode::BatchTooSmall, "contrastive batches need at least two items");
  if (steps == 0 || lr <= 0 || weight_decay < 0 || sigma < 0)
    fail(ErrorCode::ConfigError, "training schedule values out of range");
  if (warmup_steps >= steps)
    fail(ErrorCode::ConfigError, "warmup must end before the final step");
  if (beta1 < 0 || beta1 >= 1 || beta2 < 0 || beta2 >= 1)
    fail(ErrorCode::ConfigError, "Adam betas must lie in [0, 1)");
  loss.validate();
  if (phase == TrainPhase::PretrainContrastive && (loss.lambda_g != 0 || loss.lambda_l != 0))
    fail(ErrorCode::ConfigError,
         "pretraining is contrastive-only; set lambda_g and lambda_l to zero");
}

std::string metrics_to_csv(const std::vector<StepLog>& log) {
  std::ostringstream out;
  out << "step,l_clip,l_neg_g,l_neg_l,l_total,lr,inv_tau\n";
  out << std::setprecision(10);
  for (const auto& s : log)
    out << s.step << ',' << s.l_clip << ',' << s.l_neg_g << ',' << s.l_neg_l << ','
        << s.l_total << ',' << s.lr << ',' << s.inv_tau << '\n';
  return out.str();
}

EncoderConfig complete_encoder_config(EncoderConfig cfg, const Lexicon& lex) {
  if (cfg.vocab_size == 0) cfg.vocab_size = Vocabulary(lex).size();
  cfg.validate();
  return cfg;
}

DualEncoder<float> make_model(const EncoderConfig& cfg, const Lexicon& lex,
                              double temperature_init) {
  return DualEncoder<float>(complete_encoder_config(cfg, lex), temperature_init);
}

TrainResult train(const std::vector<DatasetItem>& data, const EncoderConfig& enc_cfg,
                  const TrainConfig& cfg, const Lexicon& lex, const Checkpoint* init,
                  std::uint64_t config_digest) {
  cfg.validate();
  std::vector<std::size_t> train_idx;
  for (std::size_t i = 0; i < data.size(); ++i)
    if (data[i].split == "train") train_idx.push_back(i);
  if (train_idx.empty()) fail(ErrorCode::ConfigError, "dataset has no train-split items");

  Vocabulary vocab(lex);
  auto model = make_model(enc_cfg, lex, cfg.loss.temperature_init);
  model.init_params(cfg.seed);
  if (init) init->load_into(model);

  AdamW<float> opt(model.params(),
                   {cfg.beta1, cfg.beta2, 1e-8, cfg.weight_decay});
  const bool use_hn = cfg.phase == TrainPhase::Finetune &&
                      (cfg.loss.lambda_g > 0 || cfg.loss.lambda_l > 0);

  std::vector<StepLog> log;
  log.reserve(cfg.steps);
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    Tape<float> tape;
    Tape<float>::Scope scope(tape);
    Rng batch_rng(hash64({cfg.seed, static_cast<std::uint64_t>(step), 0x626174ULL}));

    LossBreakdown<float> bd;
    try {
      std::vector<ItemEncodings<float>> batch;
      batch.reserve(cfg.batch_size);
      for (std::size_t b = 0; b < cfg.batch_size; ++b) {
        const std::size_t idx = train_idx[batch_rng.uniform_int(train_idx.size())];
        const DatasetItem& item = data[idx];
        ItemEncodings<float> enc;
        enc.img = model.encode_image(render(item.scene, item.noise_seed, cfg.sigma));
        enc.orig = model.encode_text(vocab.encode(item.caption), vocab.eos_id());
        if (use_hn) {
          auto set = generate_set(item.caption, lex,
                                  StepSeed{cfg.seed, static_cast<std::uint64_t>(idx),
                                           static_cast<std::uint64_t>(step)});
          enc.hn.resize(kNumHardNegatives);
          enc.hn_valid.assign(kNumHardNegatives, false);
          for (std::size_t k = 0; k < kNumHardNegatives; ++k) {
            if (!set.valid[k]) continue;
            enc.hn[k] = model.encode_text(vocab.encode(set.negatives[k]), vocab.eos_id());
            enc.hn_valid[k] = true;
          }
        }
        batch.push_back(std::move(enc));
      }
      bd = total_loss(batch, cfg.loss, model.log_inv_tau());
      model.zero_grad();
      backward(bd.total);
    } catch (const Error& e) {
      // Exploded activations surface as domain guards deep in the graph
      // before any loss value exists; report them as the divergence they are.
      if (e.code() == ErrorCode::DomainError || e.code() == ErrorCode::DegenerateP)
        fail(ErrorCode::Divergence,
             "numerical failure at step " + std::to_string(step) + ": " + e.what());
      throw;
    }
    if (!std::isfinite(bd.l_total))
      fail(ErrorCode::Divergence, "non-finite loss at step " + std::to_string(step));
    const double lr = lr_at(step, cfg.steps, cfg.warmup_steps, cfg.lr);
    opt.step(lr);
    model.clamp_temperature();

    StepLog row;
    row.step = step;
    row.l_clip = bd.l_clip;
    row.l_neg_g = bd.l_neg_g;
    row.l_neg_l = bd.l_neg_l;
    row.l_total = bd.l_total;
    row.lr = lr;
    row.inv_tau = std::exp(static_cast<double>(model.log_inv_tau().at(0)));
    log.push_back(row);
  }

  CheckpointMeta meta;
  meta.step = cfg.steps;
  meta.seed = cfg.seed;
  meta.config_digest = config_digest;
  TrainResult out{Checkpoint::from_model(model, meta), std::move(log)};
  return out;
}

}  // namespace fsc
