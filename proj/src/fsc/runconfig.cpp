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

#include "fsc/runconfig.hpp"

#include <functional>
#include <map>

#include "json.hpp"

#include "fsc/objective.hpp"
#include "fsc/util.hpp"

namespace fsc {
namespace {

using json = nlohmann::json;

template <typename T>
T get_number(const json& v, const std::string& key) {
  if constexpr (std::is_same_v<T, double>) {
    if (!v.is_number()) fail(ErrorCode::ConfigError, "config key " + key + " must be a number");
    return v.get<double>();
  } else {
    if (!v.is_number_unsigned())
      fail(ErrorCode::ConfigError, "config key " + key + " must be a non-negative integer");
    return v.get<T>();
  }
}

}  // namespace

RunConfig parse_run_config(const std::string& json_text) {
  RunConfig cfg;
  json j = json::object();
  if (!json_text.empty()) {
    try {
      j = json::parse(json_text);
    } catch (const json::exception& e) {
      fail(ErrorCode::ConfigError, std::string("config is not valid JSON: ") + e.what());
    }
  }
  if (!j.is_object()) fail(ErrorCode::ConfigError, "config must be a flat JSON object");

  std::map<std::string, std::function<void(const json&)>> setters;
  auto size_key = [&](const char* k, std::size_t& field) {
    setters[k] = [&field, k](const json& v) { field = get_number<std::size_t>(v, k); };
  };
  auto u64_key = [&](const char* k, std::uint64_t& field) {
    setters[k] = [&field, k](const json& v) { field = get_number<std::uint64_t>(v, k); };
  };
  auto double_key = [&](const char* k, double& field) {
    setters[k] = [&field, k](const json& v) { field = get_number<double>(v, k); };
  };
  auto string_key = [&](const char* k, auto&& apply) {
    setters[k] = [apply, k](const json& v) {
      if (!v.is_string()) fail(ErrorCode::ConfigError, std::string("config key ") + k + " must be a string");
      apply(v.get<std::string>());
    };
  };

  size_key("d", cfg.encoder.d);
  size_key("layers", cfg.encoder.layers);
  size_key("heads", cfg.encoder.heads);
  size_key("d_in", cfg.encoder.d_in);
  size_key("w_max", cfg.encoder.w_max);
  size_key("grid", cfg.encoder.grid);
  size_key("batch_size", cfg.train.batch_size);
  size_key("steps", cfg.train.steps);
  size_key("warmup_steps", cfg.train.warmup_steps);
  size_key("n_train", cfg.n_train);
  size_key("n_eval", cfg.n_eval);
  u64_key("seed", cfg.train.seed);
  double_key("lr", cfg.train.lr);
  double_key("weight_decay", cfg.train.weight_decay);
  double_key("beta1", cfg.train.beta1);
  double_key("beta2", cfg.train.beta2);
  double_key("sigma", cfg.train.sigma);
  double_key("lambda_g", cfg.train.loss.lambda_g);
  double_key("lambda_l", cfg.train.loss.lambda_l);
  double_key("gamma", cfg.train.loss.gamma);
  double_key("beta", cfg.train.loss.beta);
  double_key("temperature_init", cfg.train.loss.temperature_init);
  string_key("phase", [&cfg](const std::string& s) { cfg.train.phase = parse_phase(s); });
  string_key("norm_mode",
             [&cfg](const std::string& s) { cfg.train.loss.norm_mode = parse_norm_mode(s); });
  string_key("lexicon", [&cfg](const std::string& s) { cfg.lexicon = s; });

  for (const auto& [key, value] : j.items()) {
    auto it = setters.find(key);
    if (it == setters.end()) fail(ErrorCode::ConfigError, "unknown config key: " + key);
    it->second(value);
  }
  // Contrastive pretraining has no hard-negative term, so the phase default
  // for the loss weights is zero; an explicit nonzero weight is still a
  // configuration error caught by TrainConfig::validate.
  if (cfg.train.phase == TrainPhase::PretrainContrastive) {
    if (!j.contains("lambda_g")) cfg.train.loss.lambda_g = 0;
    if (!j.contains("lambda_l")) cfg.train.loss.lambda_l = 0;
  }
  return cfg;
}

std::string run_config_to_json(const RunConfig& cfg) {
  json j{{"d", cfg.encoder.d},
         {"layers", cfg.encoder.layers},
         {"heads", cfg.encoder.heads},
         {"d_in", cfg.encoder.d_in},
         {"w_max", cfg.encoder.w_max},
         {"grid", cfg.encoder.grid},
         {"phase", phase_name(cfg.train.phase)},
         {"batch_size", cfg.train.batch_size},
         {"steps", cfg.train.steps},
         {"lr", cfg.train.lr},
         {"warmup_steps", cfg.train.warmup_steps},
         {"weight_decay", cfg.train.weight_decay},
         {"beta1", cfg.train.beta1},
         {"beta2", cfg.train.beta2},
         {"seed", cfg.train.seed},
         {"sigma", cfg.train.sigma},
         {"lambda_g", cfg.train.loss.lambda_g},
         {"lambda_l", cfg.train.loss.lambda_l},
         {"gamma", cfg.train.loss.gamma},
         {"beta", cfg.train.loss.beta},
         {"norm_mode", norm_mode_name(cfg.train.loss.norm_mode)},
         {"temperature_init", cfg.train.loss.temperature_init},
         {"n_train", cfg.n_train},
         {"n_eval", cfg.n_eval},
         {"lexicon", cfg.lexicon}};
  return j.dump(2) + "\n";
}

Lexicon load_lexicon(const RunConfig& cfg) {
  if (cfg.lexicon.empty()) return Lexicon::builtin();
  return Lexicon::from_file(cfg.lexicon);
}

std::uint64_t model_config_digest(const RunConfig& cfg, const Lexicon& lex) {
  // canonical lexicon content, independent of file comments and ordering
  std::string canon;
  for (const auto& w : lex.words()) {
    const auto& e = lex.at(w);
    canon += w;
    canon += '\t';
    canon += pos_name(e.pos);
    canon += '\t';
    for (std::size_t i = 0; i < e.alternatives.size(); ++i) {
      if (i) canon += ',';
      canon += e.alternatives[i];
    }
    canon += '\n';
  }
  json j{{"d", cfg.encoder.d},
         {"layers", cfg.encoder.layers},
         {"heads", cfg.encoder.heads},
         {"d_in", cfg.encoder.d_in},
         {"w_max", cfg.encoder.w_max},
         {"grid", cfg.encoder.grid},
         {"vocab_size", Vocabulary(lex).size()},
         {"lexicon_fnv", fnv1a64(canon)}};
  return fnv1a64(j.dump());
}

}  // namespace fsc
