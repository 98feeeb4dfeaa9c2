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

#include "fsclab.h"

#include <cstdlib>
#include <cstring>
#include <sstream>
#include <string>

#include "json.hpp"

#include "fsc/checkpoint.hpp"
#include "fsc/eval.hpp"
#include "fsc/hardneg.hpp"
#include "fsc/runconfig.hpp"
#include "fsc/scene.hpp"
#include "fsc/trainer.hpp"
#include "fsc/util.hpp"

namespace {

using fsc::Error;
using fsc::ErrorCode;
using json = nlohmann::json;

thread_local std::string g_last_error = "ok";

fsc_status to_status(const Error& e) {
  switch (e.code()) {
    case ErrorCode::ConfigError:
    case ErrorCode::BatchTooSmall:
    case ErrorCode::DuplicateClass:
    case ErrorCode::KTooLarge:
      return FSC_ERR_CONFIG;
    case ErrorCode::IoError:
      return FSC_ERR_IO;
    case ErrorCode::CorruptFile:
      return FSC_ERR_CORRUPT;
    default:
      return FSC_ERR_RUNTIME;
  }
}

template <typename Fn>
fsc_status guarded(Fn&& fn) {
  try {
    fn();
    return FSC_OK;
  } catch (const Error& e) {
    g_last_error = e.what();
    return to_status(e);
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return FSC_ERR_RUNTIME;
  } catch (...) {
    g_last_error = "unknown failure";
    return FSC_ERR_RUNTIME;
  }
}

void require(bool cond, const char* msg) {
  if (!cond) fsc::fail(ErrorCode::ConfigError, msg);
}

std::string opt(const char* s) { return s ? std::string(s) : std::string(); }

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out) std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

}  // namespace

struct fsc_checkpoint {
  fsc::Checkpoint cp;
};

extern "C" {

const char* fsc_last_error(void) { return g_last_error.c_str(); }

void fsc_string_free(char* s) { std::free(s); }

fsc_status fsc_gen_data(const char* config_json, const char* dataset_out,
                        const char* suites_out) {
  return guarded([&] {
    require(dataset_out != nullptr, "gen-data needs a dataset output path");
    auto cfg = fsc::parse_run_config(opt(config_json));
    require(cfg.n_train > 0, "n_train must be positive");
    auto data = fsc::generate_train_set(cfg.n_train, cfg.train.seed, cfg.encoder.grid);
    fsc::atomic_write_file(dataset_out, fsc::dataset_to_jsonl(data));
    if (suites_out) {
      require(cfg.n_eval > 0, "n_eval must be positive");
      auto suites = fsc::make_eval_suites(cfg.n_eval, cfg.train.seed, cfg.encoder.grid);
      fsc::atomic_write_file(suites_out, fsc::suites_to_jsonl(suites));
    }
  });
}

fsc_status fsc_gen_negatives(const char* config_json, const char* dataset_in,
                             const char* out_path) {
  return guarded([&] {
    require(dataset_in != nullptr && out_path != nullptr,
            "gen-negatives needs dataset input and output paths");
    auto cfg = fsc::parse_run_config(opt(config_json));
    auto lex = fsc::load_lexicon(cfg);
    auto data = fsc::dataset_from_jsonl(fsc::read_file(dataset_in));
    std::ostringstream out;
    for (std::size_t i = 0; i < data.size(); ++i) {
      auto set = fsc::generate_set(
          data[i].caption, lex,
          fsc::StepSeed{cfg.train.seed, static_cast<std::uint64_t>(i), 0});
      json rec{{"caption", set.original},
               {"negatives",
                {set.negatives[0], set.negatives[1], set.negatives[2]}},
               {"valid", {set.valid[0], set.valid[1], set.valid[2]}}};
      out << rec.dump() << '\n';
    }
    fsc::atomic_write_file(out_path, out.str());
  });
}

fsc_status fsc_train(const char* config_json, const char* dataset_in,
                     const char* init_ckpt, const char* ckpt_out,
                     const char* metrics_out) {
  return guarded([&] {
    require(dataset_in != nullptr && ckpt_out != nullptr,
            "train needs a dataset input and a checkpoint output path");
    auto cfg = fsc::parse_run_config(opt(config_json));
    auto lex = fsc::load_lexicon(cfg);
    auto data = fsc::dataset_from_jsonl(fsc::read_file(dataset_in));
    const std::uint64_t digest = fsc::model_config_digest(cfg, lex);

    fsc::Checkpoint init;
    const fsc::Checkpoint* init_ptr = nullptr;
    if (init_ckpt) {
      init = fsc::Checkpoint::load(init_ckpt);
      init.verify_config(digest);
      init_ptr = &init;
    }

    auto result = fsc::train(data, cfg.encoder, cfg.train, lex, init_ptr, digest);
    result.checkpoint.save(ckpt_out);
    if (metrics_out) fsc::atomic_write_file(metrics_out, fsc::metrics_to_csv(result.log));
  });
}

fsc_status fsc_eval(const char* config_json, const char* ckpt_in,
                    const char* suites_in, const char* json_out, const char* csv_out) {
  return guarded([&] {
    require(ckpt_in != nullptr && suites_in != nullptr && json_out != nullptr,
            "eval needs checkpoint, suites, and report output paths");
    auto cfg = fsc::parse_run_config(opt(config_json));
    auto lex = fsc::load_lexicon(cfg);
    auto ckpt = fsc::Checkpoint::load(ckpt_in);
    ckpt.verify_config(fsc::model_config_digest(cfg, lex));

    auto model = fsc::make_model(cfg.encoder, lex, cfg.train.loss.temperature_init);
    ckpt.load_into(model);
    fsc::Vocabulary vocab(lex);
    auto scorer = fsc::model_scorer(model, vocab, cfg.train.sigma);
    auto suites = fsc::suites_from_jsonl(fsc::read_file(suites_in));
    auto report = fsc::evaluate_all(scorer, suites);
    fsc::atomic_write_file(json_out, fsc::report_to_json(report));
    if (csv_out) fsc::atomic_write_file(csv_out, fsc::report_to_csv(report));
  });
}

fsc_status fsc_merge(const char* pre_in, const char* ft_in, double alpha,
                     const char* ckpt_out) {
  return guarded([&] {
    require(pre_in != nullptr && ft_in != nullptr && ckpt_out != nullptr,
            "merge needs two input checkpoints and an output path");
    auto pre = fsc::Checkpoint::load(pre_in);
    auto ft = fsc::Checkpoint::load(ft_in);
    fsc::wise_ft_interpolate(pre, ft, alpha).save(ckpt_out);
  });
}

fsc_status fsc_plot_data(const char* config_json, const char* pre_in,
                         const char* ft_in, const char* suites_in,
                         const char* csv_out) {
  return guarded([&] {
    require(pre_in != nullptr && ft_in != nullptr && suites_in != nullptr &&
                csv_out != nullptr,
            "plot-data needs two checkpoints, suites, and an output path");
    auto cfg = fsc::parse_run_config(opt(config_json));
    auto lex = fsc::load_lexicon(cfg);
    const std::uint64_t digest = fsc::model_config_digest(cfg, lex);
    auto pre = fsc::Checkpoint::load(pre_in);
    auto ft = fsc::Checkpoint::load(ft_in);
    pre.verify_config(digest);
    ft.verify_config(digest);
    auto suites = fsc::suites_from_jsonl(fsc::read_file(suites_in));
    fsc::Vocabulary vocab(lex);

    std::ostringstream out;
    out << "alpha,Comp,ZS\n";
    out.precision(10);
    for (int i = 0; i <= 10; ++i) {
      const double alpha = static_cast<double>(i) / 10.0;
      auto merged = fsc::wise_ft_interpolate(pre, ft, alpha);
      auto model = fsc::make_model(cfg.encoder, lex, cfg.train.loss.temperature_init);
      merged.load_into(model);
      auto scorer = fsc::model_scorer(model, vocab, cfg.train.sigma);
      const double comp = 0.5 * (fsc::eval_comp_i2t(scorer, suites.comp_i2t) +
                                 fsc::eval_group(scorer, suites.comp_group));
      const double zs = fsc::eval_zs(scorer, suites.zs, fsc::default_zs_prompts());
      out << alpha << ',' << comp << ',' << zs << '\n';
    }
    fsc::atomic_write_file(csv_out, out.str());
  });
}

fsc_status fsc_checkpoint_open(const char* path, fsc_checkpoint** out) {
  return guarded([&] {
    require(path != nullptr && out != nullptr, "checkpoint open needs a path and a handle");
    *out = nullptr;
    auto handle = new fsc_checkpoint{fsc::Checkpoint::load(path)};
    *out = handle;
  });
}

void fsc_checkpoint_close(fsc_checkpoint* ckpt) { delete ckpt; }

fsc_status fsc_checkpoint_digest(const fsc_checkpoint* ckpt, uint64_t* out) {
  return guarded([&] {
    require(ckpt != nullptr && out != nullptr, "checkpoint digest needs a handle and output");
    *out = ckpt->cp.digest();
  });
}

fsc_status fsc_checkpoint_meta_json(const fsc_checkpoint* ckpt, char** out) {
  return guarded([&] {
    require(ckpt != nullptr && out != nullptr, "checkpoint meta needs a handle and output");
    const auto& m = ckpt->cp.meta;
    json j{{"step", m.step},
           {"seed", m.seed},
           {"temperature", m.temperature},
           {"config_digest", m.config_digest}};
    if (m.alpha) j["alpha"] = *m.alpha;
    *out = dup_string(j.dump(2) + "\n");
    if (!*out) fsc::fail(ErrorCode::IoError, "out of memory");
  });
}

fsc_status fsc_checkpoint_tensor_count(const fsc_checkpoint* ckpt, uint64_t* out) {
  return guarded([&] {
    require(ckpt != nullptr && out != nullptr, "checkpoint tensor count needs a handle and output");
    *out = ckpt->cp.tensors().size();
  });
}

}  // extern "C"
