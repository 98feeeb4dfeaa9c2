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

// Command-line front end. Everything substantive happens behind the C API
// in libfsclab; this file only parses arguments, folds flag overrides into
// the JSON config (flags win), and maps statuses to exit codes:
// 0 success, 2 configuration problem, 3 runtime failure.

#include <cstdint>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "fsclab.h"

namespace {

using json = nlohmann::json;

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

struct Usage : std::runtime_error {
  using std::runtime_error::runtime_error;
};

json load_config(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path, std::ios::binary);
  if (!in.good()) throw Usage("cannot read config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  json j;
  try {
    j = json::parse(ss.str());
  } catch (const json::exception& e) {
    throw Usage("config is not valid JSON: " + std::string(e.what()));
  }
  if (!j.is_object()) throw Usage("config must be a flat JSON object");
  return j;
}

int finish(fsc_status st) {
  if (st == FSC_OK) return 0;
  std::cerr << "error: " << fsc_last_error() << "\n";
  return st == FSC_ERR_CONFIG ? kExitConfig : kExitRuntime;
}

const char* opt_path(const std::string& s) { return s.empty() ? nullptr : s.c_str(); }

void describe_checkpoint(const std::string& path) {
  fsc_checkpoint* ck = nullptr;
  if (fsc_checkpoint_open(path.c_str(), &ck) != FSC_OK) return;
  uint64_t digest = 0, count = 0;
  fsc_checkpoint_digest(ck, &digest);
  fsc_checkpoint_tensor_count(ck, &count);
  std::cout << path << ": " << count << " tensors, digest " << std::hex
            << std::setw(16) << std::setfill('0') << digest << std::dec << "\n";
  fsc_checkpoint_close(ck);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fsclab: a desk-scale laboratory for fine-tuning dual encoders\n"
               "with hard-negative losses and selective regularization"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "fsclab 0.1.0");
  app.footer("Config files are flat JSON; see include/fsclab.h for the key list.\n"
             "Flags override config values. FSC_LAB_THREADS caps worker threads.");

  std::string config_path;
  std::uint64_t seed = 0;

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "synthesize a training set and eval suites");
  std::string gen_out, gen_suites;
  std::size_t n_train = 0, n_eval = 0;
  gen->add_option("--out", gen_out, "dataset JSONL path")->required();
  gen->add_option("--suites", gen_suites, "eval suites JSONL path");
  auto* gn_train = gen->add_option("--n-train", n_train, "training scenes");
  auto* gn_eval = gen->add_option("--n-eval", n_eval, "items per eval suite");

  // gen-negatives
  auto* neg = app.add_subcommand("gen-negatives", "rule-based hard negatives per caption");
  std::string neg_data, neg_out;
  neg->add_option("--data", neg_data, "dataset JSONL input")->required();
  neg->add_option("--out", neg_out, "negatives JSONL path")->required();

  // train
  auto* tr = app.add_subcommand("train", "pretrain or fine-tune the dual encoder");
  std::string tr_data, tr_init, tr_out, tr_metrics, tr_phase;
  std::size_t tr_steps = 0, tr_batch = 0;
  double tr_lr = 0;
  tr->add_option("--data", tr_data, "dataset JSONL input")->required();
  tr->add_option("--init", tr_init, "initial checkpoint to fine-tune from");
  tr->add_option("--out", tr_out, "checkpoint output path")->required();
  tr->add_option("--metrics", tr_metrics, "per-step metrics CSV path");
  auto* tr_phase_o = tr->add_option("--phase", tr_phase, "pretrain_contrastive or finetune");
  auto* tr_steps_o = tr->add_option("--steps", tr_steps, "optimizer steps");
  auto* tr_batch_o = tr->add_option("--batch-size", tr_batch, "items per batch");
  auto* tr_lr_o = tr->add_option("--lr", tr_lr, "peak learning rate");

  // eval
  auto* ev = app.add_subcommand("eval", "score a checkpoint on the eval suites");
  std::string ev_ckpt, ev_suites, ev_out, ev_csv;
  ev->add_option("--ckpt", ev_ckpt, "checkpoint to evaluate")->required();
  ev->add_option("--suites", ev_suites, "eval suites JSONL")->required();
  ev->add_option("--out", ev_out, "report JSON path")->required();
  ev->add_option("--csv", ev_csv, "also write a one-row CSV");

  // merge
  auto* mg = app.add_subcommand("merge", "interpolate two checkpoints");
  std::string mg_pre, mg_ft, mg_out;
  double mg_alpha = 0.5;
  mg->add_option("--pre", mg_pre, "pretrained checkpoint")->required();
  mg->add_option("--ft", mg_ft, "fine-tuned checkpoint")->required();
  mg->add_option("--alpha", mg_alpha, "mixing weight toward --ft")->required();
  mg->add_option("--out", mg_out, "merged checkpoint path")->required();

  // plot-data
  auto* pl = app.add_subcommand("plot-data", "metric trajectory across interpolation weights");
  std::string pl_pre, pl_ft, pl_suites, pl_out;
  pl->add_option("--pre", pl_pre, "pretrained checkpoint")->required();
  pl->add_option("--ft", pl_ft, "fine-tuned checkpoint")->required();
  pl->add_option("--suites", pl_suites, "eval suites JSONL")->required();
  pl->add_option("--out", pl_out, "trajectory CSV path")->required();

  // --config/--seed belong to every config-consuming subcommand; merge takes
  // no config. Only one subcommand parses per invocation, so the shared
  // variables cannot collide.
  bool seed_given = false;
  for (auto* sub : {gen, neg, tr, ev, pl}) {
    sub->add_option("--config", config_path, "JSON config file");
    sub->add_option("--seed", seed, "override the run seed")
        ->each([&seed_given](const std::string&) { seed_given = true; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;  // --help and --version succeed
  }

  std::string cfg_text;
  try {
    json cfg = load_config(config_path);
    if (seed_given) cfg["seed"] = seed;
    if (*gn_train) cfg["n_train"] = n_train;
    if (*gn_eval) cfg["n_eval"] = n_eval;
    if (*tr_phase_o) cfg["phase"] = tr_phase;
    if (*tr_steps_o) cfg["steps"] = tr_steps;
    if (*tr_batch_o) cfg["batch_size"] = tr_batch;
    if (*tr_lr_o) cfg["lr"] = tr_lr;
    cfg_text = cfg.dump();
  } catch (const Usage& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }

  if (gen->parsed()) {
    int rc = finish(fsc_gen_data(cfg_text.c_str(), gen_out.c_str(), opt_path(gen_suites)));
    if (rc == 0) {
      std::cout << "wrote " << gen_out;
      if (!gen_suites.empty()) std::cout << " and " << gen_suites;
      std::cout << "\n";
    }
    return rc;
  }
  if (neg->parsed()) {
    int rc = finish(fsc_gen_negatives(cfg_text.c_str(), neg_data.c_str(), neg_out.c_str()));
    if (rc == 0) std::cout << "wrote " << neg_out << "\n";
    return rc;
  }
  if (tr->parsed()) {
    int rc = finish(fsc_train(cfg_text.c_str(), tr_data.c_str(), opt_path(tr_init),
                              tr_out.c_str(), opt_path(tr_metrics)));
    if (rc == 0) describe_checkpoint(tr_out);
    return rc;
  }
  if (ev->parsed()) {
    int rc = finish(fsc_eval(cfg_text.c_str(), ev_ckpt.c_str(), ev_suites.c_str(),
                             ev_out.c_str(), opt_path(ev_csv)));
    if (rc == 0) std::cout << "wrote " << ev_out << "\n";
    return rc;
  }
  if (mg->parsed()) {
    int rc = finish(fsc_merge(mg_pre.c_str(), mg_ft.c_str(), mg_alpha, mg_out.c_str()));
    if (rc == 0) describe_checkpoint(mg_out);
    return rc;
  }
  int rc = finish(fsc_plot_data(cfg_text.c_str(), pl_pre.c_str(), pl_ft.c_str(),
                                pl_suites.c_str(), pl_out.c_str()));
  if (rc == 0) std::cout << "wrote " << pl_out << "\n";
  return rc;
}
