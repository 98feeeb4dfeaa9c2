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

#include "fsc/eval.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "json.hpp"

#include "fsc/util.hpp"

namespace fsc {
namespace {

using json = nlohmann::json;

// Unit global embeddings for a caption list with one encode per distinct
// caption; text_fn maps a caption to its embedding vector.
template <typename EncodeFn>
std::vector<std::vector<float>> embed_unique(const std::vector<std::string>& caps,
                                             EncodeFn&& text_fn) {
  std::map<std::string, std::size_t> uniq;
  std::vector<const std::string*> order;
  for (const auto& c : caps)
    if (uniq.emplace(c, uniq.size()).second) order.push_back(&c);
  std::vector<std::vector<float>> emb(order.size());
  parallel_for(order.size(), [&](std::size_t i) { emb[i] = text_fn(*order[i]); });
  std::vector<std::vector<float>> out(caps.size());
  for (std::size_t i = 0; i < caps.size(); ++i) out[i] = emb[uniq.at(caps[i])];
  return out;
}

std::vector<std::vector<double>> pair_scores(const std::vector<std::vector<float>>& vg,
                                             const std::vector<std::vector<float>>& tg,
                                             double inv_tau) {
  std::vector<std::vector<double>> s(vg.size(), std::vector<double>(tg.size()));
  parallel_for(vg.size(), [&](std::size_t i) {
    for (std::size_t j = 0; j < tg.size(); ++j) {
      double acc = 0;
      for (std::size_t c = 0; c < vg[i].size(); ++c)
        acc += static_cast<double>(vg[i][c]) * static_cast<double>(tg[j][c]);
      s[i][j] = std::exp(acc * inv_tau);
    }
  });
  return s;
}

}  // namespace

Scorer model_scorer(const DualEncoder<float>& model, const Vocabulary& vocab,
                    double sigma) {
  const DualEncoder<float>* m = &model;
  const Vocabulary* v = &vocab;
  return [m, v, sigma](const std::vector<ImageRef>& imgs,
                       const std::vector<std::string>& caps) {
    const double inv_tau = std::exp(static_cast<double>(m->log_inv_tau().at(0)));
    std::vector<std::vector<float>> vg(imgs.size());
    parallel_for(imgs.size(), [&](std::size_t i) {
      vg[i] = m->encode_image(render(imgs[i].scene, imgs[i].noise_seed, sigma)).v.value();
    });
    auto tg = embed_unique(caps, [&](const std::string& c) {
      return m->encode_text(v->encode(c), v->eos_id()).t.value();
    });
    return pair_scores(vg, tg, inv_tau);
  };
}

Scorer local_scorer(const DualEncoder<float>& model, const Vocabulary& vocab,
                    double sigma, NormMode mode) {
  const DualEncoder<float>* m = &model;
  const Vocabulary* v = &vocab;
  return [m, v, sigma, mode](const std::vector<ImageRef>& imgs,
                             const std::vector<std::string>& caps) {
    auto inv_tau = m->log_inv_tau();
    auto it = exp(inv_tau);
    std::vector<EncodedImage<float>> enc_i(imgs.size());
    parallel_for(imgs.size(), [&](std::size_t i) {
      enc_i[i] = m->encode_image(render(imgs[i].scene, imgs[i].noise_seed, sigma));
    });
    std::map<std::string, std::size_t> uniq;
    std::vector<const std::string*> order;
    for (const auto& c : caps)
      if (uniq.emplace(c, uniq.size()).second) order.push_back(&c);
    std::vector<EncodedText<float>> enc_t(order.size());
    parallel_for(order.size(), [&](std::size_t i) {
      enc_t[i] = m->encode_text(v->encode(*order[i]), v->eos_id());
    });
    std::vector<std::vector<double>> s(imgs.size(), std::vector<double>(caps.size()));
    parallel_for(imgs.size(), [&](std::size_t i) {
      for (std::size_t j = 0; j < caps.size(); ++j) {
        const auto& txt = enc_t[uniq.at(caps[j])];
        s[i][j] = static_cast<double>(
            local_similarity(enc_i[i].V, txt, it, mode).item());
      }
    });
    return s;
  };
}

double eval_comp_i2t(const Scorer& scorer, const std::vector<CompI2TItem>& suite) {
  if (suite.empty()) fail(ErrorCode::EmptySuite, "comp_i2t suite is empty");
  std::vector<ImageRef> imgs;
  std::vector<std::string> caps;
  for (const auto& it : suite) {
    imgs.push_back({it.scene, it.noise_seed});
    caps.push_back(it.caption);
    caps.push_back(it.negative);
  }
  auto s = scorer(imgs, caps);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < suite.size(); ++i)
    if (s[i][2 * i] > s[i][2 * i + 1]) ++hits;
  return static_cast<double>(hits) / static_cast<double>(suite.size());
}

double eval_group(const Scorer& scorer, const std::vector<CompGroupItem>& suite) {
  if (suite.empty()) fail(ErrorCode::EmptySuite, "comp_group suite is empty");
  std::vector<ImageRef> imgs;
  std::vector<std::string> caps;
  for (const auto& it : suite) {
    imgs.push_back({it.scene_a, it.noise_seed_a});
    imgs.push_back({it.scene_b, it.noise_seed_b});
    caps.push_back(it.caption_a);
    caps.push_back(it.caption_b);
  }
  auto s = scorer(imgs, caps);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < suite.size(); ++i) {
    const double aa = s[2 * i][2 * i], ab = s[2 * i][2 * i + 1];
    const double ba = s[2 * i + 1][2 * i], bb = s[2 * i + 1][2 * i + 1];
    // both text choices and both image choices must be strictly right
    if (aa > ab && bb > ba && aa > ba && bb > ab) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(suite.size());
}

RetrievalReport eval_retrieval(const Scorer& scorer,
                               const std::vector<RetrievalItem>& suite,
                               const std::vector<std::size_t>& ks) {
  if (suite.empty()) fail(ErrorCode::EmptySuite, "retrieval suite is empty");
  if (ks.empty()) fail(ErrorCode::ConfigError, "retrieval needs at least one k");
  const std::size_t n = suite.size();
  for (std::size_t k : ks) {
    if (k == 0) fail(ErrorCode::ConfigError, "retrieval k must be positive");
    if (k > n)
      fail(ErrorCode::KTooLarge, "k = " + std::to_string(k) + " exceeds suite size " +
                                     std::to_string(n));
  }
  std::vector<ImageRef> imgs;
  std::vector<std::string> caps;
  for (const auto& it : suite) {
    imgs.push_back({it.scene, it.noise_seed});
    caps.push_back(it.caption);
  }
  auto s = scorer(imgs, caps);

  // rank of the true match under descending score with index tie-break
  std::vector<std::size_t> rank_i2t(n), rank_t2i(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t r = 1;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      if (s[i][j] > s[i][i] || (s[i][j] == s[i][i] && j < i)) ++r;
    }
    rank_i2t[i] = r;
  }
  for (std::size_t j = 0; j < n; ++j) {
    std::size_t r = 1;
    for (std::size_t i = 0; i < n; ++i) {
      if (i == j) continue;
      if (s[i][j] > s[j][j] || (s[i][j] == s[j][j] && i < j)) ++r;
    }
    rank_t2i[j] = r;
  }

  RetrievalReport out;
  for (std::size_t k : ks) {
    std::size_t hi = 0, ht = 0;
    for (std::size_t q = 0; q < n; ++q) {
      if (rank_i2t[q] <= k) ++hi;
      if (rank_t2i[q] <= k) ++ht;
    }
    out.i2t[k] = static_cast<double>(hi) / static_cast<double>(n);
    out.t2i[k] = static_cast<double>(ht) / static_cast<double>(n);
  }
  return out;
}

std::vector<ZsPrompt> default_zs_prompts() {
  std::vector<ZsPrompt> out;
  for (std::size_t c = 0; c < kNumColors; ++c)
    for (std::size_t sh = 0; sh < kNumShapes; ++sh) {
      ZsPrompt p;
      p.color = static_cast<ObjectColor>(c);
      p.shape = static_cast<ObjectShape>(sh);
      p.prompt = std::string("a photo of a ") + color_name(p.color) + " " +
                 shape_name(p.shape);
      out.push_back(std::move(p));
    }
  return out;
}

double eval_zs(const Scorer& scorer, const std::vector<ZsItem>& suite,
               const std::vector<ZsPrompt>& prompts) {
  if (suite.empty()) fail(ErrorCode::EmptySuite, "zero-shot suite is empty");
  if (prompts.empty()) fail(ErrorCode::ConfigError, "zero-shot needs prompts");
  std::vector<bool> covered(kNumColors * kNumShapes, false);
  for (const auto& p : prompts) {
    std::size_t cls = zs_class_index(p.color, p.shape);
    if (covered[cls])
      fail(ErrorCode::DuplicateClass,
           std::string("two prompts map to class ") + color_name(p.color) + " " +
               shape_name(p.shape));
    covered[cls] = true;
  }
  for (const auto& it : suite)
    if (!covered[zs_class_index(it.color, it.shape)])
      fail(ErrorCode::ConfigError, std::string("suite class without a prompt: ") +
                                       color_name(it.color) + " " + shape_name(it.shape));

  std::vector<ImageRef> imgs;
  for (const auto& it : suite) imgs.push_back({it.scene, it.noise_seed});
  std::vector<std::string> caps;
  for (const auto& p : prompts) caps.push_back(p.prompt);
  auto s = scorer(imgs, caps);

  std::size_t hits = 0;
  for (std::size_t i = 0; i < suite.size(); ++i) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < prompts.size(); ++j)
      if (s[i][j] > s[i][best]) best = j;
    bool tied = false;
    for (std::size_t j = 0; j < prompts.size(); ++j)
      if (j != best && s[i][j] == s[i][best]) tied = true;
    if (tied) continue;
    if (zs_class_index(prompts[best].color, prompts[best].shape) ==
        zs_class_index(suite[i].color, suite[i].shape))
      ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(suite.size());
}

MetricReport evaluate_all(const Scorer& scorer, const EvalSuites& suites) {
  MetricReport r;
  r.comp_i2t_acc = eval_comp_i2t(scorer, suites.comp_i2t);
  r.comp_group_acc = eval_group(scorer, suites.comp_group);
  r.zs_acc = eval_zs(scorer, suites.zs, default_zs_prompts());
  auto ret = eval_retrieval(scorer, suites.retrieval, {1, 5});
  r.i2t_r1 = ret.i2t.at(1);
  r.i2t_r5 = ret.i2t.at(5);
  r.t2i_r1 = ret.t2i.at(1);
  r.t2i_r5 = ret.t2i.at(5);
  return r;
}

std::string report_to_json(const MetricReport& r) {
  json j{{"comp_i2t_acc", r.comp_i2t_acc},
         {"comp_group_acc", r.comp_group_acc},
         {"zs_acc", r.zs_acc},
         {"i2t_r1", r.i2t_r1},
         {"i2t_r5", r.i2t_r5},
         {"t2i_r1", r.t2i_r1},
         {"t2i_r5", r.t2i_r5},
         {"meta",
          {{"Comp", r.comp()}, {"ZS", r.zs()}, {"I2T_Ret", r.i2t_ret()}, {"T2I_Ret", r.t2i_ret()}}}};
  return j.dump(2) + "\n";
}

MetricReport report_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorCode::ConfigError, std::string("bad report JSON: ") + e.what());
  }
  MetricReport r;
  try {
    r.comp_i2t_acc = j.at("comp_i2t_acc").get<double>();
    r.comp_group_acc = j.at("comp_group_acc").get<double>();
    r.zs_acc = j.at("zs_acc").get<double>();
    r.i2t_r1 = j.at("i2t_r1").get<double>();
    r.i2t_r5 = j.at("i2t_r5").get<double>();
    r.t2i_r1 = j.at("t2i_r1").get<double>();
    r.t2i_r5 = j.at("t2i_r5").get<double>();
  } catch (const json::exception& e) {
    fail(ErrorCode::ConfigError, std::string("bad report JSON: ") + e.what());
  }
  return r;
}

std::string report_to_csv(const MetricReport& r) {
  std::ostringstream out;
  out << "comp_i2t_acc,comp_group_acc,zs_acc,i2t_r1,i2t_r5,t2i_r1,t2i_r5,"
         "Comp,ZS,I2T_Ret,T2I_Ret\n";
  out << std::setprecision(10);
  out << r.comp_i2t_acc << ',' << r.comp_group_acc << ',' << r.zs_acc << ',' << r.i2t_r1
      << ',' << r.i2t_r5 << ',' << r.t2i_r1 << ',' << r.t2i_r5 << ',' << r.comp() << ','
      << r.zs() << ',' << r.i2t_ret() << ',' << r.t2i_ret() << '\n';
  return out.str();
}

}  // namespace fsc
