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

// Evaluation harness over the synthetic suites: compositional selection,
// group matching, zero-shot classification, and retrieval R@k. Metrics are
// rank-based, so they are invariant under any strictly monotone transform
// of the scores. Ties count as failures everywhere except retrieval, which
// breaks ties by index for a stable ordering.

#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "fsc/encoder.hpp"
#include "fsc/lexicon.hpp"
#include "fsc/objective.hpp"
#include "fsc/scene.hpp"

namespace fsc {

struct ImageRef {
  SceneSpec scene;
  std::uint64_t noise_seed = 0;
};

// Batch scorer: similarity for every (image, caption) pair as a row-major
// [n_images][n_captions] matrix. The harness never interprets magnitudes,
// only comparisons.
using Scorer = std::function<std::vector<std::vector<double>>(
    const std::vector<ImageRef>&, const std::vector<std::string>&)>;

// Global-similarity scorer S_g = exp(cos(v, t) / tau) over a trained model.
// Captures model and vocab by reference; both must outlive the scorer.
// Encodes each image and each distinct caption once, in parallel.
Scorer model_scorer(const DualEncoder<float>& model, const Vocabulary& vocab,
                    double sigma);

// Diagnostic scorer using the token-to-patch local similarity instead of
// the pooled global one. Not used by the standard report.
Scorer local_scorer(const DualEncoder<float>& model, const Vocabulary& vocab,
                    double sigma, NormMode mode);

// Fraction of items whose true caption strictly outscores the negative.
double eval_comp_i2t(const Scorer& scorer, const std::vector<CompI2TItem>& suite);

// Fraction of 2x2 groups where both images strictly prefer their own
// caption and both captions strictly prefer their own image.
double eval_group(const Scorer& scorer, const std::vector<CompGroupItem>& suite);

struct RetrievalReport {
  std::map<std::size_t, double> i2t, t2i;  // k -> R@k
};

// R@k in both directions; the true match of image i is caption i. Requires
// every k in [1, n]; throws KTooLarge past n.
RetrievalReport eval_retrieval(const Scorer& scorer,
                               const std::vector<RetrievalItem>& suite,
                               const std::vector<std::size_t>& ks = {1, 5});

struct ZsPrompt {
  ObjectColor color = ObjectColor::Red;
  ObjectShape shape = ObjectShape::Circle;
  std::string prompt;
};

// "a photo of a {color} {shape}" for all twelve classes.
std::vector<ZsPrompt> default_zs_prompts();

// Classify each image by the argmax prompt; accuracy over the suite.
// Throws DuplicateClass when two prompts share a class and ConfigError when
// a class present in the suite has no prompt.
double eval_zs(const Scorer& scorer, const std::vector<ZsItem>& suite,
               const std::vector<ZsPrompt>& prompts);

struct MetricReport {
  double comp_i2t_acc = 0, comp_group_acc = 0, zs_acc = 0;
  double i2t_r1 = 0, i2t_r5 = 0, t2i_r1 = 0, t2i_r5 = 0;

  // Meta-averages: plain arithmetic means of their constituents.
  double comp() const { return 0.5 * (comp_i2t_acc + comp_group_acc); }
  double zs() const { return zs_acc; }
  double i2t_ret() const { return i2t_r1; }
  double t2i_ret() const { return t2i_r1; }
};

MetricReport evaluate_all(const Scorer& scorer, const EvalSuites& suites);

std::string report_to_json(const MetricReport& r);
MetricReport report_from_json(const std::string& text);  // ConfigError
std::string report_to_csv(const MetricReport& r);        // header + one row

}  // namespace fsc
