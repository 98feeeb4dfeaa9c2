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

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fsc/tensor.hpp"

namespace fsc {

inline constexpr std::size_t kNumShapes = 3;
inline constexpr std::size_t kNumColors = 4;
// one-hot(shape) + one-hot(color) + normalized (row, col)
inline constexpr std::size_t kFeatureDim = kNumShapes + kNumColors + 2;

enum class ObjectShape : std::uint8_t { Circle, Square, Triangle };
enum class ObjectColor : std::uint8_t { Red, Blue, Green, Yellow };
enum class Relation : std::uint8_t { LeftOf, RightOf, Above, Below };

const char* shape_name(ObjectShape s);
const char* color_name(ObjectColor c);
const char* relation_name(Relation r);    // snake_case token for serialization
const char* relation_phrase(Relation r);  // caption spelling, e.g. "left of"
ObjectShape parse_shape(const std::string& s);
ObjectColor parse_color(const std::string& s);
Relation parse_relation(const std::string& s);

struct SceneObject {
  ObjectShape shape = ObjectShape::Circle;
  ObjectColor color = ObjectColor::Red;
  std::size_t row = 0;
  std::size_t col = 0;
};

// 1-3 colored shapes on a G x G grid; an optional spatial relation between
// the first two objects (row 0 is the top row).
struct SceneSpec {
  std::size_t grid = 4;
  std::vector<SceneObject> objects;
  std::optional<Relation> relation;
};

// Throws ConfigError for structural violations (object count, cells off the
// grid, relation without two objects, relation inconsistent with the cells)
// and CellCollision for two objects on one cell.
void validate_scene(const SceneSpec& scene);

bool relation_holds(Relation r, const SceneObject& a, const SceneObject& b);

// Hash of the full scene content; equal scenes hash equal.
std::uint64_t scene_hash(const SceneSpec& scene);

// Patch-feature matrix [P, kFeatureDim], P = G*G row-major by (row, col).
// Empty cells are zero before noise; an occupied cell carries
// one-hot(shape) (+) one-hot(color) (+) (row/G, col/G). Seeded Gaussian
// noise of scale sigma is added to every entry.
using ImageInput = Tensor<float>;
ImageInput render(const SceneSpec& scene, std::uint64_t noise_seed, double sigma);

// Template captions: "a {color} {shape}" for a single object,
// "a {color} {shape} {relation} a {color} {shape}" for a related pair.
// Throws ConfigError when the scene fits neither template.
std::string caption(const SceneSpec& scene);

struct DatasetItem {
  SceneSpec scene;
  std::string caption;
  std::string split;  // "train" or "eval"
  std::uint64_t noise_seed = 0;
};

// Seeded training scenes (1-2 objects, relation always present for pairs).
// Disjoint from every eval suite by construction: train draws only scenes
// whose cell layout hashes even, eval suites only odd, so a full scene hash
// can never appear on both sides.
std::vector<DatasetItem> generate_train_set(std::size_t n, std::uint64_t seed,
                                            std::size_t grid = 4);

struct CompI2TItem {
  SceneSpec scene;
  std::uint64_t noise_seed = 0;
  std::string caption;
  std::string negative;  // attribute-swap or relation-flip of the caption
};

struct CompGroupItem {
  SceneSpec scene_a, scene_b;  // b = color-swapped counterfactual of a
  std::uint64_t noise_seed_a = 0, noise_seed_b = 0;
  std::string caption_a, caption_b;
};

struct ZsItem {
  SceneSpec scene;  // single object
  std::uint64_t noise_seed = 0;
  ObjectColor color = ObjectColor::Red;
  ObjectShape shape = ObjectShape::Circle;
};

struct RetrievalItem {
  SceneSpec scene;
  std::uint64_t noise_seed = 0;
  std::string caption;  // unique within the suite
};

struct EvalSuites {
  std::vector<CompI2TItem> comp_i2t;
  std::vector<CompGroupItem> comp_group;
  std::vector<ZsItem> zs;
  std::vector<RetrievalItem> retrieval;
};

// n items per suite. Deterministic in (n, seed, grid).
EvalSuites make_eval_suites(std::size_t n, std::uint64_t seed,
                            std::size_t grid = 4);

// 12-class label index used by zero-shot evaluation.
std::size_t zs_class_index(ObjectColor c, ObjectShape s);

// JSONL serialization. Dataset lines follow
//   {"scene": {...}, "caption": "...", "split": "train|eval", "noise_seed": N}
// and suite lines carry a "kind" discriminator.
std::string dataset_to_jsonl(const std::vector<DatasetItem>& items);
std::vector<DatasetItem> dataset_from_jsonl(const std::string& text);
std::string suites_to_jsonl(const EvalSuites& suites);
EvalSuites suites_from_jsonl(const std::string& text);

}  // namespace fsc
