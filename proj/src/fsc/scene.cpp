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

#include "fsc/scene.hpp"

#include <set>
#include <sstream>
#include <utility>

#include "json.hpp"

#include "fsc/errors.hpp"
#include "fsc/rng.hpp"
#include "fsc/util.hpp"

namespace fsc {

using nlohmann::json;

const char* shape_name(ObjectShape s) {
  switch (s) {
    case ObjectShape::Circle: return "circle";
    case ObjectShape::Square: return "square";
    case ObjectShape::Triangle: return "triangle";
  }
  return "?";
}

const char* color_name(ObjectColor c) {
  switch (c) {
    case ObjectColor::Red: return "red";
    case ObjectColor::Blue: return "blue";
    case ObjectColor::Green: return "green";
    case ObjectColor::Yellow: return "yellow";
  }
  return "?";
}

const char* relation_name(Relation r) {
  switch (r) {
    case Relation::LeftOf: return "left_of";
    case Relation::RightOf: return "right_of";
    case Relation::Above: return "above";
    case Relation::Below: return "below";
  }
  return "?";
}

const char* relation_phrase(Relation r) {
  switch (r) {
    case Relation::LeftOf: return "left of";
    case Relation::RightOf: return "right of";
    case Relation::Above: return "above";
    case Relation::Below: return "below";
  }
  return "?";
}

ObjectShape parse_shape(const std::string& s) {
  if (s == "circle") return ObjectShape::Circle;
  if (s == "square") return ObjectShape::Square;
  if (s == "triangle") return ObjectShape::Triangle;
  fail(ErrorCode::ConfigError, "unknown shape '" + s + "'");
}

ObjectColor parse_color(const std::string& s) {
  if (s == "red") return ObjectColor::Red;
  if (s == "blue") return ObjectColor::Blue;
  if (s == "green") return ObjectColor::Green;
  if (s == "yellow") return ObjectColor::Yellow;
  fail(ErrorCode::ConfigError, "unknown color '" + s + "'");
}

Relation parse_relation(const std::string& s) {
  if (s == "left_of") return Relation::LeftOf;
  if (s == "right_of") return Relation::RightOf;
  if (s == "above") return Relation::Above;
  if (s == "below") return Relation::Below;
  fail(ErrorCode::ConfigError, "unknown relation '" + s + "'");
}

bool relation_holds(Relation r, const SceneObject& a, const SceneObject& b) {
  switch (r) {
    case Relation::LeftOf: return a.col < b.col;
    case Relation::RightOf: return a.col > b.col;
    case Relation::Above: return a.row < b.row;
    case Relation::Below: return a.row > b.row;
  }
  return false;
}

void validate_scene(const SceneSpec& scene) {
  if (scene.grid == 0) fail(ErrorCode::ConfigError, "grid must be positive");
  if (scene.objects.empty() || scene.objects.size() > 3)
    fail(ErrorCode::ConfigError, "scene must hold 1-3 objects, got " +
                                     std::to_string(scene.objects.size()));
  std::set<std::pair<std::size_t, std::size_t>> cells;
  for (const auto& o : scene.objects) {
    if (o.row >= scene.grid || o.col >= scene.grid)
      fail(ErrorCode::ConfigError, "object cell off the grid");
    if (!cells.emplace(o.row, o.col).second)
      fail(ErrorCode::CellCollision,
           "two objects share cell (" + std::to_string(o.row) + "," +
               std::to_string(o.col) + ")");
  }
  if (scene.relation) {
    if (scene.objects.size() < 2)
      fail(ErrorCode::ConfigError, "relation declared without a second object");
    if (!relation_holds(*scene.relation, scene.objects[0], scene.objects[1]))
      fail(ErrorCode::ConfigError,
           std::string("declared relation '") + relation_name(*scene.relation) +
               "' inconsistent with cell coordinates");
  }
}

std::uint64_t scene_hash(const SceneSpec& scene) {
  std::uint64_t h = hash64({scene.grid, scene.objects.size()});
  for (const auto& o : scene.objects)
    h = hash64({h, static_cast<std::uint64_t>(o.shape),
                static_cast<std::uint64_t>(o.color), o.row, o.col});
  return hash64({h, scene.relation.has_value() ? 1ULL : 0ULL,
                 scene.relation ? static_cast<std::uint64_t>(*scene.relation)
                                : 0ULL});
}

namespace {

// Cells-only key deciding the train/eval partition. Counterfactual eval
// images recolor objects but keep the cells, so they stay on the eval side.
std::uint64_t layout_hash(const SceneSpec& scene) {
  std::uint64_t h = hash64({scene.grid, scene.objects.size()});
  for (const auto& o : scene.objects) h = hash64({h, o.row, o.col});
  return h;
}

constexpr std::uint64_t kTrainParity = 0;
constexpr std::uint64_t kEvalParity = 1;

std::string pair_caption(ObjectColor c0, ObjectShape s0, Relation rel,
                         ObjectColor c1, ObjectShape s1) {
  std::ostringstream out;
  out << "a " << color_name(c0) << ' ' << shape_name(s0) << ' '
      << relation_phrase(rel) << " a " << color_name(c1) << ' '
      << shape_name(s1);
  return out.str();
}

Relation opposite(Relation r) {
  switch (r) {
    case Relation::LeftOf: return Relation::RightOf;
    case Relation::RightOf: return Relation::LeftOf;
    case Relation::Above: return Relation::Below;
    case Relation::Below: return Relation::Above;
  }
  return r;
}

SceneObject random_object(Rng& rng, std::size_t grid) {
  SceneObject o;
  o.shape = static_cast<ObjectShape>(rng.uniform_int(kNumShapes));
  o.color = static_cast<ObjectColor>(rng.uniform_int(kNumColors));
  std::size_t cell = static_cast<std::size_t>(rng.uniform_int(grid * grid));
  o.row = cell / grid;
  o.col = cell % grid;
  return o;
}

Relation pick_relation(Rng& rng, const SceneObject& a, const SceneObject& b) {
  std::vector<Relation> options;
  for (Relation r : {Relation::LeftOf, Relation::RightOf, Relation::Above,
                     Relation::Below})
    if (relation_holds(r, a, b)) options.push_back(r);
  // Distinct cells always admit at least one relation.
  return options[rng.uniform_int(options.size())];
}

// Draws scene layouts until one lands on the requested partition side.
template <typename MakeScene>
SceneSpec sample_on_side(Rng& rng, std::uint64_t parity, MakeScene make) {
  for (int attempt = 0; attempt < 100000; ++attempt) {
    SceneSpec s = make(rng);
    if (layout_hash(s) % 2 == parity) return s;
  }
  fail(ErrorCode::ConfigError, "scene sampling failed to hit partition side");
}

SceneSpec make_single(Rng& rng, std::size_t grid) {
  SceneSpec s;
  s.grid = grid;
  s.objects.push_back(random_object(rng, grid));
  return s;
}

SceneSpec make_pair(Rng& rng, std::size_t grid, bool distinct_colors) {
  SceneSpec s;
  s.grid = grid;
  s.objects.push_back(random_object(rng, grid));
  SceneObject b = random_object(rng, grid);
  while (b.row == s.objects[0].row && b.col == s.objects[0].col)
    b = random_object(rng, grid);
  while (distinct_colors && b.color == s.objects[0].color)
    b.color = static_cast<ObjectColor>(rng.uniform_int(kNumColors));
  s.objects.push_back(b);
  s.relation = pick_relation(rng, s.objects[0], s.objects[1]);
  return s;
}

}  // namespace

ImageInput render(const SceneSpec& scene, std::uint64_t noise_seed,
                  double sigma) {
  validate_scene(scene);
  const std::size_t g = scene.grid;
  auto img = Tensor<float>::zeros({g * g, kFeatureDim});
  auto& x = img.mutable_value();
  for (const auto& o : scene.objects) {
    float* row = x.data() + (o.row * g + o.col) * kFeatureDim;
    row[static_cast<std::size_t>(o.shape)] = 1.0f;
    row[kNumShapes + static_cast<std::size_t>(o.color)] = 1.0f;
    row[kNumShapes + kNumColors] = static_cast<float>(o.row) / g;
    row[kNumShapes + kNumColors + 1] = static_cast<float>(o.col) / g;
  }
  if (sigma != 0.0) {
    Rng rng(noise_seed);
    for (auto& v : x) v += static_cast<float>(sigma * rng.normal());
  }
  return img;
}

std::string caption(const SceneSpec& scene) {
  if (scene.objects.size() == 1) {
    const auto& o = scene.objects[0];
    return std::string("a ") + color_name(o.color) + ' ' + shape_name(o.shape);
  }
  if (scene.objects.size() == 2 && scene.relation) {
    const auto& a = scene.objects[0];
    const auto& b = scene.objects[1];
    return pair_caption(a.color, a.shape, *scene.relation, b.color, b.shape);
  }
  fail(ErrorCode::ConfigError, "no caption template for this scene");
}

std::vector<DatasetItem> generate_train_set(std::size_t n, std::uint64_t seed,
                                            std::size_t grid) {
  std::vector<DatasetItem> items(n);
  parallel_for(n, [&](std::size_t i) {
    Rng rng(hash64({seed, i, 0x7261ULL}));
    SceneSpec scene = sample_on_side(rng, kTrainParity, [&](Rng& r) {
      return r.uniform_int(2) == 0 ? make_single(r, grid)
                                   : make_pair(r, grid, false);
    });
    items[i].scene = std::move(scene);
    items[i].caption = caption(items[i].scene);
    items[i].split = "train";
    items[i].noise_seed = hash64({seed, i, 0x6e6fULL});
  });
  return items;
}

std::size_t zs_class_index(ObjectColor c, ObjectShape s) {
  return static_cast<std::size_t>(c) * kNumShapes + static_cast<std::size_t>(s);
}

EvalSuites make_eval_suites(std::size_t n, std::uint64_t seed,
                            std::size_t grid) {
  if (n < 1) fail(ErrorCode::ConfigError, "suite size must be >= 1");
  EvalSuites out;
  out.comp_i2t.resize(n);
  out.comp_group.resize(n);
  out.zs.resize(n);

  parallel_for(n, [&](std::size_t i) {
    // Image-to-text selection: correct caption vs one perturbed caption,
    // alternating attribute-swap and relation-flip for balance.
    {
      Rng rng(hash64({seed, i, 0xC127ULL}));
      auto& item = out.comp_i2t[i];
      item.scene = sample_on_side(
          rng, kEvalParity, [&](Rng& r) { return make_pair(r, grid, true); });
      item.noise_seed = hash64({seed, i, 0xC127AULL});
      item.caption = caption(item.scene);
      const auto& a = item.scene.objects[0];
      const auto& b = item.scene.objects[1];
      item.negative =
          (i % 2 == 0)
              ? pair_caption(b.color, a.shape, *item.scene.relation, a.color,
                             b.shape)
              : pair_caption(a.color, a.shape, opposite(*item.scene.relation),
                             b.color, b.shape);
    }

    // Group items: the counterfactual image recolors the pair; the 2x2
    // grid must admit exactly one consistent assignment.
    {
      Rng rng(hash64({seed, i, 0x6507ULL}));
      auto& item = out.comp_group[i];
      item.scene_a = sample_on_side(
          rng, kEvalParity, [&](Rng& r) { return make_pair(r, grid, true); });
      item.scene_b = item.scene_a;
      std::swap(item.scene_b.objects[0].color, item.scene_b.objects[1].color);
      item.noise_seed_a = hash64({seed, i, 0x6507AULL});
      item.noise_seed_b = hash64({seed, i, 0x6507BULL});
      item.caption_a = caption(item.scene_a);
      item.caption_b = caption(item.scene_b);
      // Exhaustive check over both assignments of the 2x2 grid: each image
      // must be described by exactly its own caption, i.e. the crossed
      // matching must be inconsistent on both legs. The template grammar is
      // injective over (colors, shapes, relation), so caption equality
      // decides "describes".
      const bool cross_a = caption(item.scene_a) == item.caption_b;
      const bool cross_b = caption(item.scene_b) == item.caption_a;
      if (cross_a || cross_b)
        fail(ErrorCode::ConfigError, "group item lacks a unique matching");
    }

    // Zero-shot: class-balanced single-object scenes.
    {
      Rng rng(hash64({seed, i, 0x25C1ULL}));
      auto& item = out.zs[i];
      std::size_t cls = i % (kNumColors * kNumShapes);
      item.color = static_cast<ObjectColor>(cls / kNumShapes);
      item.shape = static_cast<ObjectShape>(cls % kNumShapes);
      item.scene = sample_on_side(rng, kEvalParity, [&](Rng& r) {
        SceneSpec s = make_single(r, grid);
        s.objects[0].color = item.color;
        s.objects[0].shape = item.shape;
        return s;
      });
      item.noise_seed = hash64({seed, i, 0x25C1AULL});
    }
  });

  // Retrieval pairs need globally unique captions, so they are drawn
  // serially against the growing caption set.
  out.retrieval.resize(n);
  std::set<std::string> captions_seen;
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng(hash64({seed, i, 0x4E7ULL}));
    auto& item = out.retrieval[i];
    for (int attempt = 0;; ++attempt) {
      if (attempt >= 100000)
        fail(ErrorCode::ConfigError, "could not draw a fresh retrieval caption");
      item.scene = sample_on_side(
          rng, kEvalParity, [&](Rng& r) { return make_pair(r, grid, false); });
      item.caption = caption(item.scene);
      if (captions_seen.insert(item.caption).second) break;
    }
    item.noise_seed = hash64({seed, i, 0x4E7AULL});
  }
  return out;
}

namespace {

json scene_to_json(const SceneSpec& scene) {
  json objs = json::array();
  for (const auto& o : scene.objects)
    objs.push_back({{"shape", shape_name(o.shape)},
                    {"color", color_name(o.color)},
                    {"row", o.row},
                    {"col", o.col}});
  json j{{"grid", scene.grid}, {"objects", std::move(objs)}};
  if (scene.relation) j["relation"] = relation_name(*scene.relation);
  return j;
}

SceneSpec scene_from_json(const json& j) {
  SceneSpec s;
  s.grid = j.at("grid").get<std::size_t>();
  for (const auto& jo : j.at("objects")) {
    SceneObject o;
    o.shape = parse_shape(jo.at("shape").get<std::string>());
    o.color = parse_color(jo.at("color").get<std::string>());
    o.row = jo.at("row").get<std::size_t>();
    o.col = jo.at("col").get<std::size_t>();
    s.objects.push_back(o);
  }
  if (j.contains("relation"))
    s.relation = parse_relation(j.at("relation").get<std::string>());
  validate_scene(s);
  return s;
}

// Applies fn to every JSONL line, mapping parse/schema issues to ConfigError
// with the line number.
template <typename Fn>
void for_each_jsonl(const std::string& text, Fn fn) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      fn(json::parse(line));
    } catch (const Error&) {
      throw;
    } catch (const std::exception& e) {
      fail(ErrorCode::ConfigError,
           "jsonl line " + std::to_string(line_no) + ": " + e.what());
    }
  }
}

}  // namespace

std::string dataset_to_jsonl(const std::vector<DatasetItem>& items) {
  std::ostringstream out;
  for (const auto& it : items)
    out << json{{"scene", scene_to_json(it.scene)},
                {"caption", it.caption},
                {"split", it.split},
                {"noise_seed", it.noise_seed}}
               .dump()
        << '\n';
  return out.str();
}

std::vector<DatasetItem> dataset_from_jsonl(const std::string& text) {
  std::vector<DatasetItem> items;
  for_each_jsonl(text, [&](const json& j) {
    DatasetItem it;
    it.scene = scene_from_json(j.at("scene"));
    it.caption = j.at("caption").get<std::string>();
    it.split = j.at("split").get<std::string>();
    if (it.split != "train" && it.split != "eval")
      fail(ErrorCode::ConfigError, "split must be train or eval");
    it.noise_seed = j.at("noise_seed").get<std::uint64_t>();
    items.push_back(std::move(it));
  });
  return items;
}

std::string suites_to_jsonl(const EvalSuites& suites) {
  std::ostringstream out;
  for (const auto& it : suites.comp_i2t)
    out << json{{"kind", "comp_i2t"},
                {"scene", scene_to_json(it.scene)},
                {"noise_seed", it.noise_seed},
                {"caption", it.caption},
                {"negative", it.negative}}
               .dump()
        << '\n';
  for (const auto& it : suites.comp_group)
    out << json{{"kind", "comp_group"},
                {"scene_a", scene_to_json(it.scene_a)},
                {"scene_b", scene_to_json(it.scene_b)},
                {"noise_seed_a", it.noise_seed_a},
                {"noise_seed_b", it.noise_seed_b},
                {"caption_a", it.caption_a},
                {"caption_b", it.caption_b}}
               .dump()
        << '\n';
  for (const auto& it : suites.zs)
    out << json{{"kind", "zs"},
                {"scene", scene_to_json(it.scene)},
                {"noise_seed", it.noise_seed},
                {"color", color_name(it.color)},
                {"shape", shape_name(it.shape)}}
               .dump()
        << '\n';
  for (const auto& it : suites.retrieval)
    out << json{{"kind", "retrieval"},
                {"scene", scene_to_json(it.scene)},
                {"noise_seed", it.noise_seed},
                {"caption", it.caption}}
               .dump()
        << '\n';
  return out.str();
}

EvalSuites suites_from_jsonl(const std::string& text) {
  EvalSuites out;
  for_each_jsonl(text, [&](const json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "comp_i2t") {
      CompI2TItem it;
      it.scene = scene_from_json(j.at("scene"));
      it.noise_seed = j.at("noise_seed").get<std::uint64_t>();
      it.caption = j.at("caption").get<std::string>();
      it.negative = j.at("negative").get<std::string>();
      out.comp_i2t.push_back(std::move(it));
    } else if (kind == "comp_group") {
      CompGroupItem it;
      it.scene_a = scene_from_json(j.at("scene_a"));
      it.scene_b = scene_from_json(j.at("scene_b"));
      it.noise_seed_a = j.at("noise_seed_a").get<std::uint64_t>();
      it.noise_seed_b = j.at("noise_seed_b").get<std::uint64_t>();
      it.caption_a = j.at("caption_a").get<std::string>();
      it.caption_b = j.at("caption_b").get<std::string>();
      out.comp_group.push_back(std::move(it));
    } else if (kind == "zs") {
      ZsItem it;
      it.scene = scene_from_json(j.at("scene"));
      it.noise_seed = j.at("noise_seed").get<std::uint64_t>();
      it.color = parse_color(j.at("color").get<std::string>());
      it.shape = parse_shape(j.at("shape").get<std::string>());
      out.zs.push_back(std::move(it));
    } else if (kind == "retrieval") {
      RetrievalItem it;
      it.scene = scene_from_json(j.at("scene"));
      it.noise_seed = j.at("noise_seed").get<std::uint64_t>();
      it.caption = j.at("caption").get<std::string>();
      out.retrieval.push_back(std::move(it));
    } else {
      fail(ErrorCode::ConfigError, "unknown suite kind '" + kind + "'");
    }
  });
  return out;
}

}  // namespace fsc
