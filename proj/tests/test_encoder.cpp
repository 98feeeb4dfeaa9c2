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

#include <doctest.h>

#include <cmath>

#include "fsc/encoder.hpp"
#include "fsc/gradcheck.hpp"
#include "fsc/rng.hpp"

using fsc::DualEncoder;
using fsc::EncoderConfig;
using fsc::Error;
using fsc::ErrorCode;
using fsc::Rng;
using fsc::Tensor;
using fsc::TextInput;

namespace {

EncoderConfig small_config() {
  EncoderConfig cfg;
  cfg.d = 8;
  cfg.layers = 1;
  cfg.heads = 2;
  cfg.d_in = 5;
  cfg.vocab_size = 10;  // PAD=0, BOS=1, words 2..8, EOS=9
  cfg.w_max = 8;
  cfg.grid = 2;
  return cfg;
}

constexpr std::uint32_t kEos = 9;

template <typename S>
Tensor<S> random_patches(const EncoderConfig& cfg, Rng& rng) {
  std::vector<S> data(cfg.patches() * cfg.d_in);
  for (auto& v : data) v = static_cast<S>(rng.uniform(-1.0, 1.0));
  return Tensor<S>::from({cfg.patches(), cfg.d_in}, std::move(data));
}

TextInput make_text(std::vector<std::uint32_t> ids) {
  TextInput t;
  t.pad_mask.assign(ids.size(), true);
  for (std::size_t i = 0; i < ids.size(); ++i)
    if (ids[i] == 0) t.pad_mask[i] = false;
  t.token_ids = std::move(ids);
  return t;
}

}  // namespace

TEST_CASE("image encoding shape and norm contract") {
  auto cfg = small_config();
  DualEncoder<float> model(cfg);
  model.init_params(1);
  Rng rng(2);
  auto enc = model.encode_image(random_patches<float>(cfg, rng));
  REQUIRE(enc.V.shape() == fsc::Shape{4, 8});
  REQUIRE(enc.v.shape() == fsc::Shape{8});
  double norm = 0;
  for (std::size_t i = 0; i < 8; ++i) norm += enc.v.at(i) * enc.v.at(i);
  CHECK(std::sqrt(norm) == doctest::Approx(1.0).epsilon(1e-5));
  for (std::size_t r = 0; r < 4; ++r) {
    double rn = 0;
    for (std::size_t c = 0; c < 8; ++c) rn += enc.V.at(r, c) * enc.V.at(r, c);
    CHECK(std::sqrt(rn) == doctest::Approx(1.0).epsilon(1e-5));
  }

  auto bad = Tensor<float>::from({3, 5}, std::vector<float>(15, 0.f));
  CHECK_THROWS_AS(model.encode_image(bad), Error);
}

TEST_CASE("zero features through zero-initialized weights stay finite") {
  auto cfg = small_config();
  DualEncoder<float> model(cfg);  // no init: every projection is zero
  auto zero = Tensor<float>::from({cfg.patches(), cfg.d_in},
                                  std::vector<float>(cfg.patches() * cfg.d_in, 0.f));
  auto enc = model.encode_image(zero);
  for (std::size_t i = 0; i < enc.V.size(); ++i) CHECK(std::isfinite(enc.V.at(i)));
  // degenerate rows resolve to the guarded basis direction
  CHECK(enc.V.at(0, 0) == 1.0f);
  CHECK(enc.V.at(0, 1) == 0.0f);
  CHECK(enc.v.at(0) == 1.0f);
}

TEST_CASE("identical patch rows encode identically and pool to the row") {
  auto cfg = small_config();
  DualEncoder<float> model(cfg);
  model.init_params(3);
  std::vector<float> one_row{0.5f, -0.25f, 1.0f, 0.0f, 0.75f};
  std::vector<float> data;
  for (std::size_t p = 0; p < cfg.patches(); ++p)
    data.insert(data.end(), one_row.begin(), one_row.end());
  auto enc = model.encode_image(Tensor<float>::from({cfg.patches(), cfg.d_in}, std::move(data)));
  for (std::size_t r = 1; r < cfg.patches(); ++r)
    for (std::size_t c = 0; c < cfg.d; ++c) CHECK(enc.V.at(r, c) == enc.V.at(0, c));
  for (std::size_t c = 0; c < cfg.d; ++c)
    CHECK(enc.v.at(c) == doctest::Approx(enc.V.at(0, c)).epsilon(1e-6));
}

TEST_CASE("text encoding pools the EOS row and validates EOS framing") {
  auto cfg = small_config();
  DualEncoder<float> model(cfg);
  model.init_params(4);
  auto enc = model.encode_text(make_text({1, 3, 4, 5, kEos}), kEos);
  REQUIRE(enc.T.shape() == fsc::Shape{5, 8});
  CHECK(enc.eos_pos == 4);
  for (std::size_t c = 0; c < 8; ++c) CHECK(enc.t.at(c) == enc.T.at(4, c));

  CHECK_THROWS_AS(model.encode_text(make_text({1, 3, 4}), kEos), Error);
  try {
    model.encode_text(make_text({1, kEos, 3, kEos}), kEos);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MissingEOS);
  }
}

TEST_CASE("padded and trimmed sequences produce identical real rows") {
  auto cfg = small_config();
  DualEncoder<float> model(cfg);
  model.init_params(5);
  auto trimmed = model.encode_text(make_text({1, 3, 4, kEos}), kEos);
  auto padded = model.encode_text(make_text({1, 3, 4, kEos, 0, 0, 0, 0}), kEos);
  REQUIRE(padded.T.shape() == fsc::Shape{8, 8});
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t c = 0; c < 8; ++c) CHECK(padded.T.at(r, c) == trimmed.T.at(r, c));
  for (std::size_t c = 0; c < 8; ++c) CHECK(padded.t.at(c) == trimmed.t.at(c));
}

TEST_CASE("positional table feeds the representation") {
  // Freshly initialized positional embeddings are zero, which leaves the
  // towers permutation-equivariant: swapping two tokens must then leave the
  // EOS pooling unchanged. Once the table is nonzero (as after training),
  // the same swap must move the pooled vector.
  auto cfg = small_config();
  DualEncoder<float> model(cfg);
  model.init_params(6);
  auto a0 = model.encode_text(make_text({1, 3, 4, kEos}), kEos);
  auto b0 = model.encode_text(make_text({1, 4, 3, kEos}), kEos);
  for (std::size_t c = 0; c < 8; ++c) CHECK(a0.t.at(c) == b0.t.at(c));

  for (auto& p : model.params())
    if (p.name == "text.pos_emb") {
      Rng rng(60);
      for (auto& x : p.tensor.mutable_value()) x = static_cast<float>(rng.uniform(-0.5, 0.5));
    }
  auto a = model.encode_text(make_text({1, 3, 4, kEos}), kEos);
  auto b = model.encode_text(make_text({1, 4, 3, kEos}), kEos);
  double dmax = 0;
  for (std::size_t c = 0; c < 8; ++c)
    dmax = std::max(dmax, std::abs(static_cast<double>(a.t.at(c)) - b.t.at(c)));
  CHECK(dmax > 1e-6);
}

TEST_CASE("encode is pure: bit-identical on repeat") {
  auto cfg = small_config();
  DualEncoder<float> model(cfg);
  model.init_params(7);
  Rng rng(8);
  auto patches = random_patches<float>(cfg, rng);
  auto e1 = model.encode_image(patches);
  auto e2 = model.encode_image(patches);
  for (std::size_t i = 0; i < e1.V.size(); ++i) CHECK(e1.V.at(i) == e2.V.at(i));
  auto t1 = model.encode_text(make_text({1, 5, kEos}), kEos);
  auto t2 = model.encode_text(make_text({1, 5, kEos}), kEos);
  for (std::size_t i = 0; i < t1.T.size(); ++i) CHECK(t1.T.at(i) == t2.T.at(i));
}

TEST_CASE("parameter registry is stable and seeded init reproducible") {
  auto cfg = small_config();
  DualEncoder<float> a(cfg), b(cfg);
  a.init_params(11);
  b.init_params(11);
  auto& pa = a.params();
  auto& pb = b.params();
  REQUIRE(pa.size() == pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) {
    CHECK(pa[i].name == pb[i].name);
    REQUIRE(pa[i].tensor.size() == pb[i].tensor.size());
    for (std::size_t j = 0; j < pa[i].tensor.size(); ++j)
      CHECK(pa[i].tensor.at(j) == pb[i].tensor.at(j));
  }
  CHECK(pa.back().name == "log_inv_tau");
  CHECK(pa.back().tensor.at(0) == doctest::Approx(std::log(1.0 / 0.07)));

  DualEncoder<float> c(cfg);
  c.init_params(12);
  bool differs = false;
  for (std::size_t j = 0; j < pa[0].tensor.size(); ++j)
    if (pa[0].tensor.at(j) != c.params()[0].tensor.at(j)) differs = true;
  CHECK(differs);
}

TEST_CASE("gradient probe through the image tower") {
  auto cfg = small_config();
  DualEncoder<double> model(cfg);
  model.init_params(13);
  Rng rng(14);
  auto patches = random_patches<double>(cfg, rng);

  for (const char* target : {"image.proj.w", "image.block0.attn.q.w", "image.ln_final.gain"}) {
    Tensor<double> param;
    for (auto& p : model.params())
      if (p.name == target) param = p.tensor;
    REQUIRE(param.defined());
    auto rep = fsc::grad_check_param(
        [&]() { return fsc::sum(model.encode_image(patches).V); }, param);
    CAPTURE(target);
    CHECK(rep.checked > 0);
    CHECK(rep.max_rel_err < 1e-4);
  }
}

TEST_CASE("gradient probe through the text tower") {
  auto cfg = small_config();
  DualEncoder<double> model(cfg);
  model.init_params(15);
  auto txt = make_text({1, 3, 4, 5, kEos, 0, 0});

  for (const char* target : {"text.tok_emb", "text.block0.fc1.w"}) {
    Tensor<double> param;
    for (auto& p : model.params())
      if (p.name == target) param = p.tensor;
    REQUIRE(param.defined());
    auto rep = fsc::grad_check_param(
        [&]() { return fsc::sum(model.encode_text(txt, kEos).T); }, param);
    CAPTURE(target);
    CHECK(rep.checked > 0);
    CHECK(rep.max_rel_err < 1e-4);
  }
}

TEST_CASE("temperature clamp bounds the effective scale") {
  auto cfg = small_config();
  DualEncoder<float> model(cfg);
  model.log_inv_tau().mutable_value()[0] = 9.0f;  // 1/tau = e^9 > 100
  model.clamp_temperature();
  CHECK(model.log_inv_tau().at(0) == doctest::Approx(std::log(100.0)));
  model.log_inv_tau().mutable_value()[0] = -3.0f;
  model.clamp_temperature();
  CHECK(model.log_inv_tau().at(0) == 0.0f);
}

TEST_CASE("config validation") {
  auto cfg = small_config();
  cfg.heads = 3;  // 8 % 3 != 0
  auto build = [&]() { DualEncoder<float> m(cfg); };
  CHECK_THROWS_AS(build(), Error);
}
