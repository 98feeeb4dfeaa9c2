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

#include "fsc/optim.hpp"

#include <cmath>
#include <vector>

#include "doctest.h"
#include "fsc/errors.hpp"
#include "fsc/tensor.hpp"

using fsc::AdamW;
using fsc::AdamWConfig;
using fsc::ParamKind;
using fsc::ParamRef;
using fsc::Tape;
using fsc::Tensor;

namespace {

// Pushes gradient g onto param x via loss = g * x on a fresh tape.
template <typename S>
void feed_grad(Tensor<S>& x, double g) {
  x.zero_grad();
  Tape<S> tape;
  typename Tape<S>::Scope scope(tape);
  auto loss = fsc::sum(fsc::scale(x, static_cast<S>(g)));
  fsc::backward(loss);
}

}  // namespace

TEST_CASE("adamw matches the closed-form adam recurrence") {
  auto x = Tensor<double>::param({1}, {1.0});
  AdamWConfig cfg;
  AdamW<double> opt({{"x", x, ParamKind::Weight}}, cfg);

  const std::vector<double> grads = {0.3, -0.2, 1.0, 0.05, -0.7, 0.4};
  const double lr = 0.01;
  double ref = 1.0, m = 0.0, v = 0.0;
  for (std::size_t t = 0; t < grads.size(); ++t) {
    feed_grad(x, grads[t]);
    opt.step(lr);

    m = cfg.beta1 * m + (1 - cfg.beta1) * grads[t];
    v = cfg.beta2 * v + (1 - cfg.beta2) * grads[t] * grads[t];
    const double mhat = m / (1 - std::pow(cfg.beta1, double(t + 1)));
    const double vhat = v / (1 - std::pow(cfg.beta2, double(t + 1)));
    ref -= lr * mhat / (std::sqrt(vhat) + cfg.eps);
    CHECK(std::abs(x.at(0) - ref) < 1e-10);
  }
  CHECK(opt.steps_taken() == grads.size());
}

TEST_CASE("weight decay is decoupled and skips the temperature") {
  auto plain = Tensor<double>::param({1}, {2.0});
  auto decayed = Tensor<double>::param({1}, {2.0});
  auto logtemp = Tensor<double>::param({1}, {2.0});

  AdamWConfig no_wd;
  AdamWConfig wd;
  wd.weight_decay = 0.1;
  AdamW<double> opt_plain({{"x", plain, ParamKind::Weight}}, no_wd);
  AdamW<double> opt_decay({{"x", decayed, ParamKind::Weight}}, wd);
  AdamW<double> opt_temp({{"log_inv_tau", logtemp, ParamKind::LogTemp}}, wd);

  const double lr = 0.01;
  feed_grad(plain, 0.5);
  feed_grad(decayed, 0.5);
  feed_grad(logtemp, 0.5);
  opt_plain.step(lr);
  opt_decay.step(lr);
  opt_temp.step(lr);

  // Decoupled decay subtracts exactly lr * wd * x_before on top of Adam.
  CHECK(std::abs((plain.at(0) - decayed.at(0)) - lr * 0.1 * 2.0) < 1e-12);
  // LogTemp parameters never see the decay term.
  CHECK(logtemp.at(0) == plain.at(0));
}

TEST_CASE("zero and missing gradients") {
  // A parameter outside the graph has an empty grad: no Adam movement,
  // but decoupled decay still applies.
  auto idle = Tensor<double>::param({2}, {1.0, -3.0});
  AdamWConfig wd;
  wd.weight_decay = 0.5;
  AdamW<double> opt({{"idle", idle, ParamKind::Bias}}, wd);
  opt.step(0.1);
  CHECK(idle.at(0) == doctest::Approx(1.0 - 0.1 * 0.5 * 1.0).epsilon(1e-12));
  CHECK(idle.at(1) == doctest::Approx(-3.0 + 0.1 * 0.5 * 3.0).epsilon(1e-12));
}

TEST_CASE("lr schedule ramps then follows the cosine") {
  const double peak = 3e-4;
  // Warmup ramp is linear and hits peak exactly at step == warmup.
  CHECK(fsc::lr_at(0, 100, 10, peak) == doctest::Approx(peak / 10).epsilon(1e-12));
  CHECK(fsc::lr_at(4, 100, 10, peak) == doctest::Approx(peak / 2).epsilon(1e-12));
  CHECK(fsc::lr_at(10, 100, 10, peak) == peak);
  for (std::size_t s = 1; s < 10; ++s)
    CHECK(fsc::lr_at(s, 100, 10, peak) > fsc::lr_at(s - 1, 100, 10, peak));

  // Cosine half-way point and tail.
  CHECK(fsc::lr_at(55, 100, 10, peak) ==
        doctest::Approx(peak * 0.5).epsilon(1e-12));
  CHECK(fsc::lr_at(99, 100, 10, peak) > 0.0);
  CHECK(fsc::lr_at(99, 100, 10, peak) < 0.01 * peak);
  for (std::size_t s = 11; s < 100; ++s)
    CHECK(fsc::lr_at(s, 100, 10, peak) < fsc::lr_at(s - 1, 100, 10, peak));

  // No warmup: step 0 is already at peak.
  CHECK(fsc::lr_at(0, 100, 0, peak) == peak);

  CHECK_THROWS_AS(fsc::lr_at(0, 100, 100, peak), fsc::Error);
  CHECK_THROWS_AS(fsc::lr_at(0, 0, 0, peak), fsc::Error);
}

TEST_CASE("float parameter updates are deterministic") {
  auto run = [] {
    auto x = Tensor<float>::param({3}, {0.5f, -0.25f, 2.0f});
    AdamWConfig cfg;
    cfg.weight_decay = 0.1;
    AdamW<float> opt({{"x", x, ParamKind::Weight}}, cfg);
    for (int t = 0; t < 25; ++t) {
      feed_grad(x, 0.1 * (t % 5) - 0.2);
      opt.step(fsc::lr_at(t, 25, 5, 1e-3));
    }
    return x;
  };
  auto a = run();
  auto b = run();
  for (std::size_t i = 0; i < 3; ++i) CHECK(a.at(i) == b.at(i));
}
