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

#include <cmath>
#include <cstdint>
#include <vector>

#include "fsc/errors.hpp"
#include "fsc/nn.hpp"

namespace fsc {

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;  // decoupled; never applied to LogTemp params
};

// Linear warmup to `peak` over `warmup` steps, then cosine decay reaching 0
// at step == total. lr(warmup) == peak exactly (cos 0 == 1).
inline double lr_at(std::size_t step, std::size_t total, std::size_t warmup,
                    double peak) {
  if (total == 0 || warmup >= total)
    fail(ErrorCode::ConfigError, "schedule needs warmup < total steps");
  if (step < warmup)
    return peak * static_cast<double>(step + 1) / static_cast<double>(warmup);
  const double t = static_cast<double>(step - warmup) /
                   static_cast<double>(total - warmup);
  return peak * 0.5 * (1.0 + std::cos(3.14159265358979323846 * t));
}

// AdamW with decoupled weight decay. Moments are kept in double regardless
// of the parameter scalar so f32 runs stay deterministic and well-scaled.
template <typename S>
class AdamW {
 public:
  AdamW(std::vector<ParamRef<S>> params, AdamWConfig cfg)
      : params_(std::move(params)), cfg_(cfg) {
    slots_.resize(params_.size());
    for (std::size_t i = 0; i < params_.size(); ++i) {
      slots_[i].m.assign(params_[i].tensor.size(), 0.0);
      slots_[i].v.assign(params_[i].tensor.size(), 0.0);
    }
  }

  std::uint64_t steps_taken() const { return t_; }

  void step(double lr) {
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
      auto& p = params_[i];
      auto& x = p.tensor.mutable_value();
      const auto& g = p.tensor.grad();
      auto& m = slots_[i].m;
      auto& v = slots_[i].v;
      const bool decay = cfg_.weight_decay != 0.0 && p.kind != ParamKind::LogTemp;
      for (std::size_t j = 0; j < x.size(); ++j) {
        // Untouched parameters leave an empty grad vector; treat as zero.
        const double gj = g.empty() ? 0.0 : static_cast<double>(g[j]);
        m[j] = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * gj;
        v[j] = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * gj * gj;
        const double mhat = m[j] / bc1;
        const double vhat = v[j] / bc2;
        double xj = static_cast<double>(x[j]);
        xj -= lr * (mhat / (std::sqrt(vhat) + cfg_.eps));
        if (decay) xj -= lr * cfg_.weight_decay * static_cast<double>(x[j]);
        x[j] = static_cast<S>(xj);
      }
    }
  }

 private:
  struct Slot {
    std::vector<double> m, v;
  };
  std::vector<ParamRef<S>> params_;
  AdamWConfig cfg_;
  std::vector<Slot> slots_;
  std::uint64_t t_ = 0;
};

}  // namespace fsc
