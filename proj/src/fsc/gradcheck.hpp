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

// Finite-difference verification of reverse-mode gradients. Runs entirely
// in double: the analytic pass re-executes the graph code on a fresh tape,
// the numeric pass central-differences each input coordinate. Coordinates
// whose perturbed evaluations land near a min/max tie (where the
// subgradient choice is arbitrary) are skipped and reported, not failed.

#pragma once

#include <cmath>
#include <cstddef>

#include "fsc/tensor.hpp"

namespace fsc {

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::size_t checked = 0;
  std::size_t skipped = 0;  // coordinates near an argmin/argmax tie
};

// f maps a tensor (gradient-enabled copy of x0) to a scalar loss.
// Relative error uses |a - n| / max(1, |a|) so near-zero gradients are
// compared absolutely.
template <typename F>
GradCheckReport grad_check(F&& f, const Tensor<double>& x0, double h = 1e-5) {
  std::vector<double> analytic;
  {
    Tape<double> tape;
    typename Tape<double>::Scope scope(tape);
    Tensor<double> x = Tensor<double>::param(x0.shape(), x0.value());
    Tensor<double> loss = f(x);
    backward(loss);
    analytic = x.grad();
  }

  GradCheckReport rep;
  const double tie_thr = 10.0 * h;
  for (std::size_t i = 0; i < x0.size(); ++i) {
    bool tied = false;
    double fp = 0.0, fm = 0.0;
    {
      TieWatch::Scope tw(tie_thr);
      Tensor<double> xp = x0.detached_copy();
      xp.mutable_value()[i] += h;
      fp = f(xp).item();
      tied = tied || TieWatch::tripped;
    }
    {
      TieWatch::Scope tw(tie_thr);
      Tensor<double> xm = x0.detached_copy();
      xm.mutable_value()[i] -= h;
      fm = f(xm).item();
      tied = tied || TieWatch::tripped;
    }
    if (tied) {
      ++rep.skipped;
      continue;
    }
    double numeric = (fp - fm) / (2.0 * h);
    double rel = std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(analytic[i]));
    rep.max_rel_err = std::max(rep.max_rel_err, rel);
    ++rep.checked;
  }
  return rep;
}

// Variant for persistent parameters (e.g. encoder weights): loss_fn reads
// `param` from wherever it lives, so the numeric pass perturbs the storage
// in place and restores it. The analytic pass records on a fresh tape and
// reads the gradient accumulated into `param` itself.
template <typename F>
GradCheckReport grad_check_param(F&& loss_fn, Tensor<double> param, double h = 1e-5) {
  std::vector<double> analytic;
  {
    Tape<double> tape;
    typename Tape<double>::Scope scope(tape);
    param.zero_grad();
    Tensor<double> loss = loss_fn();
    backward(loss);
    analytic = param.grad();
  }

  GradCheckReport rep;
  const double tie_thr = 10.0 * h;
  auto& storage = param.mutable_value();
  for (std::size_t i = 0; i < storage.size(); ++i) {
    const double saved = storage[i];
    bool tied = false;
    double fp = 0.0, fm = 0.0;
    {
      TieWatch::Scope tw(tie_thr);
      storage[i] = saved + h;
      fp = loss_fn().item();
      tied = tied || TieWatch::tripped;
    }
    {
      TieWatch::Scope tw(tie_thr);
      storage[i] = saved - h;
      fm = loss_fn().item();
      tied = tied || TieWatch::tripped;
    }
    storage[i] = saved;
    if (tied) {
      ++rep.skipped;
      continue;
    }
    double numeric = (fp - fm) / (2.0 * h);
    double rel = std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(analytic[i]));
    rep.max_rel_err = std::max(rep.max_rel_err, rel);
    ++rep.checked;
  }
  return rep;
}

}  // namespace fsc
