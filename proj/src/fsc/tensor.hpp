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

// Dense tensors (rank 1 and 2) with reverse-mode autodiff on an explicit
// tape. Ops record a node per result; backward() replays the tape in strict
// reverse append order, accumulating gradients additively. The scalar type
// is a template parameter: training runs in float, verification harnesses
// re-execute the same graph code in double.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "fsc/errors.hpp"

namespace fsc {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (std::size_t e : s) n *= e;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << "]";
  return os.str();
}

template <typename S>
class Tape;

template <typename S>
struct TensorNode {
  Shape shape;
  std::vector<S> value;
  std::vector<S> grad;  // allocated lazily, same length as value
  bool requires_grad = false;
  std::int64_t tape_id = -1;  // producer node on the active tape, -1 = leaf

  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), S(0));
  }
};

// Shared-handle tensor. Values are treated as immutable once an op has
// consumed them; mutation is reserved for parameter updates between steps.
template <typename S>
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape) {
    return from_data(std::move(shape), {}, false);
  }

  static Tensor full(Shape shape, S v) {
    Tensor t = zeros(std::move(shape));
    std::fill(t.node_->value.begin(), t.node_->value.end(), v);
    return t;
  }

  static Tensor from(Shape shape, std::vector<S> data, bool requires_grad = false) {
    if (shape_numel(shape) != data.size())
      fail(ErrorCode::ShapeMismatch,
           "data length " + std::to_string(data.size()) + " does not fill shape " + shape_str(shape));
    return from_data(std::move(shape), std::move(data), requires_grad);
  }

  static Tensor scalar(S v) { return from({1}, {v}); }

  static Tensor param(Shape shape, std::vector<S> data) {
    return from(std::move(shape), std::move(data), true);
  }

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t size() const { return node_->value.size(); }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t extent(std::size_t axis) const { return node_->shape[axis]; }

  const std::vector<S>& value() const { return node_->value; }
  std::vector<S>& mutable_value() { return node_->value; }

  bool requires_grad() const { return node_ && node_->requires_grad; }
  void set_requires_grad(bool b) { node_->requires_grad = b; }

  const std::vector<S>& grad() const {
    node_->ensure_grad();
    return node_->grad;
  }
  void zero_grad() {
    if (node_ && !node_->grad.empty())
      std::fill(node_->grad.begin(), node_->grad.end(), S(0));
  }

  S item() const {
    if (size() != 1) fail(ErrorCode::NotScalar, "item() on tensor of shape " + shape_str(shape()));
    return node_->value[0];
  }

  S at(std::size_t i) const { return node_->value[i]; }
  S at(std::size_t r, std::size_t c) const { return node_->value[r * node_->shape[1] + c]; }

  std::shared_ptr<TensorNode<S>> node() const { return node_; }

  // Deep copy with no tape linkage.
  Tensor<S> detached_copy() const {
    Tensor<S> t = from_data(node_->shape, node_->value, node_->requires_grad);
    return t;
  }

  template <typename T>
  Tensor<T> cast() const {
    std::vector<T> d(node_->value.size());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = static_cast<T>(node_->value[i]);
    return Tensor<T>::from(node_->shape, std::move(d), node_->requires_grad);
  }

 private:
  static Tensor from_data(Shape shape, std::vector<S> data, bool requires_grad) {
    Tensor t;
    t.node_ = std::make_shared<TensorNode<S>>();
    t.node_->shape = std::move(shape);
    if (data.empty())
      t.node_->value.assign(shape_numel(t.node_->shape), S(0));
    else
      t.node_->value = std::move(data);
    t.node_->requires_grad = requires_grad;
    return t;
  }

  std::shared_ptr<TensorNode<S>> node_;
};

// Watches min/max reductions for near-ties; used by the grad-check harness
// to skip coordinates where the subgradient is not well defined.
struct TieWatch {
  static thread_local bool active;
  static thread_local double threshold;
  static thread_local bool tripped;

  struct Scope {
    explicit Scope(double thr) {
      active = true;
      threshold = thr;
      tripped = false;
    }
    ~Scope() { active = false; }
  };
};

inline thread_local bool TieWatch::active = false;
inline thread_local double TieWatch::threshold = 0.0;
inline thread_local bool TieWatch::tripped = false;

// Append-only record of executed ops. Backward visits nodes in strict
// reverse append order, which is a valid topological order because every
// input tensor exists before the op that consumes it.
template <typename S>
class Tape {
 public:
  struct Node {
    const char* op;
    std::shared_ptr<TensorNode<S>> out;
    std::function<void()> vjp;  // reads out->grad, accumulates into inputs
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  static Tape* active() { return active_; }

  std::int64_t append(const char* op, std::shared_ptr<TensorNode<S>> out, std::function<void()> vjp) {
    nodes_.push_back(Node{op, std::move(out), std::move(vjp)});
    return static_cast<std::int64_t>(nodes_.size()) - 1;
  }

  std::size_t size() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

  // Node outputs are intermediates: their gradients are scratch space for
  // one backward pass. Clearing them up front makes repeated backward calls
  // add exactly one gradient contribution to each leaf per call.
  void clear_intermediate_grads(std::int64_t node_id) {
    for (std::int64_t i = 0; i <= node_id; ++i)
      nodes_[static_cast<std::size_t>(i)].out->grad.clear();
  }

  void backward_from(std::int64_t node_id) {
    for (std::int64_t i = node_id; i >= 0; --i) {
      Node& n = nodes_[static_cast<std::size_t>(i)];
      if (n.out->grad.empty()) continue;  // never seeded: no flow through here
      n.vjp();
    }
  }

  // RAII activation; ops record onto the innermost active tape.
  struct Scope {
    explicit Scope(Tape& t) : prev_(active_) { active_ = &t; }
    ~Scope() { active_ = prev_; }

   private:
    Tape* prev_;
  };

 private:
  static thread_local Tape* active_;
  std::vector<Node> nodes_;
};

template <typename S>
thread_local Tape<S>* Tape<S>::active_ = nullptr;

namespace detail {

template <typename S>
bool wants_grad(std::initializer_list<Tensor<S>> inputs) {
  if (Tape<S>::active() == nullptr) return false;
  for (const auto& t : inputs)
    if (t.requires_grad()) return true;
  return false;
}

// Builds the output tensor and, when gradients are needed, records the node.
// vjp_builder is only invoked in the recording case so that pure inference
// pays no closure cost.
template <typename S, typename VjpBuilder>
Tensor<S> make_result(const char* op, Shape shape, std::vector<S> value,
                      std::initializer_list<Tensor<S>> inputs, VjpBuilder&& vjp_builder) {
  Tensor<S> out = Tensor<S>::from(std::move(shape), std::move(value));
  if (wants_grad<S>(inputs)) {
    out.set_requires_grad(true);
    auto out_node = out.node();
    auto vjp = vjp_builder(out_node);
    out_node->tape_id = Tape<S>::active()->append(op, out_node, std::move(vjp));
  }
  return out;
}

template <typename S>
void accumulate(const std::shared_ptr<TensorNode<S>>& node, std::size_t idx, S v) {
  node->ensure_grad();
  node->grad[idx] += v;
}

inline void check(bool cond, ErrorCode code, const std::string& msg) {
  if (!cond) fail(code, msg);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Backward driver
// ---------------------------------------------------------------------------

// Seeds d loss/d loss = 1 and replays the tape. Requires a scalar that was
// recorded on the currently active tape. Repeated calls accumulate.
template <typename S>
void backward(const Tensor<S>& loss) {
  if (loss.size() != 1) fail(ErrorCode::NotScalar, "backward() needs a scalar loss");
  auto node = loss.node();
  Tape<S>* tape = Tape<S>::active();
  if (tape == nullptr || node->tape_id < 0)
    fail(ErrorCode::DetachedTensor, "loss is not recorded on the active tape");
  tape->clear_intermediate_grads(node->tape_id);
  node->ensure_grad();
  node->grad[0] += S(1);
  tape->backward_from(node->tape_id);
}

// ---------------------------------------------------------------------------
// Elementwise binary ops (same shape, or one side scalar)
// ---------------------------------------------------------------------------

namespace detail {

template <typename S>
void binary_shapes(const Tensor<S>& a, const Tensor<S>& b, const char* op) {
  if (a.shape() == b.shape() || a.size() == 1 || b.size() == 1) return;
  fail(ErrorCode::ShapeMismatch, std::string(op) + ": " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

// index helper for scalar-broadcast binary ops
inline std::size_t bidx(std::size_t i, std::size_t n) { return n == 1 ? 0 : i; }

}  // namespace detail

template <typename S>
Tensor<S> add(const Tensor<S>& a, const Tensor<S>& b) {
  detail::binary_shapes(a, b, "add");
  const std::size_t n = std::max(a.size(), b.size());
  std::vector<S> out(n);
  for (std::size_t i = 0; i < n; ++i)
    out[i] = a.at(detail::bidx(i, a.size())) + b.at(detail::bidx(i, b.size()));
  Shape shape = a.size() >= b.size() ? a.shape() : b.shape();
  return detail::make_result<S>("add", shape, std::move(out), {a, b}, [&](auto out_node) {
    auto an = a.node(), bn = b.node();
    bool ga = a.requires_grad(), gb = b.requires_grad();
    return [an, bn, out_node, ga, gb, n]() {
      for (std::size_t i = 0; i < n; ++i) {
        S g = out_node->grad[i];
        if (ga) detail::accumulate(an, detail::bidx(i, an->value.size()), g);
        if (gb) detail::accumulate(bn, detail::bidx(i, bn->value.size()), g);
      }
    };
  });
}

template <typename S>
Tensor<S> sub(const Tensor<S>& a, const Tensor<S>& b) {
  detail::binary_shapes(a, b, "sub");
  const std::size_t n = std::max(a.size(), b.size());
  std::vector<S> out(n);
  for (std::size_t i = 0; i < n; ++i)
    out[i] = a.at(detail::bidx(i, a.size())) - b.at(detail::bidx(i, b.size()));
  Shape shape = a.size() >= b.size() ? a.shape() : b.shape();
  return detail::make_result<S>("sub", shape, std::move(out), {a, b}, [&](auto out_node) {
    auto an = a.node(), bn = b.node();
    bool ga = a.requires_grad(), gb = b.requires_grad();
    return [an, bn, out_node, ga, gb, n]() {
      for (std::size_t i = 0; i < n; ++i) {
        S g = out_node->grad[i];
        if (ga) detail::accumulate(an, detail::bidx(i, an->value.size()), g);
        if (gb) detail::accumulate(bn, detail::bidx(i, bn->value.size()), -g);
      }
    };
  });
}

template <typename S>
Tensor<S> mul(const Tensor<S>& a, const Tensor<S>& b) {
  detail::binary_shapes(a, b, "mul");
  const std::size_t n = std::max(a.size(), b.size());
  std::vector<S> out(n);
  for (std::size_t i = 0; i < n; ++i)
    out[i] = a.at(detail::bidx(i, a.size())) * b.at(detail::bidx(i, b.size()));
  Shape shape = a.size() >= b.size() ? a.shape() : b.shape();
  return detail::make_result<S>("mul", shape, std::move(out), {a, b}, [&](auto out_node) {
    auto an = a.node(), bn = b.node();
    bool ga = a.requires_grad(), gb = b.requires_grad();
    return [an, bn, out_node, ga, gb, n]() {
      for (std::size_t i = 0; i < n; ++i) {
        S g = out_node->grad[i];
        std::size_t ia = detail::bidx(i, an->value.size());
        std::size_t ib = detail::bidx(i, bn->value.size());
        if (ga) detail::accumulate(an, ia, g * bn->value[ib]);
        if (gb) detail::accumulate(bn, ib, g * an->value[ia]);
      }
    };
  });
}

// Division. With eps == 0 a denominator entry of exactly zero is a domain
// error; loss code that owns its numerical guards passes an explicit eps.
template <typename S>
Tensor<S> div(const Tensor<S>& a, const Tensor<S>& b, double eps = 0.0) {
  detail::binary_shapes(a, b, "div");
  const std::size_t n = std::max(a.size(), b.size());
  if (eps == 0.0) {
    for (std::size_t i = 0; i < b.size(); ++i)
      detail::check(b.at(i) != S(0), ErrorCode::DomainError, "div by exact zero without epsilon guard");
  }
  std::vector<S> out(n);
  for (std::size_t i = 0; i < n; ++i)
    out[i] = a.at(detail::bidx(i, a.size())) / (b.at(detail::bidx(i, b.size())) + static_cast<S>(eps));
  Shape shape = a.size() >= b.size() ? a.shape() : b.shape();
  return detail::make_result<S>("div", shape, std::move(out), {a, b}, [&](auto out_node) {
    auto an = a.node(), bn = b.node();
    bool ga = a.requires_grad(), gb = b.requires_grad();
    S e = static_cast<S>(eps);
    return [an, bn, out_node, ga, gb, n, e]() {
      for (std::size_t i = 0; i < n; ++i) {
        S g = out_node->grad[i];
        std::size_t ia = detail::bidx(i, an->value.size());
        std::size_t ib = detail::bidx(i, bn->value.size());
        S denom = bn->value[ib] + e;
        if (ga) detail::accumulate(an, ia, g / denom);
        if (gb) detail::accumulate(bn, ib, -g * an->value[ia] / (denom * denom));
      }
    };
  });
}

template <typename S>
Tensor<S> neg(const Tensor<S>& a) {
  return sub(Tensor<S>::scalar(S(0)), a);
}

template <typename S>
Tensor<S> scale(const Tensor<S>& a, double c) {
  return mul(a, Tensor<S>::scalar(static_cast<S>(c)));
}

template <typename S>
Tensor<S> add_const(const Tensor<S>& a, double c) {
  return add(a, Tensor<S>::scalar(static_cast<S>(c)));
}

// ---------------------------------------------------------------------------
// Elementwise unary ops
// ---------------------------------------------------------------------------

template <typename S>
Tensor<S> exp(const Tensor<S>& a) {
  std::vector<S> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(a.at(i));
  return detail::make_result<S>("exp", a.shape(), std::move(out), {a}, [&](auto out_node) {
    auto an = a.node();
    return [an, out_node]() {
      for (std::size_t i = 0; i < out_node->value.size(); ++i)
        detail::accumulate(an, i, out_node->grad[i] * out_node->value[i]);
    };
  });
}

template <typename S>
Tensor<S> log(const Tensor<S>& a, double eps = 0.0) {
  std::vector<S> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    S x = a.at(i) + static_cast<S>(eps);
    detail::check(x > S(0), ErrorCode::DomainError,
                  eps == 0.0 ? "log of non-positive input without epsilon guard"
                             : "log input non-positive even with epsilon guard");
    out[i] = std::log(x);
  }
  return detail::make_result<S>("log", a.shape(), std::move(out), {a}, [&](auto out_node) {
    auto an = a.node();
    S e = static_cast<S>(eps);
    return [an, out_node, e]() {
      for (std::size_t i = 0; i < out_node->value.size(); ++i)
        detail::accumulate(an, i, out_node->grad[i] / (an->value[i] + e));
    };
  });
}

// max(x, c) with constant floor. The gradient passes through unchanged where
// x > c and is zero on the clamped side; the kink at x == c routes to zero.
template <typename S>
Tensor<S> clamp_min(const Tensor<S>& a, double c) {
  S floor = static_cast<S>(c);
  std::vector<S> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    S x = a.at(i);
    out[i] = x > floor ? x : floor;
    if (TieWatch::active && std::abs(static_cast<double>(x) - c) < TieWatch::threshold)
      TieWatch::tripped = true;
  }
  return detail::make_result<S>("clamp_min", a.shape(), std::move(out), {a}, [&](auto out_node) {
    auto an = a.node();
    return [an, out_node, floor]() {
      for (std::size_t i = 0; i < out_node->value.size(); ++i)
        if (an->value[i] > floor) detail::accumulate(an, i, out_node->grad[i]);
    };
  });
}

// x^c with constant exponent. Negative bases are rejected for non-integer c.
template <typename S>
Tensor<S> pow_const(const Tensor<S>& a, double c) {
  std::vector<S> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    S x = a.at(i);
    if (x < S(0) && c != std::floor(c))
      fail(ErrorCode::DomainError, "pow of negative base with non-integer exponent");
    out[i] = static_cast<S>(std::pow(static_cast<double>(x), c));
  }
  return detail::make_result<S>("pow", a.shape(), std::move(out), {a}, [&](auto out_node) {
    auto an = a.node();
    return [an, out_node, c]() {
      if (c == 0.0) return;  // derivative identically zero
      for (std::size_t i = 0; i < out_node->value.size(); ++i) {
        double x = static_cast<double>(an->value[i]);
        double d = c * std::pow(x, c - 1.0);
        detail::accumulate(an, i, static_cast<S>(d) * out_node->grad[i]);
      }
    };
  });
}

// Exact GELU, x * Phi(x).
template <typename S>
Tensor<S> gelu(const Tensor<S>& a) {
  std::vector<S> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    double x = static_cast<double>(a.at(i));
    out[i] = static_cast<S>(x * 0.5 * (1.0 + std::erf(x / 1.4142135623730951)));
  }
  return detail::make_result<S>("gelu", a.shape(), std::move(out), {a}, [&](auto out_node) {
    auto an = a.node();
    return [an, out_node]() {
      constexpr double kInvSqrt2 = 0.7071067811865476;
      constexpr double kInvSqrt2Pi = 0.3989422804014327;
      for (std::size_t i = 0; i < out_node->value.size(); ++i) {
        double x = static_cast<double>(an->value[i]);
        double cdf = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
        double pdf = kInvSqrt2Pi * std::exp(-0.5 * x * x);
        detail::accumulate(an, i, static_cast<S>(cdf + x * pdf) * out_node->grad[i]);
      }
    };
  });
}

// ---------------------------------------------------------------------------
// Reductions
// ---------------------------------------------------------------------------

namespace detail {

// Maps a rank-1/2 tensor to (rows, cols) with cols the fastest axis.
template <typename S>
void as2d(const Tensor<S>& a, std::size_t& rows, std::size_t& cols) {
  if (a.rank() == 1) {
    rows = 1;
    cols = a.extent(0);
  } else if (a.rank() == 2) {
    rows = a.extent(0);
    cols = a.extent(1);
  } else {
    fail(ErrorCode::ShapeMismatch, "op defined for rank 1 or 2, got " + shape_str(a.shape()));
  }
}

}  // namespace detail

// Sum of all entries -> scalar.
template <typename S>
Tensor<S> sum(const Tensor<S>& a) {
  S acc = std::accumulate(a.value().begin(), a.value().end(), S(0));
  return detail::make_result<S>("sum", {1}, {acc}, {a}, [&](auto out_node) {
    auto an = a.node();
    return [an, out_node]() {
      S g = out_node->grad[0];
      for (std::size_t i = 0; i < an->value.size(); ++i) detail::accumulate(an, i, g);
    };
  });
}

// Sum along one axis of a rank-2 tensor. axis=0 collapses rows -> [cols],
// axis=1 collapses cols -> [rows].
template <typename S>
Tensor<S> sum(const Tensor<S>& a, int axis) {
  detail::check(a.rank() == 2, ErrorCode::ShapeMismatch, "axis sum needs rank 2");
  std::size_t rows = a.extent(0), cols = a.extent(1);
  if (axis == 0) {
    std::vector<S> out(cols, S(0));
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c) out[c] += a.at(r, c);
    return detail::make_result<S>("sum0", {cols}, std::move(out), {a}, [&](auto out_node) {
      auto an = a.node();
      return [an, out_node, rows, cols]() {
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t c = 0; c < cols; ++c)
            detail::accumulate(an, r * cols + c, out_node->grad[c]);
      };
    });
  }
  detail::check(axis == 1, ErrorCode::ShapeMismatch, "axis must be 0 or 1");
  std::vector<S> out(rows, S(0));
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out[r] += a.at(r, c);
  return detail::make_result<S>("sum1", {rows}, std::move(out), {a}, [&](auto out_node) {
    auto an = a.node();
    return [an, out_node, rows, cols]() {
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c)
          detail::accumulate(an, r * cols + c, out_node->grad[r]);
    };
  });
}

template <typename S>
Tensor<S> mean(const Tensor<S>& a) {
  return scale(sum(a), 1.0 / static_cast<double>(a.size()));
}

template <typename S>
Tensor<S> mean(const Tensor<S>& a, int axis) {
  std::size_t n = a.extent(static_cast<std::size_t>(axis));
  return scale(sum(a, axis), 1.0 / static_cast<double>(n));
}

namespace detail {

// Shared min/max kernel. cmp(a, b) returns true when a is strictly more
// extremal than b. Ties route the gradient to the first extremal index.
template <typename S, typename Cmp>
Tensor<S> extremum(const char* op, const Tensor<S>& a, Cmp cmp) {
  detail::check(a.size() > 0, ErrorCode::ShapeMismatch, "empty extremum");
  std::size_t best = 0;
  for (std::size_t i = 1; i < a.size(); ++i)
    if (cmp(a.at(i), a.at(best))) best = i;
  if (TieWatch::active && a.size() > 1) {
    double runner_gap = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (i == best) continue;
      runner_gap = std::min(runner_gap, std::abs(static_cast<double>(a.at(best)) - static_cast<double>(a.at(i))));
    }
    if (runner_gap < TieWatch::threshold) TieWatch::tripped = true;
  }
  return detail::make_result<S>(op, {1}, {a.at(best)}, {a}, [&](auto out_node) {
    auto an = a.node();
    return [an, out_node, best]() { detail::accumulate(an, best, out_node->grad[0]); };
  });
}

}  // namespace detail

template <typename S>
Tensor<S> max(const Tensor<S>& a) {
  return detail::extremum("max", a, [](S x, S y) { return x > y; });
}

template <typename S>
Tensor<S> min(const Tensor<S>& a) {
  return detail::extremum("min", a, [](S x, S y) { return x < y; });
}

// Rowwise extremum of a rank-2 tensor (axis=1) -> [rows].
template <typename S, typename Cmp>
Tensor<S> rowwise_extremum(const char* op, const Tensor<S>& a, Cmp cmp) {
  detail::check(a.rank() == 2, ErrorCode::ShapeMismatch, "rowwise extremum needs rank 2");
  std::size_t rows = a.extent(0), cols = a.extent(1);
  std::vector<S> out(rows);
  std::vector<std::size_t> arg(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < cols; ++c)
      if (cmp(a.at(r, c), a.at(r, best))) best = c;
    arg[r] = best;
    out[r] = a.at(r, best);
    if (TieWatch::active && cols > 1) {
      double gap = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < cols; ++c) {
        if (c == best) continue;
        gap = std::min(gap, std::abs(static_cast<double>(a.at(r, best)) - static_cast<double>(a.at(r, c))));
      }
      if (gap < TieWatch::threshold) TieWatch::tripped = true;
    }
  }
  return detail::make_result<S>(op, {rows}, std::move(out), {a}, [&](auto out_node) {
    auto an = a.node();
    return [an, out_node, arg, cols]() {
      for (std::size_t r = 0; r < arg.size(); ++r)
        detail::accumulate(an, r * cols + arg[r], out_node->grad[r]);
    };
  });
}

template <typename S>
Tensor<S> row_max(const Tensor<S>& a) {
  return rowwise_extremum("row_max", a, [](S x, S y) { return x > y; });
}

template <typename S>
Tensor<S> row_min(const Tensor<S>& a) {
  return rowwise_extremum("row_min", a, [](S x, S y) { return x < y; });
}

// ---------------------------------------------------------------------------
// Matrix ops
// ---------------------------------------------------------------------------

template <typename S>
Tensor<S> matmul(const Tensor<S>& a, const Tensor<S>& b) {
  detail::check(a.rank() == 2 && b.rank() == 2, ErrorCode::ShapeMismatch, "matmul needs rank-2 operands");
  std::size_t m = a.extent(0), k = a.extent(1), k2 = b.extent(0), n = b.extent(1);
  detail::check(k == k2, ErrorCode::ShapeMismatch,
                "matmul inner extents differ: " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  std::vector<S> out(m * n, S(0));
  const auto& av = a.value();
  const auto& bv = b.value();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p) {
      S aip = av[i * k + p];
      if (aip == S(0)) continue;
      const S* brow = &bv[p * n];
      S* orow = &out[i * n];
      for (std::size_t j = 0; j < n; ++j) orow[j] += aip * brow[j];
    }
  return detail::make_result<S>("matmul", {m, n}, std::move(out), {a, b}, [&](auto out_node) {
    auto an = a.node(), bn = b.node();
    bool ga = a.requires_grad(), gb = b.requires_grad();
    return [an, bn, out_node, ga, gb, m, k, n]() {
      const auto& g = out_node->grad;
      if (ga) {
        an->ensure_grad();
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < n; ++j) {
            S gij = g[i * n + j];
            if (gij == S(0)) continue;
            for (std::size_t p = 0; p < k; ++p) an->grad[i * k + p] += gij * bn->value[p * n + j];
          }
      }
      if (gb) {
        bn->ensure_grad();
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t p = 0; p < k; ++p) {
            S aip = an->value[i * k + p];
            if (aip == S(0)) continue;
            for (std::size_t j = 0; j < n; ++j) bn->grad[p * n + j] += aip * g[i * n + j];
          }
      }
    };
  });
}

template <typename S>
Tensor<S> transpose(const Tensor<S>& a) {
  detail::check(a.rank() == 2, ErrorCode::ShapeMismatch, "transpose needs rank 2");
  std::size_t rows = a.extent(0), cols = a.extent(1);
  std::vector<S> out(rows * cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out[c * rows + r] = a.at(r, c);
  return detail::make_result<S>("transpose", {cols, rows}, std::move(out), {a}, [&](auto out_node) {
    auto an = a.node();
    return [an, out_node, rows, cols]() {
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c)
          detail::accumulate(an, r * cols + c, out_node->grad[c * rows + r]);
    };
  });
}

// ---------------------------------------------------------------------------
// Shape manipulation
// ---------------------------------------------------------------------------

// Contiguous range along an axis of a rank-2 tensor (or a rank-1 slice).
template <typename S>
Tensor<S> slice(const Tensor<S>& a, int axis, std::size_t start, std::size_t len) {
  if (a.rank() == 1) {
    detail::check(axis == 0 && start + len <= a.extent(0), ErrorCode::ShapeMismatch, "slice out of range");
    std::vector<S> out(a.value().begin() + start, a.value().begin() + start + len);
    return detail::make_result<S>("slice", {len}, std::move(out), {a}, [&](auto out_node) {
      auto an = a.node();
      return [an, out_node, start, len]() {
        for (std::size_t i = 0; i < len; ++i) detail::accumulate(an, start + i, out_node->grad[i]);
      };
    });
  }
  detail::check(a.rank() == 2, ErrorCode::ShapeMismatch, "slice needs rank 1 or 2");
  std::size_t rows = a.extent(0), cols = a.extent(1);
  if (axis == 0) {
    detail::check(start + len <= rows, ErrorCode::ShapeMismatch, "row slice out of range");
    std::vector<S> out(a.value().begin() + start * cols, a.value().begin() + (start + len) * cols);
    return detail::make_result<S>("slice0", {len, cols}, std::move(out), {a}, [&](auto out_node) {
      auto an = a.node();
      return [an, out_node, start, len, cols]() {
        for (std::size_t i = 0; i < len * cols; ++i)
          detail::accumulate(an, start * cols + i, out_node->grad[i]);
      };
    });
  }
  detail::check(axis == 1 && start + len <= cols, ErrorCode::ShapeMismatch, "col slice out of range");
  std::vector<S> out(rows * len);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < len; ++c) out[r * len + c] = a.at(r, start + c);
  return detail::make_result<S>("slice1", {rows, len}, std::move(out), {a}, [&](auto out_node) {
    auto an = a.node();
    return [an, out_node, start, len, rows, cols]() {
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < len; ++c)
          detail::accumulate(an, r * cols + start + c, out_node->grad[r * len + c]);
    };
  });
}

// Row r of a rank-2 tensor as a rank-1 vector.
template <typename S>
Tensor<S> row(const Tensor<S>& a, std::size_t r) {
  detail::check(a.rank() == 2 && r < a.extent(0), ErrorCode::ShapeMismatch, "row out of range");
  std::size_t cols = a.extent(1);
  std::vector<S> out(a.value().begin() + r * cols, a.value().begin() + (r + 1) * cols);
  return detail::make_result<S>("row", {cols}, std::move(out), {a}, [&](auto out_node) {
    auto an = a.node();
    return [an, out_node, r, cols]() {
      for (std::size_t c = 0; c < cols; ++c) detail::accumulate(an, r * cols + c, out_node->grad[c]);
    };
  });
}

// Concatenation along axis 0 (rank-1: vector chain, rank-2: stacked rows)
// or axis 1 (rank-2: side by side).
template <typename S>
Tensor<S> concat(const std::vector<Tensor<S>>& parts, int axis = 0) {
  detail::check(!parts.empty(), ErrorCode::ShapeMismatch, "concat of nothing");
  std::size_t rank = parts[0].rank();
  for (const auto& p : parts)
    detail::check(p.rank() == rank, ErrorCode::ShapeMismatch, "concat rank mismatch");

  bool wants = false;
  if (Tape<S>::active())
    for (const auto& p : parts)
      if (p.requires_grad()) wants = true;

  auto record = [&](Shape shape, std::vector<S> value, auto vjp_builder) {
    Tensor<S> out = Tensor<S>::from(std::move(shape), std::move(value));
    if (wants) {
      out.set_requires_grad(true);
      auto out_node = out.node();
      out_node->tape_id = Tape<S>::active()->append("concat", out_node, vjp_builder(out_node));
    }
    return out;
  };

  if (rank == 1 || axis == 0) {
    std::size_t cols = rank == 2 ? parts[0].extent(1) : 1;
    std::size_t total = 0;
    for (const auto& p : parts) {
      if (rank == 2)
        detail::check(p.extent(1) == cols, ErrorCode::ShapeMismatch, "concat col mismatch");
      total += p.extent(0);
    }
    std::vector<S> out;
    out.reserve(total * cols);
    for (const auto& p : parts) out.insert(out.end(), p.value().begin(), p.value().end());
    Shape shape = rank == 2 ? Shape{total, cols} : Shape{total};
    std::vector<std::shared_ptr<TensorNode<S>>> nodes;
    for (const auto& p : parts) nodes.push_back(p.node());
    return record(std::move(shape), std::move(out), [&](auto out_node) {
      return [nodes, out_node]() {
        std::size_t off = 0;
        for (const auto& n : nodes) {
          if (n->requires_grad)
            for (std::size_t i = 0; i < n->value.size(); ++i)
              detail::accumulate(n, i, out_node->grad[off + i]);
          off += n->value.size();
        }
      };
    });
  }

  detail::check(rank == 2 && axis == 1, ErrorCode::ShapeMismatch, "concat axis must be 0 or 1");
  std::size_t rows = parts[0].extent(0);
  std::size_t total_cols = 0;
  for (const auto& p : parts) {
    detail::check(p.extent(0) == rows, ErrorCode::ShapeMismatch, "concat row mismatch");
    total_cols += p.extent(1);
  }
  std::vector<S> out(rows * total_cols);
  std::size_t off = 0;
  for (const auto& p : parts) {
    std::size_t pc = p.extent(1);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < pc; ++c) out[r * total_cols + off + c] = p.at(r, c);
    off += pc;
  }
  std::vector<std::shared_ptr<TensorNode<S>>> nodes;
  for (const auto& p : parts) nodes.push_back(p.node());
  return record(Shape{rows, total_cols}, std::move(out), [&](auto out_node) {
    return [nodes, out_node, rows, total_cols]() {
      std::size_t coff = 0;
      for (const auto& n : nodes) {
        std::size_t pc = n->shape[1];
        if (n->requires_grad)
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < pc; ++c)
              detail::accumulate(n, r * pc + c, out_node->grad[r * total_cols + coff + c]);
        coff += pc;
      }
    };
  });
}

// Stack rank-1 vectors of equal length into a rank-2 matrix, one per row.
template <typename S>
Tensor<S> stack_rows(const std::vector<Tensor<S>>& rows_in) {
  detail::check(!rows_in.empty(), ErrorCode::ShapeMismatch, "stack of nothing");
  std::size_t cols = rows_in[0].size();
  std::vector<S> out;
  out.reserve(rows_in.size() * cols);
  bool wants = false;
  for (const auto& r : rows_in) {
    detail::check(r.rank() == 1 && r.size() == cols, ErrorCode::ShapeMismatch, "stack length mismatch");
    out.insert(out.end(), r.value().begin(), r.value().end());
    if (Tape<S>::active() && r.requires_grad()) wants = true;
  }
  Tensor<S> result = Tensor<S>::from({rows_in.size(), cols}, std::move(out));
  if (wants) {
    result.set_requires_grad(true);
    std::vector<std::shared_ptr<TensorNode<S>>> nodes;
    for (const auto& r : rows_in) nodes.push_back(r.node());
    auto out_node = result.node();
    out_node->tape_id = Tape<S>::active()->append("stack", out_node, [nodes, out_node, cols]() {
      for (std::size_t r = 0; r < nodes.size(); ++r)
        if (nodes[r]->requires_grad)
          for (std::size_t c = 0; c < cols; ++c)
            detail::accumulate(nodes[r], c, out_node->grad[r * cols + c]);
    });
  }
  return result;
}

// Tiles a vector (or scalar) into a rank-2 shape; `axis` is the new axis.
// axis=0 tiles a [n] vector into [m,n] identical rows; axis=1 tiles a [m]
// vector into [m,n] identical columns. Backward sums over the tiled axis.
template <typename S>
Tensor<S> broadcast(const Tensor<S>& a, Shape target, int axis) {
  detail::check(target.size() == 2, ErrorCode::ShapeMismatch, "broadcast target must be rank 2");
  std::size_t m = target[0], n = target[1];
  std::vector<S> out(m * n);
  if (a.size() == 1) {
    std::fill(out.begin(), out.end(), a.at(0));
    return detail::make_result<S>("broadcast", std::move(target), std::move(out), {a}, [&](auto out_node) {
      auto an = a.node();
      return [an, out_node]() {
        S acc = S(0);
        for (S g : out_node->grad) acc += g;
        detail::accumulate(an, std::size_t{0}, acc);
      };
    });
  }
  detail::check(a.rank() == 1, ErrorCode::ShapeMismatch, "broadcast source must be rank 1 or scalar");
  if (axis == 0) {
    detail::check(a.size() == n, ErrorCode::ShapeMismatch, "broadcast along rows: length must equal cols");
    for (std::size_t r = 0; r < m; ++r)
      for (std::size_t c = 0; c < n; ++c) out[r * n + c] = a.at(c);
    return detail::make_result<S>("broadcast0", std::move(target), std::move(out), {a}, [&](auto out_node) {
      auto an = a.node();
      return [an, out_node, m, n]() {
        for (std::size_t c = 0; c < n; ++c) {
          S acc = S(0);
          for (std::size_t r = 0; r < m; ++r) acc += out_node->grad[r * n + c];
          detail::accumulate(an, c, acc);
        }
      };
    });
  }
  detail::check(axis == 1 && a.size() == m, ErrorCode::ShapeMismatch,
                "broadcast along cols: length must equal rows");
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t c = 0; c < n; ++c) out[r * n + c] = a.at(r);
  return detail::make_result<S>("broadcast1", std::move(target), std::move(out), {a}, [&](auto out_node) {
    auto an = a.node();
    return [an, out_node, m, n]() {
      for (std::size_t r = 0; r < m; ++r) {
        S acc = S(0);
        for (std::size_t c = 0; c < n; ++c) acc += out_node->grad[r * n + c];
        detail::accumulate(an, r, acc);
      }
    };
  });
}

// ---------------------------------------------------------------------------
// Softmax and normalization
// ---------------------------------------------------------------------------

// Stable softmax over a rank-1 vector or over each row of a rank-2 tensor.
template <typename S>
Tensor<S> softmax(const Tensor<S>& a) {
  std::size_t rows, cols;
  detail::as2d(a, rows, cols);
  std::vector<S> out(a.size());
  for (std::size_t r = 0; r < rows; ++r) {
    S mx = a.at(r * cols);
    for (std::size_t c = 1; c < cols; ++c) mx = std::max(mx, a.at(r * cols + c));
    S denom = S(0);
    for (std::size_t c = 0; c < cols; ++c) {
      out[r * cols + c] = std::exp(a.at(r * cols + c) - mx);
      denom += out[r * cols + c];
    }
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] /= denom;
  }
  return detail::make_result<S>("softmax", a.shape(), std::move(out), {a}, [&](auto out_node) {
    auto an = a.node();
    return [an, out_node, rows, cols]() {
      for (std::size_t r = 0; r < rows; ++r) {
        S dot = S(0);
        for (std::size_t c = 0; c < cols; ++c)
          dot += out_node->grad[r * cols + c] * out_node->value[r * cols + c];
        for (std::size_t c = 0; c < cols; ++c) {
          std::size_t i = r * cols + c;
          detail::accumulate(an, i, out_node->value[i] * (out_node->grad[i] - dot));
        }
      }
    };
  });
}

// L2 normalization of a rank-1 vector or of each row of a rank-2 tensor.
// Slices with norm below 1e-8 map to the basis vector e1 and carry zero
// gradient; this keeps degenerate inputs finite and deterministic.
template <typename S>
Tensor<S> l2_normalize(const Tensor<S>& a) {
  std::size_t rows, cols;
  detail::as2d(a, rows, cols);
  std::vector<S> out(a.size());
  std::vector<S> norms(rows);
  std::vector<bool> guarded(rows, false);
  for (std::size_t r = 0; r < rows; ++r) {
    double ss = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      double x = static_cast<double>(a.at(r * cols + c));
      ss += x * x;
    }
    double norm = std::sqrt(ss);
    norms[r] = static_cast<S>(norm);
    if (norm < 1e-8) {
      guarded[r] = true;
      for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] = c == 0 ? S(1) : S(0);
    } else {
      for (std::size_t c = 0; c < cols; ++c)
        out[r * cols + c] = static_cast<S>(static_cast<double>(a.at(r * cols + c)) / norm);
    }
  }
  return detail::make_result<S>("l2norm", a.shape(), std::move(out), {a}, [&](auto out_node) {
    auto an = a.node();
    return [an, out_node, rows, cols, norms, guarded]() {
      for (std::size_t r = 0; r < rows; ++r) {
        if (guarded[r]) continue;
        S dot = S(0);
        for (std::size_t c = 0; c < cols; ++c)
          dot += out_node->grad[r * cols + c] * out_node->value[r * cols + c];
        for (std::size_t c = 0; c < cols; ++c) {
          std::size_t i = r * cols + c;
          detail::accumulate(an, i, (out_node->grad[i] - dot * out_node->value[i]) / norms[r]);
        }
      }
    };
  });
}

// ---------------------------------------------------------------------------
// Rowwise min-max attention normalization
// ---------------------------------------------------------------------------

namespace detail {

// Shared forward/backward for the min-max row normalization. With
// sparse=true, entries below 1/cols are zeroed after normalization (no
// renormalization); their gradient is likewise zero on the zeroed side of
// the threshold. Rows whose spread is below 1e-12 produce a uniform 1/cols
// attention row and propagate no gradient.
template <typename S>
Tensor<S> rownorm_minmax_impl(const char* op, const Tensor<S>& s, bool sparse) {
  check(s.rank() == 2, ErrorCode::ShapeMismatch, "minmax normalization needs rank 2");
  std::size_t rows = s.extent(0), cols = s.extent(1);
  check(cols > 0, ErrorCode::ShapeMismatch, "minmax normalization of empty rows");
  const S uniform = S(1) / static_cast<S>(cols);
  const S cutoff = uniform;

  std::vector<S> out(rows * cols);
  std::vector<std::size_t> imax(rows), imin(rows);
  std::vector<S> spread(rows);
  std::vector<bool> degenerate(rows, false);
  std::vector<bool> dropped(sparse ? rows * cols : 0, false);

  for (std::size_t r = 0; r < rows; ++r) {
    std::size_t bmax = 0, bmin = 0;
    for (std::size_t c = 1; c < cols; ++c) {
      if (s.at(r, c) > s.at(r, bmax)) bmax = c;
      if (s.at(r, c) < s.at(r, bmin)) bmin = c;
    }
    imax[r] = bmax;
    imin[r] = bmin;
    double d = static_cast<double>(s.at(r, bmax)) - static_cast<double>(s.at(r, bmin));
    spread[r] = static_cast<S>(d);
    if (TieWatch::active && cols > 1) {
      double gap_max = std::numeric_limits<double>::infinity();
      double gap_min = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < cols; ++c) {
        if (c != bmax)
          gap_max = std::min(gap_max, std::abs(static_cast<double>(s.at(r, bmax)) - static_cast<double>(s.at(r, c))));
        if (c != bmin)
          gap_min = std::min(gap_min, std::abs(static_cast<double>(s.at(r, bmin)) - static_cast<double>(s.at(r, c))));
      }
      if (gap_max < TieWatch::threshold || gap_min < TieWatch::threshold) TieWatch::tripped = true;
      if (d < 1e-12 + TieWatch::threshold) TieWatch::tripped = true;
    }
    if (d < 1e-12) {
      degenerate[r] = true;
      for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] = uniform;
      continue;
    }
    for (std::size_t c = 0; c < cols; ++c) {
      S a = static_cast<S>((static_cast<double>(s.at(r, c)) - static_cast<double>(s.at(r, bmin))) / d);
      if (sparse) {
        if (TieWatch::active &&
            std::abs(static_cast<double>(a) - static_cast<double>(cutoff)) < TieWatch::threshold / std::max(d, 1e-12))
          TieWatch::tripped = true;
        if (a < cutoff) {
          dropped[r * cols + c] = true;
          a = S(0);
        }
      }
      out[r * cols + c] = a;
    }
  }

  return make_result<S>(op, s.shape(), std::move(out), {s}, [&](auto out_node) {
    auto sn = s.node();
    return [sn, out_node, rows, cols, imax, imin, spread, degenerate, dropped, sparse]() {
      for (std::size_t r = 0; r < rows; ++r) {
        if (degenerate[r]) continue;
        S d = spread[r];
        S acc_max = S(0), acc_min = S(0);
        for (std::size_t c = 0; c < cols; ++c) {
          std::size_t i = r * cols + c;
          if (sparse && dropped[i]) continue;
          S g = out_node->grad[i];
          if (g == S(0)) continue;
          S a = out_node->value[i];
          accumulate(sn, i, g / d);
          acc_max += g * (-a) / d;
          acc_min += g * (a - S(1)) / d;
        }
        if (acc_max != S(0)) accumulate(sn, r * cols + imax[r], acc_max);
        if (acc_min != S(0)) accumulate(sn, r * cols + imin[r], acc_min);
      }
    };
  });
}

}  // namespace detail

// a = (s - rowmin) / (rowmax - rowmin), rowwise.
template <typename S>
Tensor<S> rownorm_minmax(const Tensor<S>& s) {
  return detail::rownorm_minmax_impl<S>("minmax", s, false);
}

// Min-max normalization followed by zeroing of entries below 1/cols.
template <typename S>
Tensor<S> rownorm_minmax_sparse(const Tensor<S>& s) {
  return detail::rownorm_minmax_impl<S>("minmax_sparse", s, true);
}

// ---------------------------------------------------------------------------
// Embedding lookup
// ---------------------------------------------------------------------------

// Gathers rows of `table` ([vocab, d]) by id. Backward scatter-adds into the
// table rows, so repeated ids accumulate.
template <typename S>
Tensor<S> embed_rows(const Tensor<S>& table, const std::vector<std::uint32_t>& ids) {
  detail::check(table.rank() == 2, ErrorCode::ShapeMismatch, "embedding table must be rank 2");
  std::size_t vocab = table.extent(0), d = table.extent(1);
  std::vector<S> out(ids.size() * d);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    detail::check(ids[i] < vocab, ErrorCode::ShapeMismatch, "token id out of vocabulary");
    std::copy_n(table.value().begin() + ids[i] * d, d, out.begin() + i * d);
  }
  return detail::make_result<S>("embed", {ids.size(), d}, std::move(out), {table}, [&](auto out_node) {
    auto tn = table.node();
    return [tn, out_node, ids, d]() {
      for (std::size_t i = 0; i < ids.size(); ++i)
        for (std::size_t c = 0; c < d; ++c)
          detail::accumulate(tn, ids[i] * d + c, out_node->grad[i * d + c]);
    };
  });
}

// ---------------------------------------------------------------------------
// Small conveniences used throughout the losses
// ---------------------------------------------------------------------------

// Dot product of two equal-length vectors -> scalar.
template <typename S>
Tensor<S> dot(const Tensor<S>& a, const Tensor<S>& b) {
  return sum(mul(a, b));
}

// Rowwise dot of two equal-shape matrices -> [rows].
template <typename S>
Tensor<S> row_dot(const Tensor<S>& a, const Tensor<S>& b) {
  return sum(mul(a, b), 1);
}

}  // namespace fsc
