// Copyright 2026 The press2dyn Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "press2dyn/diffgraph/tensor.hpp"
#include "press2dyn/errors.hpp"

namespace press2dyn::diff {

// A named tensor owned by a ParamStore. Non-trainable entries hold
// running statistics (batch norm) and are skipped by the optimizer.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  Tensor adam_m;
  Tensor adam_v;
  bool trainable = true;
};

class ParamStore {
 public:
  ParamStore() = default;
  ParamStore(const ParamStore& other) { *this = other; }
  ParamStore& operator=(const ParamStore& other) {
    if (this == &other) return *this;
    params_.clear();
    index_.clear();
    for (const auto& p : other.params_) {
      index_[p->name] = params_.size();
      params_.push_back(std::make_unique<Parameter>(*p));
    }
    step_ = other.step_;
    return *this;
  }
  ParamStore(ParamStore&&) noexcept = default;
  ParamStore& operator=(ParamStore&&) noexcept = default;

  Parameter& add(std::string name, Tensor init, bool trainable = true) {
    if (index_.count(name)) throw std::invalid_argument("duplicate parameter '" + name + "'");
    auto p = std::make_unique<Parameter>();
    p->name = name;
    p->grad = Tensor(init.shape());
    p->adam_m = Tensor(init.shape());
    p->adam_v = Tensor(init.shape());
    p->value = std::move(init);
    p->trainable = trainable;
    index_[name] = params_.size();
    params_.push_back(std::move(p));
    return *params_.back();
  }

  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  Parameter& get(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::out_of_range("no parameter '" + name + "'");
    return *params_[it->second];
  }
  const Parameter& get(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::out_of_range("no parameter '" + name + "'");
    return *params_[it->second];
  }

  std::size_t size() const { return params_.size(); }
  Parameter& operator[](std::size_t i) { return *params_[i]; }
  const Parameter& operator[](std::size_t i) const { return *params_[i]; }

  // Trainable scalar count.
  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : params_)
      if (p->trainable) n += p->value.size();
    return n;
  }

  void zero_grad() {
    for (auto& p : params_) p->grad.fill(0.0);
  }

  std::int64_t step() const { return step_; }
  void set_step(std::int64_t s) { step_ = s; }

  // Snapshot of values only, for best-checkpoint tracking.
  std::vector<Tensor> values() const {
    std::vector<Tensor> out;
    out.reserve(params_.size());
    for (const auto& p : params_) out.push_back(p->value);
    return out;
  }
  void restore(const std::vector<Tensor>& values) {
    if (values.size() != params_.size()) throw std::invalid_argument("snapshot size mismatch");
    for (std::size_t i = 0; i < values.size(); ++i) params_[i]->value = values[i];
  }

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
  std::map<std::string, std::size_t> index_;
  std::int64_t step_ = 0;
};

enum class Mode { kTrain, kEval };

struct Var {
  static constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
  std::size_t id = kNone;
};

// Define-by-run reverse-mode tape. Nodes are appended by ops in
// topological order; backward() walks them in reverse.
class Graph {
 public:
  using Backward = std::function<void(Graph&, const Tensor& out_grad)>;

  explicit Graph(Mode mode = Mode::kEval, std::uint64_t seed = 0) : mode_(mode), rng_(seed) {}

  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Mode mode() const { return mode_; }
  bool training() const { return mode_ == Mode::kTrain; }
  std::mt19937_64& rng() { return rng_; }

  Var constant(Tensor value) { return push_leaf(std::move(value), false); }
  Var variable(Tensor value) { return push_leaf(std::move(value), true); }

  // Leaf aliasing a parameter. Gradients accumulate straight into p.grad.
  Var param(Parameter& p) {
    Node n;
    n.ext_value = &p.value;
    n.ext_grad = &p.grad;
    n.requires_grad = p.trainable;
    n.op = "param";
    nodes_.push_back(std::move(n));
    return {nodes_.size() - 1};
  }

  const Tensor& value(Var v) const {
    const Node& n = node(v);
    return n.ext_value ? *n.ext_value : n.value;
  }

  bool requires_grad(Var v) const { return node(v).requires_grad; }

  bool has_grad(Var v) const {
    const Node& n = node(v);
    return n.ext_grad != nullptr || !n.grad.empty();
  }

  const Tensor& grad(Var v) const {
    const Node& n = node(v);
    if (n.ext_grad) return *n.ext_grad;
    if (n.grad.empty()) throw std::logic_error("node has no gradient");
    return n.grad;
  }

  // Zero-initialized on first touch. Only meaningful for nodes that require grad.
  Tensor& grad_mut(Var v) {
    Node& n = node(v);
    if (n.ext_grad) return *n.ext_grad;
    if (n.grad.empty()) n.grad = Tensor(value(v).shape());
    return n.grad;
  }

  // Appends an op node. Every op output is checked for finiteness here.
  Var push(Tensor value, std::string_view op, std::initializer_list<Var> inputs, Backward backward) {
    if (!value.all_finite())
      throw NumericError(std::string("op '") + std::string(op) + "' produced a non-finite value");
    bool needs = false;
    for (Var in : inputs) needs = needs || node(in).requires_grad;
    Node n;
    n.value = std::move(value);
    n.op = op;
    n.requires_grad = needs;
    if (needs) n.backward = std::move(backward);
    nodes_.push_back(std::move(n));
    return {nodes_.size() - 1};
  }

  void backward(Var loss) {
    if (value(loss).size() != 1) throw std::invalid_argument("backward() needs a scalar loss");
    if (!requires_grad(loss)) return;
    grad_mut(loss)[0] += 1.0;
    for (std::size_t i = loss.id + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (!n.backward || n.grad.empty()) continue;
      n.backward(*this, n.grad);
    }
  }

  // Hash of the sign pattern at every piecewise-linear activation input.
  // Finite-difference checks compare it across perturbations to detect
  // evaluations that straddle a kink.
  void record_kinks(const Tensor& pre) {
    std::uint64_t h = kink_signature_;
    for (double v : pre.values()) {
      h ^= (v > 0.0) ? 0x9e3779b97f4a7c15ULL : 0x7f4a7c159e3779b9ULL;
      h *= 0x100000001b3ULL;
    }
    kink_signature_ = h;
  }
  std::uint64_t kink_signature() const { return kink_signature_; }

  std::size_t node_count() const { return nodes_.size(); }
  std::string_view op_name(Var v) const { return node(v).op; }

 private:
  struct Node {
    Tensor value;
    const Tensor* ext_value = nullptr;
    Tensor grad;
    Tensor* ext_grad = nullptr;
    bool requires_grad = false;
    std::string_view op;
    Backward backward;
  };

  Var push_leaf(Tensor value, bool requires_grad) {
    if (!value.all_finite()) throw NumericError("graph input contains a non-finite value");
    Node n;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    n.op = requires_grad ? "variable" : "constant";
    nodes_.push_back(std::move(n));
    return {nodes_.size() - 1};
  }

  const Node& node(Var v) const {
    if (v.id >= nodes_.size()) throw std::out_of_range("invalid graph variable");
    return nodes_[v.id];
  }
  Node& node(Var v) {
    if (v.id >= nodes_.size()) throw std::out_of_range("invalid graph variable");
    return nodes_[v.id];
  }

  Mode mode_;
  std::mt19937_64 rng_;
  std::vector<Node> nodes_;
  std::uint64_t kink_signature_ = 0xcbf29ce484222325ULL;
};

}  // namespace press2dyn::diff
