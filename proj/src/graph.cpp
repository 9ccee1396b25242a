/* Copyright 2026 The blendnet Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#include "blendnet/graph.hpp"

#include <algorithm>
#include <queue>
#include <set>

namespace blend {

namespace {

constexpr const char* kOpNames[] = {
    "Input", "SignFn",  "BinaryConv2D", "FixedConv2D", "BatchNorm",  "PReLU",         "Threshold",
    "AvgPool", "MaxPoolOr", "Add",       "Linear",      "PatchEmbed", "GlobalAvgPool", "Transpose",
};

}  // namespace

const char* to_string(OpKind kind) { return kOpNames[static_cast<size_t>(kind)]; }

OpKind op_kind_from_string(std::string_view name) {
  for (auto k : kAllOpKinds)
    if (name == to_string(k)) return k;
  throw Error("unknown op kind '" + std::string(name) + "'");
}

const char* to_string(ValueKind kind) {
  switch (kind) {
    case ValueKind::Real: return "real";
    case ValueKind::Integer: return "integer";
    case ValueKind::Binary: return "binary";
  }
  return "?";
}

const Tensor& Node::param(const std::string& key) const {
  auto it = params.find(key);
  if (it == params.end()) throw Error("node " + std::to_string(id) + " (" + name + ") has no param '" + key + "'");
  return it->second;
}

const std::vector<double>& real_param(const Node& node, const std::string& key) {
  const Tensor& t = node.param(key);
  if (!t.is_real())
    throw Error("param '" + key + "' of node " + node.name + " is " + to_string(t.dtype) + ", expected float");
  return t.real;
}

int Graph::next_id() const {
  int next = 0;
  for (const auto& n : nodes) next = std::max(next, n.id + 1);
  return next;
}

int Graph::add(Node node) {
  if (node.id < 0) node.id = next_id();
  const int id = node.id;
  nodes.push_back(std::move(node));
  return id;
}

const Node* Graph::find(int id) const {
  for (const auto& n : nodes)
    if (n.id == id) return &n;
  return nullptr;
}

Node* Graph::find(int id) {
  for (auto& n : nodes)
    if (n.id == id) return &n;
  return nullptr;
}

const Node& Graph::node(int id) const {
  if (const Node* n = find(id)) return *n;
  throw Error("no node with id " + std::to_string(id));
}

Node& Graph::node(int id) {
  if (Node* n = find(id)) return *n;
  throw Error("no node with id " + std::to_string(id));
}

const Node* Graph::find_by_name(std::string_view name) const {
  for (const auto& n : nodes)
    if (n.name == name) return &n;
  return nullptr;
}

std::vector<int> Graph::input_ids() const {
  std::vector<int> ids;
  for (const auto& n : nodes)
    if (n.kind == OpKind::Input) ids.push_back(n.id);
  std::sort(ids.begin(), ids.end());
  return ids;
}

std::map<int, std::vector<int>> Graph::consumers() const {
  std::map<int, std::vector<int>> out;
  for (const auto& n : nodes)
    for (int in : n.inputs) out[in].push_back(n.id);
  for (auto& [_, v] : out) std::sort(v.begin(), v.end());
  return out;
}

std::vector<std::pair<int, int>> Graph::edges() const {
  std::vector<std::pair<int, int>> e;
  for (const auto& n : nodes)
    for (int in : n.inputs) e.emplace_back(in, n.id);
  std::sort(e.begin(), e.end());
  return e;
}

std::map<std::string, int> Graph::census() const {
  std::map<std::string, int> c;
  for (const auto& n : nodes) {
    std::string key = to_string(n.kind);
    if (n.kind == OpKind::Linear) key += n.attrs.precision == Precision::Binary ? "(binary)" : "(fixed)";
    ++c[key];
  }
  return c;
}

std::string Violation::to_string() const {
  return rule + "@" + std::to_string(node) + (detail.empty() ? "" : ": " + detail);
}

std::vector<int> topological_order(const Graph& graph, std::vector<int>* cyclic) {
  std::map<int, int> indegree;
  std::map<int, std::vector<int>> succ;
  for (const auto& n : graph.nodes) indegree.emplace(n.id, 0);
  for (const auto& n : graph.nodes)
    for (int in : n.inputs) {
      if (!indegree.count(in)) continue;  // dangling; reported by validate
      ++indegree[n.id];
      succ[in].push_back(n.id);
    }
  std::priority_queue<int, std::vector<int>, std::greater<>> ready;
  for (auto [id, deg] : indegree)
    if (deg == 0) ready.push(id);
  std::vector<int> order;
  while (!ready.empty()) {
    const int id = ready.top();
    ready.pop();
    order.push_back(id);
    for (int s : succ[id])
      if (--indegree[s] == 0) ready.push(s);
  }
  if (cyclic) {
    cyclic->clear();
    for (auto [id, deg] : indegree)
      if (deg > 0) cyclic->push_back(id);
  }
  return order;
}

void sort_nodes(Graph& graph) {
  std::vector<int> cyclic;
  const auto order = topological_order(graph, &cyclic);
  if (!cyclic.empty()) throw Error("cycle detected involving node " + std::to_string(cyclic.front()));
  std::map<int, size_t> pos;
  for (size_t i = 0; i < order.size(); ++i) pos[order[i]] = i;
  std::stable_sort(graph.nodes.begin(), graph.nodes.end(),
                   [&](const Node& a, const Node& b) { return pos.at(a.id) < pos.at(b.id); });
}

BNParams BNParams::from_node(const Node& node) {
  BNParams p;
  p.gamma = real_param(node, "gamma");
  p.beta = real_param(node, "beta");
  p.mu = real_param(node, "mu");
  p.sigma2 = real_param(node, "sigma2");
  p.eps = node.attrs.eps;
  p.affine_free = node.attrs.affine_free;
  return p;
}

BNParams BNParams::identity(size_t channels, double eps) {
  BNParams p;
  p.gamma.assign(channels, 1.0);
  p.beta.assign(channels, 0.0);
  p.mu.assign(channels, 0.0);
  p.sigma2.assign(channels, 1.0 - eps);
  p.eps = eps;
  return p;
}

void BNParams::store(Node& node, DType dtype) const {
  const Shape s{static_cast<int64_t>(channels())};
  auto make = [&](const std::vector<double>& v) {
    return dtype == DType::Float64 ? Tensor::float64(s, v) : Tensor::float32(s, v);
  };
  node.params["gamma"] = make(gamma);
  node.params["beta"] = make(beta);
  node.params["mu"] = make(mu);
  node.params["sigma2"] = make(sigma2);
  node.attrs.eps = eps;
  node.attrs.affine_free = affine_free;
}

ConvParams ConvParams::from_node(const Node& node) {
  ConvParams p;
  p.weights = node.param("w");
  if (node.has_param("b")) {
    p.bias = real_param(node, "b");
  } else {
    p.bias.assign(static_cast<size_t>(p.weights.shape.at(0)), 0.0);
  }
  if (node.has_param("pad")) {
    p.padding_value = real_param(node, "pad");
  } else {
    p.padding_value.assign(static_cast<size_t>(p.weights.shape.at(1)), 0.0);
  }
  return p;
}

void ConvParams::store(Node& node, DType dtype) const {
  auto make = [&](Shape s, const std::vector<double>& v) {
    return dtype == DType::Float64 ? Tensor::float64(std::move(s), v) : Tensor::float32(std::move(s), v);
  };
  node.params["w"] = make(weights.shape, weights.real);
  node.params["b"] = make({static_cast<int64_t>(bias.size())}, bias);
  node.params["pad"] = make({static_cast<int64_t>(padding_value.size())}, padding_value);
}

namespace {

class Checker {
 public:
  explicit Checker(const Graph& g) : g_(g) {}

  std::vector<Violation> run(std::map<int, ValueInfo>* values_out) {
    std::set<int> ids;
    for (const auto& n : g_.nodes)
      if (!ids.insert(n.id).second) add(n.id, "duplicate-id", "id used more than once");
    for (const auto& n : g_.nodes)
      for (int in : n.inputs)
        if (!ids.count(in)) add(n.id, "dangling-input", "input " + std::to_string(in) + " has no producer");
    for (int out : g_.outputs)
      if (!ids.count(out)) add(out, "output", "graph output names a missing node");
    if (g_.outputs.empty()) add(-1, "output", "graph has no outputs");

    std::vector<int> cyclic;
    const auto order = topological_order(g_, &cyclic);
    if (!cyclic.empty()) {
      std::string members;
      for (int c : cyclic) members += (members.empty() ? "" : ",") + std::to_string(c);
      add(cyclic.front(), "cycle", "cycle detected among nodes {" + members + "}");
    }
    for (int id : order) check(g_.node(id));
    if (values_out) *values_out = values_;
    return std::move(violations_);
  }

 private:
  void add(int node, std::string rule, std::string detail) {
    violations_.push_back({node, std::move(rule), std::move(detail)});
  }

  bool expect_param(const Node& n, const std::string& key, const Shape& shape, bool optional = false) {
    auto it = n.params.find(key);
    if (it == n.params.end()) {
      if (!optional) add(n.id, "param", "missing param '" + key + "'");
      return false;
    }
    if (it->second.shape != shape) {
      add(n.id, "shape-mismatch",
          "param '" + key + "' has shape " + to_string(it->second.shape) + ", expected " + to_string(shape));
      return false;
    }
    if (it->second.dtype != DType::PackedBits && it->second.stored_elements() != static_cast<size_t>(numel(shape))) {
      add(n.id, "shape-mismatch", "param '" + key + "' payload size does not match its shape");
      return false;
    }
    return true;
  }

  bool expect_kind(const Node& n, const ValueInfo& in, std::initializer_list<ValueKind> allowed) {
    for (auto k : allowed)
      if (in.kind == k) return true;
    add(n.id, "dtype-mismatch",
        std::string(to_string(n.kind)) + " cannot consume a " + to_string(in.kind) + " value");
    return false;
  }

  void check_bn(const Node& n, int64_t C) {
    if (g_.compiled && n.has_param("scale")) {
      expect_param(n, "scale", {C});
      expect_param(n, "shift", {C});
      return;
    }
    bool ok = true;
    for (const char* key : {"gamma", "beta", "mu", "sigma2"}) ok &= expect_param(n, key, {C});
    if (!ok) return;
    if (!(n.attrs.eps > 0)) add(n.id, "bn-params", "eps must be positive");
    const BNParams bn = BNParams::from_node(n);
    for (size_t c = 0; c < bn.channels(); ++c) {
      if (!(bn.sigma2[c] >= 0)) {
        add(n.id, "bn-params", "negative variance on channel " + std::to_string(c));
        break;
      }
      if (bn.affine_free && (bn.gamma[c] != 1.0 || bn.beta[c] != 0.0)) {
        add(n.id, "bn-params", "affine-free BN has gamma != 1 or beta != 0 on channel " + std::to_string(c));
        break;
      }
    }
  }

  static int64_t pooled(int64_t extent, int k, int s, int pad = 0) { return (extent + 2 * pad - k) / s + 1; }

  void check(const Node& n) {
    std::vector<ValueInfo> ins;
    for (int in : n.inputs) {
      auto it = values_.find(in);
      if (it == values_.end()) return;  // upstream already reported
      ins.push_back(it->second);
    }
    const size_t arity = n.kind == OpKind::Input ? 0 : n.kind == OpKind::Add ? 2 : 1;
    if (ins.size() != arity) {
      add(n.id, "arity", std::string(to_string(n.kind)) + " expects " + std::to_string(arity) + " inputs");
      return;
    }
    const auto& a = n.attrs;
    ValueInfo out;
    switch (n.kind) {
      case OpKind::Input:
        if (a.shape.size() != 3 || numel(a.shape) <= 0) {
          add(n.id, "attr", "input shape must be [C,H,W]");
          return;
        }
        out = {ValueKind::Real, a.shape[0], a.shape[1], a.shape[2]};
        break;
      case OpKind::SignFn:
        if (!expect_kind(n, ins[0], {ValueKind::Real, ValueKind::Integer})) return;
        out = ins[0];
        out.kind = ValueKind::Binary;
        break;
      case OpKind::Threshold: {
        if (!expect_kind(n, ins[0], {ValueKind::Real, ValueKind::Integer})) return;
        const int64_t C = ins[0].channels;
        if (expect_param(n, "tau", {C}) && expect_param(n, "direction", {C})) {
          for (auto d : n.param("direction").bytes)
            if (d > 3) add(n.id, "threshold-params", "direction code out of range");
        }
        out = ins[0];
        out.kind = ValueKind::Binary;
        break;
      }
      case OpKind::BinaryConv2D:
      case OpKind::FixedConv2D:
      case OpKind::PatchEmbed: {
        const bool binary = n.kind == OpKind::BinaryConv2D;
        if (!expect_kind(n, ins[0], {binary ? ValueKind::Binary : ValueKind::Real})) return;
        if (a.kernel < 1 || a.stride < 1 || a.padding < 0 || (a.pad_bit != 0 && a.pad_bit != 1)) {
          add(n.id, "attr", "invalid kernel/stride/padding");
          return;
        }
        if (a.in_channels != ins[0].channels) {
          add(n.id, "shape-mismatch", "in_channels " + std::to_string(a.in_channels) + " but input has " +
                                          std::to_string(ins[0].channels));
          return;
        }
        expect_param(n, "w", {a.out_channels, a.in_channels, a.kernel, a.kernel});
        if (!binary) {
          expect_param(n, "b", {a.out_channels});
          expect_param(n, "pad", {a.in_channels}, true);
        } else if (!g_.compiled && n.has_param("w")) {
          for (double v : n.param("w").real)
            if (v != 1.0 && v != -1.0) {
              add(n.id, "dtype-mismatch", "binary conv weights must be +-1");
              break;
            }
        }
        const int64_t Ho = pooled(ins[0].height, a.kernel, a.stride, a.padding);
        const int64_t Wo = pooled(ins[0].width, a.kernel, a.stride, a.padding);
        if (Ho < 1 || Wo < 1) {
          add(n.id, "shape-mismatch", "kernel larger than padded input");
          return;
        }
        if (n.kind == OpKind::PatchEmbed) {
          if (a.stride != a.kernel || a.padding != 0) add(n.id, "attr", "patch embedding needs stride == kernel, no padding");
          out = {ValueKind::Real, a.out_channels, Ho * Wo, 1};
        } else {
          out = {binary ? ValueKind::Integer : ValueKind::Real, a.out_channels, Ho, Wo};
        }
        break;
      }
      case OpKind::Linear: {
        const bool binary = a.precision == Precision::Binary;
        if (!expect_kind(n, ins[0], {binary ? ValueKind::Binary : ValueKind::Real})) return;
        if (a.in_channels != ins[0].channels) {
          add(n.id, "shape-mismatch", "in_channels does not match input");
          return;
        }
        expect_param(n, "w", {a.out_channels, a.in_channels});
        if (!binary) expect_param(n, "b", {a.out_channels});
        out = {binary ? ValueKind::Integer : ValueKind::Real, a.out_channels, ins[0].height, ins[0].width};
        break;
      }
      case OpKind::BatchNorm:
        if (!expect_kind(n, ins[0], {ValueKind::Real, ValueKind::Integer})) return;
        check_bn(n, ins[0].channels);
        out = ins[0];
        out.kind = ValueKind::Real;
        break;
      case OpKind::PReLU:
        if (!expect_kind(n, ins[0], {ValueKind::Real})) return;
        expect_param(n, "alpha", {ins[0].channels});
        out = ins[0];
        break;
      case OpKind::AvgPool:
      case OpKind::MaxPoolOr: {
        if (!expect_kind(n, ins[0], {n.kind == OpKind::AvgPool ? ValueKind::Real : ValueKind::Binary})) return;
        if (a.kernel < 1 || a.stride < 1) {
          add(n.id, "attr", "pool window and stride must be >= 1");
          return;
        }
        out = ins[0];
        out.height = pooled(ins[0].height, a.kernel, a.stride);
        out.width = pooled(ins[0].width, a.kernel, a.stride);
        if (out.height < 1 || out.width < 1) {
          add(n.id, "shape-mismatch", "pool window larger than input");
          return;
        }
        break;
      }
      case OpKind::Add:
        if (!expect_kind(n, ins[0], {ValueKind::Real}) || !expect_kind(n, ins[1], {ValueKind::Real})) return;
        if (ins[0].shape() != ins[1].shape()) {
          add(n.id, "shape-mismatch", "Add operands " + to_string(ins[0].shape()) + " vs " + to_string(ins[1].shape()));
          return;
        }
        out = ins[0];
        break;
      case OpKind::GlobalAvgPool:
        if (!expect_kind(n, ins[0], {ValueKind::Real})) return;
        out = {ValueKind::Real, ins[0].channels, 1, 1};
        break;
      case OpKind::Transpose:
        out = {ins[0].kind, ins[0].height, ins[0].channels, ins[0].width};
        break;
    }
    values_[n.id] = out;
  }

  const Graph& g_;
  std::map<int, ValueInfo> values_;
  std::vector<Violation> violations_;
};

}  // namespace

std::vector<Violation> validate(const Graph& graph) { return Checker(graph).run(nullptr); }

std::map<int, ValueInfo> infer_values(const Graph& graph) {
  std::map<int, ValueInfo> values;
  const auto violations = Checker(graph).run(&values);
  if (!violations.empty()) {
    std::string msg = "invalid graph:";
    for (const auto& v : violations) msg += " " + v.to_string() + ";";
    throw Error(msg);
  }
  return values;
}

}  // namespace blend
