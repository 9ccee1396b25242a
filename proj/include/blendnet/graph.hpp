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
#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "blendnet/packing.hpp"
#include "blendnet/tensor.hpp"

namespace blend {

enum class OpKind : uint8_t {
  Input,
  SignFn,
  BinaryConv2D,
  FixedConv2D,
  BatchNorm,
  PReLU,
  Threshold,
  AvgPool,
  MaxPoolOr,
  Add,
  Linear,
  PatchEmbed,
  GlobalAvgPool,
  Transpose,
};

inline constexpr OpKind kAllOpKinds[] = {
    OpKind::Input,     OpKind::SignFn,  OpKind::BinaryConv2D, OpKind::FixedConv2D,   OpKind::BatchNorm,
    OpKind::PReLU,     OpKind::Threshold, OpKind::AvgPool,    OpKind::MaxPoolOr,     OpKind::Add,
    OpKind::Linear,    OpKind::PatchEmbed, OpKind::GlobalAvgPool, OpKind::Transpose,
};

const char* to_string(OpKind kind);
OpKind op_kind_from_string(std::string_view name);

enum class Precision : uint8_t { Binary, Fixed };

// Kind of value flowing along an edge. Real values are fixed-point once
// compiled; Integer values are popcount sums from binary ops.
enum class ValueKind : uint8_t { Real, Integer, Binary };
const char* to_string(ValueKind kind);

struct NodeAttrs {
  int in_channels = 0;
  int out_channels = 0;
  int kernel = 1;
  int stride = 1;
  int padding = 0;
  int pad_bit = 0;  // BinaryConv2D border lanes: 0 is -1, 1 is +1
  Precision precision = Precision::Fixed;  // Linear
  bool affine_free = false;                // BatchNorm
  double eps = 1e-5;                       // BatchNorm
  Shape shape;                             // Input: [C, H, W]

  bool operator==(const NodeAttrs&) const = default;
};

struct Node {
  int id = -1;
  OpKind kind = OpKind::Input;
  std::string name;
  std::vector<int> inputs;
  NodeAttrs attrs;
  std::map<std::string, Tensor> params;

  bool has_param(const std::string& key) const { return params.count(key) != 0; }
  const Tensor& param(const std::string& key) const;

  bool operator==(const Node&) const = default;
};

// Computational graph. Every node produces exactly one value identified by the
// node id; ids are dense integers assigned at build time and all tie-breaking
// uses them. Input nodes are the graph's named input ports.
struct Graph {
  std::string arch;
  uint64_t seed = 0;
  bool compiled = false;
  int word_size = kDefaultWordSize;
  int frac_bits = 8;
  std::vector<Node> nodes;
  std::vector<int> outputs;

  int next_id() const;
  // Assigns the next id when node.id < 0 and returns it.
  int add(Node node);
  const Node* find(int id) const;
  Node* find(int id);
  const Node& node(int id) const;
  Node& node(int id);
  const Node* find_by_name(std::string_view name) const;

  std::vector<int> input_ids() const;
  // producer id -> consumer ids, one entry per edge, consumers in id order.
  std::map<int, std::vector<int>> consumers() const;
  std::vector<std::pair<int, int>> edges() const;
  std::map<std::string, int> census() const;

  bool operator==(const Graph&) const = default;
};

struct ValueInfo {
  ValueKind kind = ValueKind::Real;
  int64_t channels = 0;
  int64_t height = 0;
  int64_t width = 0;

  Shape shape() const { return {channels, height, width}; }
  int64_t size() const { return channels * height * width; }
  bool operator==(const ValueInfo&) const = default;
};

struct Violation {
  int node = -1;
  std::string rule;
  std::string detail;

  std::string to_string() const;
};

// Empty iff every IR invariant holds. Rules: "cycle", "dangling-input",
// "duplicate-id", "arity", "dtype-mismatch", "shape-mismatch", "param",
// "bn-params", "threshold-params", "attr", "output".
std::vector<Violation> validate(const Graph& graph);

// Per-value kind and shape. Throws blend::Error when the graph is invalid.
std::map<int, ValueInfo> infer_values(const Graph& graph);

// Kahn's algorithm with the smallest ready id first. On a cycle, returns the
// partial order and fills `cyclic` with the ids that could not be placed.
std::vector<int> topological_order(const Graph& graph, std::vector<int>* cyclic = nullptr);

// Reorders graph.nodes topologically (id tie-break). Throws on a cycle.
void sort_nodes(Graph& graph);

// Inference-time batch normalization constants for one node.
struct BNParams {
  std::vector<double> gamma, beta, mu, sigma2;
  double eps = 1e-5;
  bool affine_free = false;

  size_t channels() const { return gamma.size(); }
  double stddev(size_t c) const { return std::sqrt(sigma2[c] + eps); }
  // The reference evaluation: gamma * ((y - mu) / sqrt(sigma2 + eps)) + beta.
  // Threshold fusion derives tau from exactly this expression.
  double apply(size_t c, double y) const { return gamma[c] * ((y - mu[c]) / stddev(c)) + beta[c]; }

  static BNParams from_node(const Node& node);
  static BNParams identity(size_t channels, double eps = 1e-5);
  // Writes gamma/beta/mu/sigma2 params (with the given dtype) and eps/affine_free attrs.
  void store(Node& node, DType dtype = DType::Float32) const;
};

// Weights [c_out, c_in, k, k] (or [c_out, c_in] for Linear), bias [c_out] and
// the per-input-channel value used for spatial padding.
struct ConvParams {
  Tensor weights;
  std::vector<double> bias;
  std::vector<double> padding_value;

  static ConvParams from_node(const Node& node);
  void store(Node& node, DType dtype = DType::Float64) const;
};

// Real-valued view of a parameter (Float32/Float64 tensors only).
const std::vector<double>& real_param(const Node& node, const std::string& key);

}  // namespace blend
