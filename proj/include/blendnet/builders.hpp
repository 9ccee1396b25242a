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

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "blendnet/graph.hpp"

namespace blend {

enum class BlockKind { Normal, Downsample };

struct BlockConfig {
  int in_channels = 16;
  int out_channels = 16;
  int stride = 1;
  BlockKind kind = BlockKind::Normal;
  std::vector<double> prelu_slopes;  // empty: 0.25 on every channel

  // Throws unless kind == Downsample exactly when stride > 1 or the channel
  // count changes.
  void validate() const;
};

inline constexpr double kDefaultPReluSlope = 0.25;
inline constexpr double kBnEps = 1e-5;

// Appends graph nodes one at a time with default parameters (+1 binary
// weights, zero fixed weights, identity BN). random_init fills them in.
class GraphBuilder {
 public:
  explicit GraphBuilder(std::string arch = {}) { graph_.arch = std::move(arch); }

  int input(const std::string& name, Shape chw);
  int sign(int x, const std::string& name);
  int binary_conv(int x, const std::string& name, int in, int out, int kernel, int stride, int padding);
  int fixed_conv(int x, const std::string& name, int in, int out, int kernel, int stride, int padding);
  int patch_embed(int x, const std::string& name, int in, int out, int patch);
  int batch_norm(int x, const std::string& name, int channels, bool affine_free = false);
  int prelu(int x, const std::string& name, std::vector<double> slopes);
  int add(int a, int b, const std::string& name);
  int avg_pool(int x, const std::string& name, int window);
  int max_pool_or(int x, const std::string& name, int window);
  int global_avg_pool(int x, const std::string& name);
  int linear(int x, const std::string& name, int in, int out, Precision precision);
  int transpose(int x, const std::string& name);

  // One Blend block. Main path: SignFn, 3x3 BinaryConv2D, BatchNorm, PReLU.
  // Skip path: identity, or AvgPool, 1x1 FixedConv2D, BatchNorm. The sum goes
  // through an affine-free BatchNorm. Returns the block output id.
  int blend_block(int x, const BlockConfig& cfg, const std::string& prefix);

  void set_outputs(std::vector<int> outputs) { graph_.outputs = std::move(outputs); }
  Graph& graph() { return graph_; }
  Graph finish();

 private:
  int push(OpKind kind, const std::string& name, std::vector<int> inputs, NodeAttrs attrs);
  Graph graph_;
};

// Standalone single-block graph with input [in_channels, height, width].
Graph build_block(const BlockConfig& cfg, int height = 32, int width = 32);

// ResNet-20 layout: 3x3 fixed stem 3->16, stages {16, 32, 64} x 3 blocks,
// global average pool and a fixed-point linear head. Input [3, 32, 32].
Graph build_neuroblend20(int num_classes);
// ResNet-18 widths {64, 128, 256, 512} x 2 blocks, same stem/head scheme.
Graph build_neuroblend18(int num_classes);

struct MixerSpec {
  int sequence_length = 64;  // S
  int hidden = 128;          // C
  int token_mlp = 64;        // D_S
  int channel_mlp = 512;     // D_C
  int patch = 4;
  int layers = 8;
  int image_side = 32;
  int in_channels = 3;
  int num_classes = 10;

  static MixerSpec s4();
  static MixerSpec b4();
  static MixerSpec s2_4();  // "2S/4"
  void validate() const;
};

// FC precisions inside one mixer layer: two FCs in the token-mixing block and
// two in the channel-mixing block. Text form "BB/FPB": token block first, each
// FC written B (binary) or FP (fixed point).
struct MixingPrecision {
  std::array<Precision, 2> token{Precision::Binary, Precision::Binary};
  std::array<Precision, 2> channel{Precision::Binary, Precision::Binary};

  static MixingPrecision parse(std::string_view text);
  static MixingPrecision all(Precision p) { return {{p, p}, {p, p}}; }
  std::string to_string() const;
};

// Patch embedding (fixed point) and BN, `layers` token+channel mixing layers,
// global average pool over tokens and a fixed-point classifier. One entry of
// `precision` applies to every layer; otherwise one entry per layer.
Graph build_blendmixer(const MixerSpec& spec, const std::vector<MixingPrecision>& precision);

// Deterministic parameters from `seed`, one SplitMix64 substream per tensor.
// Weights: binary +-1; fixed U(-a, a) with a = sqrt(3 / fan_in); biases
// U(-0.1, 0.1). BN: |gamma| in [0.5, 2] (negative with probability 1/4),
// beta, mu in [-1, 1], sigma2 in [0.25, 4]; BNs fed by binary ops see sums of
// n = fan_in +-1 products, so their mu is scaled by sqrt(n) and sigma2 by n.
// Affine-free BNs keep gamma = 1, beta = 0.
void random_init(Graph& graph, uint64_t seed);

// Architecture names: neuroblend20, neuroblend18, blendmixer-s4,
// blendmixer-b4, blendmixer-2s4, mlpmixer-s4, mlpmixer-b4, mlpmixer-2s4.
// Mixer names accept a ":<precision>" suffix, e.g. "blendmixer-2s4:BB/FPB".
Graph build_arch(std::string_view arch, int num_classes);
std::vector<std::string> known_archs();

// Uniform [-1, 1) values snapped to the 2^-grid_frac grid, so the float
// oracle and the fixed-point runtime see the same input.
RealTensor random_input(const Shape& shape, uint64_t seed, int grid_frac = 8);

}  // namespace blend
