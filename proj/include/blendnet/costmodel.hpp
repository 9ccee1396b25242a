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

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "blendnet/graph.hpp"

namespace blend {

struct LayerCost {
  int node = -1;
  std::string name;
  OpKind kind = OpKind::Input;
  int64_t bmac = 0;
  int64_t fpmac = 0;
  int64_t binary_params = 0;   // 1 bit each
  int64_t fixed_params = 0;    // 16 bits each: fixed weights and biases
  int64_t channel_params = 0;  // 16 bits each: BN scale/shift, thresholds, PReLU slopes

  int64_t size_bits() const { return binary_params + 16 * (fixed_params + channel_params); }
};

struct CostReport {
  std::vector<LayerCost> layers;
  int64_t bmac = 0;
  int64_t fpmac = 0;
  int64_t binary_params = 0;
  int64_t fixed_params = 0;
  int64_t channel_params = 0;
  int64_t model_size_bits = 0;

  double model_size_bytes() const { return static_cast<double>(model_size_bits) / 8.0; }
  double model_size_mb() const { return model_size_bytes() / 1e6; }
  nlohmann::json to_json() const;
  std::string to_table() const;
};

// Per conv/linear: MACs = c_out * c_in * k * k * H_out * W_out, binary or
// fixed by op type. Size counts 1 bit per binary weight, 16 bits per fixed
// weight or bias and 16 bits per per-channel parameter (BN: scale and shift,
// Threshold: one, PReLU: one). Padding values and metadata are not counted.
CostReport count_ops(const Graph& graph);

struct HardwareProfile {
  int bnn_lanes = 48;  // BMAC array width
  int fp_rows = 32;
  int fp_cols = 32;
  double clock_mhz = 200.0;  // reporting only

  int joint_parallelism() const;
};

struct LayerLatency {
  int node = -1;
  std::string name;
  OpKind kind = OpKind::Input;
  int64_t cycles = 0;
};

// First-order estimates, no memory stalls.
struct LatencyReport {
  std::vector<LayerLatency> layers;
  int64_t pipeline_cycles = 0;    // streaming: slowest layer
  int64_t sequential_cycles = 0;  // one layer at a time

  nlohmann::json to_json(const HardwareProfile& profile) const;
};

// Binary conv/linear: ceil(c_out * pixels_out * k * k * ceil(c_in / lanes) /
// lanes). Fixed conv/linear: ceil(c_out / rows) * ceil(c_in / cols) * k * k *
// pixels_out. Element-wise and pooling ops: ceil(elements / joint_parallelism).
LatencyReport estimate_latency(const Graph& graph, const HardwareProfile& profile = {});

}  // namespace blend
