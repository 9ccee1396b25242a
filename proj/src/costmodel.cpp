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
#include "blendnet/costmodel.hpp"

#include <cstdio>
#include <numeric>
#include <sstream>

namespace blend {

namespace {

int64_t ceil_div(int64_t a, int64_t b) { return (a + b - 1) / b; }

bool is_binary_mac(const Node& n) {
  return n.kind == OpKind::BinaryConv2D || (n.kind == OpKind::Linear && n.attrs.precision == Precision::Binary);
}

}  // namespace

CostReport count_ops(const Graph& graph) {
  const auto values = infer_values(graph);
  CostReport r;
  for (int id : topological_order(graph)) {
    const Node& n = graph.node(id);
    const ValueInfo& out = values.at(id);
    LayerCost l{n.id, n.name, n.kind};
    const auto& a = n.attrs;
    switch (n.kind) {
      case OpKind::BinaryConv2D:
      case OpKind::FixedConv2D:
      case OpKind::PatchEmbed:
      case OpKind::Linear: {
        const int64_t k2 = n.kind == OpKind::Linear ? 1 : int64_t{a.kernel} * a.kernel;
        const int64_t weights = int64_t{a.out_channels} * a.in_channels * k2;
        const int64_t macs = weights * out.height * out.width;
        if (is_binary_mac(n)) {
          l.bmac = macs;
          l.binary_params = weights;
        } else {
          l.fpmac = macs;
          l.fixed_params = weights + a.out_channels;
        }
        break;
      }
      case OpKind::BatchNorm: l.channel_params = 2 * out.channels; break;
      case OpKind::Threshold:
      case OpKind::PReLU: l.channel_params = out.channels; break;
      default: break;
    }
    r.bmac += l.bmac;
    r.fpmac += l.fpmac;
    r.binary_params += l.binary_params;
    r.fixed_params += l.fixed_params;
    r.channel_params += l.channel_params;
    r.model_size_bits += l.size_bits();
    r.layers.push_back(std::move(l));
  }
  return r;
}

nlohmann::json CostReport::to_json() const {
  nlohmann::json layers_json = nlohmann::json::array();
  for (const auto& l : layers) {
    if (!l.bmac && !l.fpmac && !l.size_bits()) continue;
    layers_json.push_back({{"node", l.node},
                           {"name", l.name},
                           {"kind", to_string(l.kind)},
                           {"bmac", l.bmac},
                           {"fpmac", l.fpmac},
                           {"binary_params", l.binary_params},
                           {"fixed_params", l.fixed_params},
                           {"channel_params", l.channel_params},
                           {"size_bits", l.size_bits()}});
  }
  return {{"bmac", bmac},
          {"fpmac", fpmac},
          {"param_count", {{"binary", binary_params}, {"fixed", fixed_params}, {"channel", channel_params}}},
          {"model_size_bytes", model_size_bytes()},
          {"model_size_mb", model_size_mb()},
          {"layers", layers_json}};
}

std::string CostReport::to_table() const {
  std::ostringstream os;
  char line[256];
  std::snprintf(line, sizeof line, "%-32s %-14s %14s %14s %12s\n", "layer", "kind", "bmac", "fpmac", "size_bits");
  os << line;
  for (const auto& l : layers) {
    if (!l.bmac && !l.fpmac && !l.size_bits()) continue;
    std::snprintf(line, sizeof line, "%-32s %-14s %14lld %14lld %12lld\n", l.name.c_str(), to_string(l.kind),
                  static_cast<long long>(l.bmac), static_cast<long long>(l.fpmac),
                  static_cast<long long>(l.size_bits()));
    os << line;
  }
  std::snprintf(line, sizeof line, "total: bmac %.4e  fpmac %.4e  size %.4f MB\n", static_cast<double>(bmac),
                static_cast<double>(fpmac), model_size_mb());
  os << line;
  return os.str();
}

int HardwareProfile::joint_parallelism() const { return std::gcd(fp_rows, bnn_lanes); }

LatencyReport estimate_latency(const Graph& graph, const HardwareProfile& hw) {
  if (hw.bnn_lanes < 1 || hw.fp_rows < 1 || hw.fp_cols < 1) throw Error("estimate_latency: invalid hardware profile");
  const auto values = infer_values(graph);
  const int64_t joint = hw.joint_parallelism();
  LatencyReport r;
  for (int id : topological_order(graph)) {
    const Node& n = graph.node(id);
    if (n.kind == OpKind::Input) continue;
    const ValueInfo& out = values.at(id);
    const auto& a = n.attrs;
    const int64_t pixels = out.height * out.width;
    int64_t cycles = 0;
    switch (n.kind) {
      case OpKind::BinaryConv2D:
      case OpKind::FixedConv2D:
      case OpKind::PatchEmbed:
      case OpKind::Linear: {
        const int64_t k2 = n.kind == OpKind::Linear ? 1 : int64_t{a.kernel} * a.kernel;
        if (is_binary_mac(n)) {
          cycles = ceil_div(a.out_channels * pixels * k2 * ceil_div(a.in_channels, hw.bnn_lanes), hw.bnn_lanes);
        } else {
          cycles = ceil_div(a.out_channels, hw.fp_rows) * ceil_div(a.in_channels, hw.fp_cols) * k2 * pixels;
        }
        break;
      }
      default: {
        const ValueInfo& in = values.at(n.inputs.at(0));
        cycles = ceil_div(std::max(in.size(), out.size()), joint);
        break;
      }
    }
    r.layers.push_back({n.id, n.name, n.kind, cycles});
    r.pipeline_cycles = std::max(r.pipeline_cycles, cycles);
    r.sequential_cycles += cycles;
  }
  return r;
}

nlohmann::json LatencyReport::to_json(const HardwareProfile& hw) const {
  nlohmann::json layers_json = nlohmann::json::array();
  for (const auto& l : layers)
    layers_json.push_back({{"node", l.node}, {"name", l.name}, {"kind", to_string(l.kind)}, {"cycles", l.cycles}});
  return {{"estimate", "first-order, no memory stalls"},
          {"profile",
           {{"bnn_lanes", hw.bnn_lanes},
            {"fp_rows", hw.fp_rows},
            {"fp_cols", hw.fp_cols},
            {"joint_parallelism", hw.joint_parallelism()},
            {"clock_mhz", hw.clock_mhz}}},
          {"pipeline_cycles", pipeline_cycles},
          {"sequential_cycles", sequential_cycles},
          {"pipeline_fps", pipeline_cycles ? hw.clock_mhz * 1e6 / static_cast<double>(pipeline_cycles) : 0.0},
          {"layers", layers_json}};
}

}  // namespace blend
