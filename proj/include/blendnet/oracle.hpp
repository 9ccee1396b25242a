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

#include <map>
#include <optional>
#include <string>

#include <json.hpp>

#include "blendnet/graph.hpp"

namespace blend {

using ActivationDump = std::map<int, RealTensor>;

// Float64 evaluation of an uncompiled graph for one sample [C, H, W]. Binary
// values are carried as -1.0 / +1.0. Single-threaded with row-major summation
// order. Returns the first graph output; `dump` receives every node's value.
RealTensor reference_forward(const Graph& graph, const RealTensor& input, ActivationDump* dump = nullptr);

struct ComparisonReport {
  double max_abs_diff = 0.0;
  double mean_abs_diff = 0.0;
  int argmax_agree = 0;
  int argmax_total = 0;
  double tolerance = 0.0;
  bool within_tolerance = true;
  std::optional<int> first_divergence;  // node id
  std::string first_divergence_name;

  bool argmax_all_agree() const { return argmax_agree == argmax_total; }
  nlohmann::json to_json() const;
};

// Element-wise comparison. Rank-4 tensors [N, ...] compare argmax per row,
// anything else as a single row.
ComparisonReport compare(const RealTensor& a, const RealTensor& b, double tolerance);

// Fills first_divergence with the earliest node (in topological order of
// `graph`) present in both dumps whose values differ by more than the
// report's tolerance.
void locate_divergence(ComparisonReport& report, const Graph& graph, const ActivationDump& a, const ActivationDump& b);

}  // namespace blend
