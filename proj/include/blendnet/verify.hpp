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

#include "blendnet/oracle.hpp"
#include "blendnet/runtime.hpp"

namespace blend {

struct SampleCheck {
  uint64_t seed = 0;
  ComparisonReport report;
  int64_t plane_mismatches = 0;  // fusion mode: Threshold vs original SignFn planes
  int planes_checked = 0;

  bool passed() const { return report.within_tolerance && plane_mismatches == 0; }
};

// Oracle on both graphs for one input. Every Threshold in `fused` whose id
// names a SignFn in `unfused` must produce the identical +-1 plane.
SampleCheck check_fusion(const Graph& unfused, const Graph& fused, const RealTensor& input, double tolerance);

// Compiled execution against the oracle on the uncompiled graph it came from.
SampleCheck check_runtime(const Graph& reference, const ExecutionPlan& plan, const RealTensor& input,
                          double tolerance, int workers = 1);

struct VerifySummary {
  std::string mode;
  double tolerance = 0.0;
  std::vector<SampleCheck> samples;

  int failures() const;
  double max_abs_diff() const;
  int argmax_agree() const;
  int64_t plane_mismatches() const;
  bool passed() const { return failures() == 0; }
  nlohmann::json to_json() const;
};

// mode "fusion": oracle(graph) vs oracle(run_pipeline(graph)).
// mode "runtime": oracle(run_pipeline(graph)) vs execute(compile(graph)).
// Inputs come from random_input(shape, first_seed + i).
VerifySummary verify_model(const Graph& graph, const std::string& mode, int seeds, double tolerance,
                           const CompileOptions& options = {}, uint64_t first_seed = 0);

}  // namespace blend
