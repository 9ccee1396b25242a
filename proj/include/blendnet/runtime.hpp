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

#include <string>
#include <vector>

#include "blendnet/fixed.hpp"
#include "blendnet/kernels.hpp"
#include "blendnet/oracle.hpp"
#include "blendnet/passes.hpp"
#include "blendnet/schedule.hpp"

namespace blend {

struct CompileOptions {
  std::vector<std::string> passes = default_pass_list();
  int word_size = kDefaultWordSize;
  int frac_bits = 8;  // activation format
};

struct CompileResult {
  Graph graph;
  PassReport report;
  QuantStats lowering;  // parameters saturated while quantizing
};

// Lowers a (fused) float graph to runtime form: binary weights packed with
// `word_size` lanes, fixed-point weights/biases/PReLU slopes quantized with a
// per-tensor fractional width, BN reduced to per-channel scale/shift, and
// thresholds converted to integers on the input's grid. Sets graph.compiled.
Graph lower(const Graph& graph, int word_size = kDefaultWordSize, int frac_bits = 8, QuantStats* stats = nullptr);

// run_pipeline followed by lower.
CompileResult compile(const Graph& graph, const CompileOptions& options = {});

struct ExecOptions {
  int workers = 0;  // 0: default_workers()
  QuantStats* stats = nullptr;
  ActivationDump* dump = nullptr;  // dequantized value of every node (+-1 for binary)
};

// Runs a compiled plan on one sample [C, H, W] or a batch [N, C, H, W]; the
// input is quantized on entry and the first graph output dequantized on exit.
// Output bytes do not depend on the worker count.
RealTensor execute(const ExecutionPlan& plan, const RealTensor& input, const ExecOptions& options = {});

}  // namespace blend
