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
#include <memory>
#include <vector>

#include "blendnet/fixed.hpp"
#include "blendnet/graph.hpp"

namespace blend {

// Buffer sizes are per sample; execute() reuses the table for each batch item.
struct BufferSlot {
  ValueKind kind = ValueKind::Real;
  int64_t elements = 0;  // int16 / int32 values, or packed words for Binary
};

struct PlanStep {
  int node = -1;
  std::vector<int> inputs;  // buffer ids
  int output = -1;          // buffer id
};

struct Liveness {
  int defined = -1;    // step index producing the value
  int last_use = -1;   // last step reading it (== defined when unused)
};

// Static schedule: nodes in topological order (smallest id first among ready
// nodes) with a buffer assignment that recycles slots once a value is dead.
struct ExecutionPlan {
  std::shared_ptr<const Graph> graph;
  std::vector<PlanStep> steps;
  std::vector<BufferSlot> buffers;
  std::map<int, ValueInfo> values;
  std::map<int, int> buffer_of;
  std::map<int, Liveness> liveness;
  int word_size = kDefaultWordSize;
  QFormat q;

  std::vector<int> order() const;
  int position(int node) const;
};

// Throws blend::Error("cycle detected ...") on cyclic graphs and on any other
// validation failure.
ExecutionPlan topo_schedule(std::shared_ptr<const Graph> graph);
ExecutionPlan topo_schedule(const Graph& graph);

// Words (Binary) or values needed to hold one sample of `info`.
int64_t buffer_elements(const ValueInfo& info, int word_size);

}  // namespace blend
