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
#include "blendnet/schedule.hpp"

#include <algorithm>
#include <set>

namespace blend {

int64_t buffer_elements(const ValueInfo& info, int word_size) {
  if (info.kind == ValueKind::Binary) return info.height * info.width * ((info.channels + word_size - 1) / word_size);
  return info.size();
}

std::vector<int> ExecutionPlan::order() const {
  std::vector<int> o;
  o.reserve(steps.size());
  for (const auto& s : steps) o.push_back(s.node);
  return o;
}

int ExecutionPlan::position(int node) const {
  for (size_t i = 0; i < steps.size(); ++i)
    if (steps[i].node == node) return static_cast<int>(i);
  return -1;
}

ExecutionPlan topo_schedule(std::shared_ptr<const Graph> graph) {
  std::vector<int> cyclic;
  const auto order = topological_order(*graph, &cyclic);
  if (!cyclic.empty()) throw Error("cycle detected involving node " + std::to_string(cyclic.front()));

  ExecutionPlan plan;
  plan.values = infer_values(*graph);
  plan.word_size = graph->word_size;
  plan.q.frac_bits = graph->frac_bits;
  plan.q.validate();

  std::map<int, int> pos;
  for (size_t i = 0; i < order.size(); ++i) pos[order[i]] = static_cast<int>(i);
  for (int id : order) plan.liveness[id] = {pos[id], pos[id]};
  for (const auto& n : graph->nodes)
    for (int in : n.inputs) plan.liveness[in].last_use = std::max(plan.liveness[in].last_use, pos[n.id]);
  const std::set<int> outputs(graph->outputs.begin(), graph->outputs.end());

  std::vector<int> free_slots;
  for (size_t i = 0; i < order.size(); ++i) {
    const Node& n = graph->node(order[i]);
    PlanStep step;
    step.node = n.id;
    for (int in : n.inputs) step.inputs.push_back(plan.buffer_of.at(in));

    const ValueInfo& info = plan.values.at(n.id);
    const int64_t need = buffer_elements(info, plan.word_size);
    // Smallest free slot of the same kind that fits, otherwise a new one.
    auto best = free_slots.end();
    for (auto it = free_slots.begin(); it != free_slots.end(); ++it) {
      const BufferSlot& s = plan.buffers[static_cast<size_t>(*it)];
      if (s.kind != info.kind || s.elements < need) continue;
      if (best == free_slots.end() || s.elements < plan.buffers[static_cast<size_t>(*best)].elements) best = it;
    }
    if (best != free_slots.end()) {
      step.output = *best;
      free_slots.erase(best);
    } else {
      step.output = static_cast<int>(plan.buffers.size());
      plan.buffers.push_back({info.kind, need});
    }
    plan.buffer_of[n.id] = step.output;

    // Release inputs whose last reader is this step.
    std::set<int> released;
    for (int in : n.inputs)
      if (plan.liveness.at(in).last_use == static_cast<int>(i) && !outputs.count(in) && released.insert(in).second)
        free_slots.push_back(plan.buffer_of.at(in));
    if (plan.liveness.at(n.id).last_use == static_cast<int>(i) && !outputs.count(n.id))
      free_slots.push_back(step.output);
    plan.steps.push_back(std::move(step));
  }
  plan.graph = std::move(graph);
  return plan;
}

ExecutionPlan topo_schedule(const Graph& graph) { return topo_schedule(std::make_shared<const Graph>(graph)); }

}  // namespace blend
