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
#include <doctest.h>

#include <algorithm>
#include <set>

#include "blendnet/builders.hpp"
#include "blendnet/schedule.hpp"

using namespace blend;

namespace {

bool has_rule(const std::vector<Violation>& v, const std::string& rule) {
  return std::any_of(v.begin(), v.end(), [&](const Violation& x) { return x.rule == rule; });
}

Graph small_chain() {
  GraphBuilder b("chain");
  const int x = b.input("x", {4, 8, 8});
  int y = b.sign(x, "sg");
  y = b.binary_conv(y, "conv", 4, 6, 3, 1, 1);
  y = b.batch_norm(y, "bn", 6);
  b.set_outputs({y});
  return b.finish();
}

}  // namespace

TEST_CASE("NeuroBlend-20 structure") {
  const Graph g = build_neuroblend20(10);
  CHECK(validate(g).empty());
  const auto census = g.census();
  CHECK(census.at("SignFn") == 9);
  CHECK(census.at("BinaryConv2D") == 9);
  CHECK(census.at("PReLU") == 9);
  CHECK(census.at("Add") == 9);
  CHECK(census.at("AvgPool") == 2);
  // stem + one 1x1 projection per downsampling stage
  CHECK(census.at("FixedConv2D") == 3);
  const auto values = infer_values(g);
  CHECK(values.at(g.outputs[0]).shape() == Shape{10, 1, 1});
  CHECK(values.at(g.find_by_name("block4.conv")->id).shape() == Shape{32, 16, 16});
  CHECK(values.at(g.find_by_name("block7.conv")->id).shape() == Shape{64, 8, 8});
  CHECK(values.at(g.find_by_name("block1.conv")->id).kind == ValueKind::Integer);
}

TEST_CASE("block builder rejects a normal block that changes shape") {
  BlockConfig cfg{16, 32, 1, BlockKind::Normal, {}};
  CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("channel mismatch between paths"), Error);
  cfg.kind = BlockKind::Downsample;
  CHECK_NOTHROW(cfg.validate());
  const Graph g = build_block(cfg);
  CHECK(validate(g).empty());
  CHECK(g.find_by_name("block1.skip_conv") != nullptr);
}

TEST_CASE("validation rules") {
  SUBCASE("dangling input") {
    Graph g = small_chain();
    g.node(g.find_by_name("conv")->id).inputs = {99};
    CHECK(has_rule(validate(g), "dangling-input"));
  }
  SUBCASE("duplicate id") {
    Graph g = small_chain();
    g.nodes.push_back(g.nodes.back());
    CHECK(has_rule(validate(g), "duplicate-id"));
  }
  SUBCASE("cycle") {
    Graph g = small_chain();
    g.node(g.find_by_name("sg")->id).inputs = {g.find_by_name("bn")->id};
    const auto v = validate(g);
    CHECK(has_rule(v, "cycle"));
    CHECK_THROWS_WITH_AS(topo_schedule(g), doctest::Contains("cycle detected"), Error);
  }
  SUBCASE("binary conv fed a real value") {
    Graph g = small_chain();
    g.node(g.find_by_name("conv")->id).inputs = {g.find_by_name("x")->id};
    CHECK(has_rule(validate(g), "dtype-mismatch"));
  }
  SUBCASE("non-binary weights") {
    Graph g = small_chain();
    g.node(g.find_by_name("conv")->id).params["w"].real[0] = 0.5;
    CHECK(has_rule(validate(g), "dtype-mismatch"));
  }
  SUBCASE("weight shape") {
    Graph g = small_chain();
    g.node(g.find_by_name("conv")->id).attrs.out_channels = 7;
    CHECK(has_rule(validate(g), "shape-mismatch"));
  }
  SUBCASE("negative variance") {
    Graph g = small_chain();
    g.node(g.find_by_name("bn")->id).params["sigma2"].real[2] = -1.0;
    CHECK(has_rule(validate(g), "bn-params"));
  }
  SUBCASE("affine-free BN with gamma") {
    Graph g = small_chain();
    Node& bn = g.node(g.find_by_name("bn")->id);
    bn.attrs.affine_free = true;
    bn.params["gamma"].real[0] = 2.0;
    CHECK(has_rule(validate(g), "bn-params"));
  }
  SUBCASE("arity") {
    Graph g = small_chain();
    g.node(g.find_by_name("bn")->id).inputs.push_back(g.find_by_name("x")->id);
    CHECK(has_rule(validate(g), "arity"));
  }
  SUBCASE("add shapes") {
    GraphBuilder b;
    const int x = b.input("x", {4, 8, 8});
    const int p = b.avg_pool(x, "pool", 2);
    b.set_outputs({b.add(x, p, "add")});
    CHECK(has_rule(validate(b.graph()), "shape-mismatch"));
  }
  SUBCASE("missing output") {
    Graph g = small_chain();
    g.outputs = {1234};
    CHECK(has_rule(validate(g), "output"));
  }
  SUBCASE("threshold direction code") {
    Graph g = small_chain();
    Node& sg = g.node(g.find_by_name("sg")->id);
    sg.kind = OpKind::Threshold;
    sg.params["tau"] = Tensor::float64({4}, {0, 0, 0, 0});
    sg.params["direction"] = Tensor::uint8({4}, {0, 1, 2, 9});
    CHECK(has_rule(validate(g), "threshold-params"));
  }
  SUBCASE("infer_values throws on invalid graphs") {
    Graph g = small_chain();
    g.outputs.clear();
    CHECK_THROWS_AS(infer_values(g), Error);
  }
}

TEST_CASE("topological order breaks ties by smallest id") {
  GraphBuilder b;
  const int x = b.input("x", {2, 4, 4});
  const int p = b.avg_pool(x, "p", 2);
  const int q = b.avg_pool(x, "q", 2);
  const int s = b.add(q, p, "s");
  b.set_outputs({s});
  Graph g = b.graph();
  std::reverse(g.nodes.begin(), g.nodes.end());
  CHECK(topological_order(g) == std::vector<int>{x, p, q, s});
}

TEST_CASE("op kind names round trip") {
  for (OpKind k : kAllOpKinds) CHECK(op_kind_from_string(to_string(k)) == k);
  CHECK_THROWS_AS(op_kind_from_string("Conv3D"), Error);
}

TEST_CASE("execution plan buffer reuse respects liveness") {
  for (const char* arch : {"neuroblend20", "blendmixer-s4"}) {
    CAPTURE(arch);
    const ExecutionPlan plan = topo_schedule(build_arch(arch, 10));
    CHECK(plan.buffers.size() < plan.steps.size());
    // Values sharing a buffer must have disjoint [defined, last_use] ranges.
    std::map<int, std::vector<int>> by_buffer;
    for (const auto& [node, buf] : plan.buffer_of) by_buffer[buf].push_back(node);
    for (const auto& [buf, nodes] : by_buffer) {
      const BufferSlot& slot = plan.buffers[static_cast<size_t>(buf)];
      for (size_t i = 0; i < nodes.size(); ++i) {
        const ValueInfo& info = plan.values.at(nodes[i]);
        CHECK(info.kind == slot.kind);
        CHECK(buffer_elements(info, plan.word_size) <= slot.elements);
        for (size_t j = i + 1; j < nodes.size(); ++j) {
          const Liveness a = plan.liveness.at(nodes[i]), b = plan.liveness.at(nodes[j]);
          CHECK((a.last_use < b.defined || b.last_use < a.defined));
        }
      }
    }
    // Every buffer is written before it is read.
    std::set<int> written;
    for (const auto& step : plan.steps) {
      for (int in : step.inputs) CHECK(written.count(in) == 1);
      written.insert(step.output);
    }
  }
}
