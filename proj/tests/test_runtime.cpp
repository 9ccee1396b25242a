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

#include <cmath>

#include "blendnet/builders.hpp"
#include "blendnet/runtime.hpp"

using namespace blend;

namespace {

ExecutionPlan nb20_plan(uint64_t seed) {
  Graph g = build_neuroblend20(10);
  random_init(g, seed);
  return topo_schedule(compile(g).graph);
}

}  // namespace

TEST_CASE("execution does not depend on the worker count") {
  const ExecutionPlan plan = nb20_plan(3);
  const RealTensor x = random_input({3, 32, 32}, 7);
  const RealTensor y1 = execute(plan, x, {1});
  CHECK(y1.shape == Shape{10, 1, 1});
  for (int w : {2, 8}) CHECK(execute(plan, x, {w}).data == y1.data);
}

TEST_CASE("batched execution matches per-sample execution") {
  const ExecutionPlan plan = nb20_plan(4);
  const RealTensor a = random_input({3, 32, 32}, 1), b = random_input({3, 32, 32}, 2);
  RealTensor batch({2, 3, 32, 32});
  std::copy(a.data.begin(), a.data.end(), batch.data.begin());
  std::copy(b.data.begin(), b.data.end(), batch.data.begin() + static_cast<std::ptrdiff_t>(a.data.size()));
  const RealTensor y = execute(plan, batch, {2});
  REQUIRE(y.data.size() == 20);
  const RealTensor ya = execute(plan, a, {1}), yb = execute(plan, b, {1});
  CHECK(std::vector<double>(y.data.begin(), y.data.begin() + 10) == ya.data);
  CHECK(std::vector<double>(y.data.begin() + 10, y.data.end()) == yb.data);
}

TEST_CASE("execution rejects mismatched inputs and uncompiled plans") {
  const ExecutionPlan plan = nb20_plan(1);
  CHECK_THROWS_AS(execute(plan, RealTensor({3, 16, 16})), Error);
  CHECK_THROWS_AS(execute(plan, RealTensor({32, 32})), Error);
  Graph g = build_neuroblend20(10);
  random_init(g, 1);
  CHECK_THROWS_AS(execute(topo_schedule(g), random_input({3, 32, 32}, 0)), Error);
}

TEST_CASE("fixed-point skip path stays within a few grid steps of the oracle") {
  GraphBuilder b;
  const int x = b.input("x", {8, 8, 8});
  int y = b.avg_pool(x, "pool", 2);
  y = b.fixed_conv(y, "conv", 8, 16, 1, 1, 0);
  y = b.batch_norm(y, "bn", 16);
  b.set_outputs({y});
  Graph g = b.finish();
  random_init(g, 6);
  const CompileResult c = compile(g);
  const ExecutionPlan plan = topo_schedule(c.graph);
  for (uint64_t s = 0; s < 10; ++s) {
    const RealTensor in = random_input({8, 8, 8}, s);
    const auto r = compare(reference_forward(g, in), execute(plan, in, {1}), std::ldexp(1.0, -6));
    CHECK(r.within_tolerance);
  }
}

TEST_CASE("activation dump covers every node") {
  const ExecutionPlan plan = nb20_plan(2);
  ActivationDump dump;
  QuantStats stats;
  execute(plan, random_input({3, 32, 32}, 0), {1, &stats, &dump});
  CHECK(dump.size() == plan.graph->nodes.size());
  for (const auto& n : plan.graph->nodes)
    if (n.kind == OpKind::Threshold)
      for (double v : dump.at(n.id).data) CHECK(std::abs(v) == 1.0);
}

TEST_CASE("lowering stores runtime parameters") {
  Graph g = build_neuroblend20(10);
  random_init(g, 5);
  const Graph c = compile(g, {default_pass_list(), 64, 8}).graph;
  CHECK(c.compiled);
  CHECK(validate(c).empty());
  const Node* conv = c.find_by_name("block1.conv");
  REQUIRE(conv);
  CHECK(conv->params.at("w").dtype == DType::PackedBits);
  CHECK(conv->params.at("w").word_size == 64);
  CHECK(c.find_by_name("stem.conv")->params.at("w").dtype == DType::Fixed16);
}
