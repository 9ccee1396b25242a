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
#include "blendnet/model_io.hpp"

using namespace blend;

TEST_CASE("random_init is a pure function of the seed") {
  Graph a = build_neuroblend20(10), b = build_neuroblend20(10), c = build_neuroblend20(10);
  random_init(a, 7);
  random_init(b, 7);
  random_init(c, 8);
  CHECK(a == b);
  CHECK(serialize_model(a) == serialize_model(b));
  CHECK_FALSE(a == c);
  CHECK(validate(a).empty());
}

TEST_CASE("seed 7 golden parameters") {
  Graph g = build_neuroblend20(10);
  random_init(g, 7);
  CHECK(g.find_by_name("block3.conv")->param("w").real[0] == 1.0);
  CHECK(g.find_by_name("stem.conv")->param("w").real[0] == 0.12115702778100967);
  const Node* bn = g.find_by_name("block3.bn");
  CHECK(bn->param("gamma").real[0] == 1.5107598304748535);
  CHECK(bn->param("mu").real[0] == -8.7108879089355469);
  CHECK(bn->param("sigma2").real[0] == 207.49647521972656);
}

TEST_CASE("parameter ranges") {
  Graph g = build_neuroblend20(10);
  random_init(g, 1);
  for (const auto& n : g.nodes) {
    if (n.kind == OpKind::BinaryConv2D)
      for (double w : n.param("w").real) CHECK(std::fabs(w) == 1.0);
    if (n.kind == OpKind::BatchNorm && !n.attrs.affine_free)
      for (double gm : n.param("gamma").real) {
        CHECK(std::fabs(gm) >= 0.5);
        CHECK(std::fabs(gm) <= 2.0);
      }
    if (n.kind == OpKind::BatchNorm && n.attrs.affine_free) {
      for (double gm : n.param("gamma").real) CHECK(gm == 1.0);
      for (double bt : n.param("beta").real) CHECK(bt == 0.0);
    }
  }
}

TEST_CASE("mixer specs and precision strings") {
  const MixerSpec s = MixerSpec::s4(), b = MixerSpec::b4(), w = MixerSpec::s2_4();
  CHECK(s.sequence_length == 64);
  CHECK(s.hidden == 128);
  CHECK(s.channel_mlp == 512);
  CHECK(s.token_mlp == 64);
  CHECK(s.layers == 8);
  CHECK(b.hidden == 192);
  CHECK(b.channel_mlp == 768);
  CHECK(b.token_mlp == 96);
  CHECK(b.layers == 12);
  CHECK(w.hidden == 256);
  CHECK(w.channel_mlp == 1024);
  CHECK(w.token_mlp == 128);

  const MixingPrecision p = MixingPrecision::parse("BB/FPB");
  CHECK(p.token[0] == Precision::Binary);
  CHECK(p.token[1] == Precision::Binary);
  CHECK(p.channel[0] == Precision::Fixed);
  CHECK(p.channel[1] == Precision::Binary);
  CHECK(p.to_string() == "BB/FPB");
  CHECK(MixingPrecision::parse("BFP/BB").to_string() == "BFP/BB");
  CHECK_THROWS_AS(MixingPrecision::parse("BX/BB"), Error);
  CHECK_THROWS_AS(MixingPrecision::parse("BB"), Error);
}

TEST_CASE("mixer graphs") {
  const Graph blend = build_arch("blendmixer-s4", 10);
  CHECK(validate(blend).empty());
  CHECK(infer_values(blend).at(blend.outputs[0]).shape() == Shape{10, 1, 1});
  int binary_fc = 0;
  for (const auto& n : blend.nodes)
    if (n.kind == OpKind::Linear && n.attrs.precision == Precision::Binary) ++binary_fc;
  CHECK(binary_fc == 8 * 4);

  const Graph fp = build_arch("mlpmixer-s4", 10);
  for (const auto& n : fp.nodes) {
    CHECK(n.kind != OpKind::SignFn);
    CHECK(n.kind != OpKind::BinaryConv2D);
    if (n.kind == OpKind::Linear) CHECK(n.attrs.precision == Precision::Fixed);
  }
  const Graph mixed = build_arch("blendmixer-2s4:BB/FPB", 10);
  CHECK(validate(mixed).empty());
  CHECK_THROWS_AS(build_arch("resnet50", 10), Error);
}

TEST_CASE("random_input lies on the Q8.8 grid") {
  const RealTensor x = random_input({3, 4, 4}, 9);
  for (double v : x.data) {
    CHECK(v >= -1.0);
    CHECK(v <= 1.0);
    CHECK(std::ldexp(v, 8) == std::nearbyint(std::ldexp(v, 8)));
  }
  CHECK(random_input({3, 4, 4}, 9) == x);
}
