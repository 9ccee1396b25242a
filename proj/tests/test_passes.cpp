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
#include <limits>

#include "blendnet/builders.hpp"
#include "blendnet/oracle.hpp"
#include "blendnet/passes.hpp"
#include "support/oracles.hpp"

using namespace blend;

namespace {

BNParams one_channel(double gamma, double beta, double mu, double sigma2, double eps = 1e-5) {
  BNParams p;
  p.gamma = {gamma};
  p.beta = {beta};
  p.mu = {mu};
  p.sigma2 = {sigma2};
  p.eps = eps;
  return p;
}

// Counts disagreements between the threshold and sign(BN(y)) on a grid and
// around tau.
int mismatches(const BNParams& bn, const ThresholdParams& t) {
  const oracle::Bn ref{bn.gamma[0], bn.beta[0], bn.mu[0], bn.sigma2[0], bn.eps};
  int bad = 0;
  auto probe = [&](double y) {
    // BN itself is undefined where gamma * inf is NaN.
    if (!std::isfinite(y) || std::isnan(ref(y))) return;
    bad += (oracle::sign_bn(ref, y) > 0) != t.fires(0, y) ? 1 : 0;
  };
  for (int i = -4000; i <= 4000; ++i) probe(i / 64.0);
  double y = t.tau[0];
  for (int k = 0; k < 8; ++k) {
    probe(y);
    y = std::nextafter(y, INFINITY);
  }
  y = t.tau[0];
  for (int k = 0; k < 8; ++k) {
    probe(y);
    y = std::nextafter(y, -INFINITY);
  }
  probe(std::numeric_limits<double>::max());
  probe(std::numeric_limits<double>::lowest());
  return bad;
}

Graph bn_then_block(BlockKind kind) {
  GraphBuilder b("t");
  const int x = b.input("x", {16, 8, 8});
  const int bn = b.batch_norm(x, "pre", 16);
  const BlockConfig cfg{16, kind == BlockKind::Normal ? 16 : 32, kind == BlockKind::Normal ? 1 : 2, kind, {}};
  b.set_outputs({b.blend_block(bn, cfg, "blk")});
  Graph g = b.finish();
  random_init(g, 4);
  return g;
}

}  // namespace

TEST_CASE("threshold from BN: sign cases") {
  SUBCASE("gamma > 0 gives GE") {
    const BNParams bn = one_channel(1.0, 0.0, 0.5, 1.0 - 1e-5);
    const ThresholdParams t = threshold_from_bn(bn);
    CHECK(t.direction[0] == Direction::GE);
    CHECK(t.tau[0] == doctest::Approx(0.5));
    CHECK(mismatches(bn, t) == 0);
  }
  SUBCASE("gamma < 0 gives LE") {
    const BNParams bn = one_channel(-2.0, 1.0, 0.25, 3.0);
    const ThresholdParams t = threshold_from_bn(bn);
    CHECK(t.direction[0] == Direction::LE);
    CHECK(t.tau[0] == doctest::Approx(0.25 + std::sqrt(3.0 + 1e-5) / 2));
    CHECK(mismatches(bn, t) == 0);
  }
  SUBCASE("gamma == 0 is constant by the sign of beta") {
    CHECK(threshold_from_bn(one_channel(0.0, 0.5, 0, 1)).direction[0] == Direction::ConstPos);
    CHECK(threshold_from_bn(one_channel(0.0, 0.0, 0, 1)).direction[0] == Direction::ConstPos);
    CHECK(threshold_from_bn(one_channel(0.0, -0.5, 0, 1)).direction[0] == Direction::ConstNeg);
    const BNParams z = one_channel(0.0, -0.0, 3, 1);
    CHECK(mismatches(z, threshold_from_bn(z)) == 0);
  }
  SUBCASE("boundary exactly on a representable value") {
    const BNParams bn = one_channel(1.0, -2.0, 0.0, 1.0 - 1e-5);
    const ThresholdParams t = threshold_from_bn(bn);
    CHECK(t.fires(0, 2.0));
    CHECK_FALSE(t.fires(0, 1.99609375));
  }
}

TEST_CASE("threshold from BN: random parameters") {
  SplitMix64 rng(77);
  int bad = 0;
  for (int i = 0; i < 300; ++i) {
    const double g = rng.uniform(-3, 3);
    const BNParams bn = one_channel(i % 10 == 0 ? 0.0 : g, rng.uniform(-2, 2), rng.uniform(-10, 10), rng.uniform(0, 5),
                                    i % 7 == 0 ? 1e-3 : 1e-5);
    bad += mismatches(bn, threshold_from_bn(bn));
  }
  CHECK(bad == 0);
}

TEST_CASE("distribution through an AvgPool skip") {
  Graph g = bn_then_block(BlockKind::Downsample);
  const Graph before = g;
  const PassStats s = distribute_trailing_bn(g);
  CHECK(s.matched == 1);
  CHECK(s.rewritten == 1);
  CHECK(s.added == 2);
  CHECK(s.removed == 1);
  CHECK(g.find_by_name("pre") == nullptr);
  const Node* pool = g.find_by_name("blk.skip_pool");
  const Node* copy = g.find_by_name("pre@blk.skip_pool");
  REQUIRE(pool);
  REQUIRE(copy);
  CHECK(pool->inputs == std::vector<int>{g.find_by_name("x")->id});
  CHECK(copy->inputs == std::vector<int>{pool->id});
  CHECK(g.find_by_name("blk.skip_conv")->inputs == std::vector<int>{copy->id});
  CHECK(g.find_by_name("blk.sign")->inputs == std::vector<int>{g.find_by_name("pre@blk.sign")->id});
  CHECK(validate(g).empty());

  const RealTensor x = random_input({16, 8, 8}, 1);
  const auto c = compare(reference_forward(before, x), reference_forward(g, x), 1e-12);
  CHECK(c.within_tolerance);
}

TEST_CASE("distribution skips BNs without exactly two consumers") {
  GraphBuilder b;
  const int x = b.input("x", {4, 4, 4});
  const int bn = b.batch_norm(x, "bn", 4);
  const int s = b.sign(bn, "sg");
  const int p = b.avg_pool(bn, "pool", 2);
  const int gp = b.global_avg_pool(bn, "gap");
  b.set_outputs({s, p, gp});
  Graph g = b.finish();
  const PassStats st = distribute_trailing_bn(g);
  CHECK(st.matched == 1);
  CHECK(st.skipped == 1);
  CHECK(st.rewritten == 0);
  REQUIRE(st.notes.size() == 1);
  CHECK(st.notes[0].find("3 consumers") != std::string::npos);
}

TEST_CASE("BN-conv fusion refuses gamma == 0 with padding") {
  GraphBuilder b;
  const int x = b.input("x", {3, 6, 6});
  const int bn = b.batch_norm(x, "bn", 3);
  b.set_outputs({b.fixed_conv(bn, "conv", 3, 4, 3, 1, 1)});
  Graph g = b.finish();
  random_init(g, 2);
  g.node(bn).params["gamma"].real[1] = 0.0;
  const PassStats st = fuse_bn_conv(g);
  CHECK(st.skipped == 1);
  CHECK(st.rewritten == 0);
  CHECK(st.notes.at(0).find("gamma == 0") != std::string::npos);
  CHECK(g.find_by_name("bn") != nullptr);
}

TEST_CASE("full pipeline on NeuroBlend-20") {
  Graph g = build_neuroblend20(10);
  random_init(g, 5);
  const Graph original = g;
  const PassReport r = run_pipeline(g);
  REQUIRE(r.passes.size() == 4);
  CHECK(r.passes[0].rewritten == 9);
  CHECK(r.passes[1].rewritten == 9);
  CHECK(r.passes[2].rewritten == 2);
  CHECK(r.passes[3].rewritten == 0);
  for (const auto& p : r.passes) CHECK(p.nodes_before + p.added == p.nodes_after + p.removed);
  const auto census = g.census();
  CHECK(census.at("Threshold") == 9);
  CHECK(census.count("SignFn") == 0);
  CHECK(census.at("BatchNorm") == 17);

  // Thresholds keep the SignFn identity.
  for (const auto& n : original.nodes)
    if (n.kind == OpKind::SignFn) {
      const Node* t = g.find(n.id);
      REQUIRE(t);
      CHECK(t->kind == OpKind::Threshold);
      CHECK(t->name == n.name);
    }

  const Graph once = g;
  const PassReport again = run_pipeline(g);
  CHECK(again.total_rewrites() == 0);
  CHECK(g == once);
}

TEST_CASE("unknown pass names are rejected before any rewrite") {
  Graph g = build_neuroblend20(10);
  const Graph before = g;
  const std::vector<std::string> passes{"fuse_bn_sign_to_threshold", "fold_everything"};
  CHECK_THROWS_WITH_AS(run_pipeline(g, passes), doctest::Contains("fold_everything"), Error);
  CHECK(g == before);
}

TEST_CASE("dead node elimination") {
  GraphBuilder b;
  const int x = b.input("x", {2, 4, 4});
  const int p = b.avg_pool(x, "used", 2);
  b.avg_pool(x, "unused", 2);
  b.set_outputs({p});
  Graph g = b.finish();
  const PassStats s = eliminate_dead_nodes(g);
  CHECK(s.removed == 1);
  CHECK(g.find_by_name("unused") == nullptr);
  CHECK(g.find_by_name("x") != nullptr);
}

TEST_CASE("report serializes") {
  Graph g = build_neuroblend20(10);
  const auto j = run_pipeline(g).to_json();
  CHECK(j.at("total_rewrites").get<int>() == 20);
  CHECK(j.at("passes").size() == 4);
  CHECK(j.at("passes")[0].at("pass") == "distribute_trailing_bn");
}
