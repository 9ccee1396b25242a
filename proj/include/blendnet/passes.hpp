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
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "blendnet/graph.hpp"

namespace blend {

// Per-channel comparison used by Threshold nodes. GE emits +1 when y >= tau,
// LE when y <= tau; the constant directions ignore the input.
enum class Direction : uint8_t { GE = 0, LE = 1, ConstPos = 2, ConstNeg = 3 };
const char* to_string(Direction d);

struct ThresholdParams {
  std::vector<double> tau;
  std::vector<Direction> direction;

  size_t channels() const { return tau.size(); }
  bool fires(size_t c, double y) const {
    switch (direction[c]) {
      case Direction::GE: return y >= tau[c];
      case Direction::LE: return y <= tau[c];
      case Direction::ConstPos: return true;
      case Direction::ConstNeg: return false;
    }
    return false;
  }

  static ThresholdParams from_node(const Node& node);
  void store(Node& node) const;
};

// Threshold equivalent to sign(BN(y)) with sign(0) = +1. tau is the exact
// floating-point boundary of BNParams::apply (smallest double mapped to >= 0
// for gamma > 0, largest for gamma < 0), so the equivalence holds for every
// double input, not just away from the boundary. gamma == 0 yields a constant
// direction chosen by the sign of beta.
ThresholdParams threshold_from_bn(const BNParams& bn);

struct PassStats {
  std::string pass;
  int matched = 0;
  int rewritten = 0;
  int skipped = 0;
  int added = 0;
  int removed = 0;
  int nodes_before = 0;
  int nodes_after = 0;
  std::map<std::string, int> census_before;
  std::map<std::string, int> census_after;
  std::vector<std::string> notes;

  nlohmann::json to_json() const;
};

struct PassReport {
  std::vector<PassStats> passes;

  int total_rewrites() const;
  nlohmann::json to_json() const;
};

// Moves a BN feeding a block entry (one SignFn consumer plus one skip-path
// consumer) into both paths. On a skip path that starts with AvgPool the copy
// is placed after the pool.
PassStats distribute_trailing_bn(Graph& graph);
// BN -> SignFn becomes a Threshold node that keeps the SignFn's id and name.
PassStats fuse_bn_sign_to_threshold(Graph& graph);
// BN -> FixedConv2D folds into the conv (weights, bias, padding value).
PassStats fuse_bn_conv(Graph& graph);
// As fuse_bn_conv, additionally absorbing a BN that directly follows the conv.
PassStats fuse_bn_conv_bn(Graph& graph);
PassStats eliminate_dead_nodes(Graph& graph);

std::vector<std::string> default_pass_list();
std::vector<std::string> known_passes();

// Runs the named passes in order on an exclusively owned graph. Throws
// blend::Error on an unknown pass name (before touching the graph).
PassReport run_pipeline(Graph& graph, std::span<const std::string> passes);
inline PassReport run_pipeline(Graph& graph) {
  const auto list = default_pass_list();
  return run_pipeline(graph, list);
}

}  // namespace blend
