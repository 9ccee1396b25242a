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
#include "blendnet/passes.hpp"

#include <algorithm>
#include <bit>
#include <functional>
#include <limits>
#include <set>

namespace blend {

const char* to_string(Direction d) {
  switch (d) {
    case Direction::GE: return "GE";
    case Direction::LE: return "LE";
    case Direction::ConstPos: return "CONST_POS";
    case Direction::ConstNeg: return "CONST_NEG";
  }
  return "?";
}

ThresholdParams ThresholdParams::from_node(const Node& node) {
  ThresholdParams t;
  t.tau = real_param(node, "tau");
  for (auto d : node.param("direction").bytes) t.direction.push_back(static_cast<Direction>(d));
  return t;
}

void ThresholdParams::store(Node& node) const {
  const Shape s{static_cast<int64_t>(channels())};
  node.params["tau"] = Tensor::float64(s, tau);
  std::vector<uint8_t> d;
  for (auto v : direction) d.push_back(static_cast<uint8_t>(v));
  node.params["direction"] = Tensor::uint8(s, std::move(d));
}

namespace {

// Total order on doubles as int64 keys; -0 and +0 share key 0.
int64_t order_key(double d) {
  const auto bits = std::bit_cast<uint64_t>(d);
  const uint64_t mag = bits & ~(uint64_t{1} << 63);
  return (bits >> 63) ? -static_cast<int64_t>(mag) : static_cast<int64_t>(mag);
}

double from_key(int64_t k) {
  if (k >= 0) return std::bit_cast<double>(static_cast<uint64_t>(k));
  return std::bit_cast<double>(static_cast<uint64_t>(-k) | (uint64_t{1} << 63));
}

// Smallest finite double y with pred(y) true, pred monotone false -> true.
// Returns +inf when pred is false everywhere.
double lower_boundary(const std::function<bool(double)>& pred) {
  int64_t lo = order_key(std::numeric_limits<double>::lowest());
  int64_t hi = order_key(std::numeric_limits<double>::max());
  if (pred(from_key(lo))) return -std::numeric_limits<double>::infinity();
  if (!pred(from_key(hi))) return std::numeric_limits<double>::infinity();
  // invariant: pred(lo) false, pred(hi) true. The key span exceeds int64.
  while (static_cast<uint64_t>(hi) - static_cast<uint64_t>(lo) > 1) {
    const int64_t mid = static_cast<int64_t>(static_cast<uint64_t>(lo) + (static_cast<uint64_t>(hi) - static_cast<uint64_t>(lo)) / 2);
    (pred(from_key(mid)) ? hi : lo) = mid;
  }
  return from_key(hi);
}

}  // namespace

ThresholdParams threshold_from_bn(const BNParams& bn) {
  ThresholdParams t;
  const auto inf = std::numeric_limits<double>::infinity();
  for (size_t c = 0; c < bn.channels(); ++c) {
    const double g = bn.gamma[c];
    if (g > 0) {
      t.tau.push_back(lower_boundary([&](double y) { return bn.apply(c, y) >= 0; }));
      t.direction.push_back(Direction::GE);
    } else if (g < 0) {
      // {y : BN(y) >= 0} is a down-set; its sup is the predecessor of the
      // smallest y with BN(y) < 0.
      const double first_neg = lower_boundary([&](double y) { return !(bn.apply(c, y) >= 0); });
      t.tau.push_back(first_neg == -inf ? -inf
                      : first_neg == inf ? inf
                                         : from_key(order_key(first_neg) - 1));
      t.direction.push_back(Direction::LE);
    } else {
      t.tau.push_back(0.0);
      t.direction.push_back(bn.beta[c] >= 0 ? Direction::ConstPos : Direction::ConstNeg);
    }
  }
  return t;
}

nlohmann::json PassStats::to_json() const {
  return {{"pass", pass},
          {"matched", matched},
          {"rewritten", rewritten},
          {"skipped", skipped},
          {"added", added},
          {"removed", removed},
          {"nodes_before", nodes_before},
          {"nodes_after", nodes_after},
          {"census_before", census_before},
          {"census_after", census_after},
          {"notes", notes}};
}

int PassReport::total_rewrites() const {
  int n = 0;
  for (const auto& p : passes) n += p.rewritten;
  return n;
}

nlohmann::json PassReport::to_json() const {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& p : passes) j.push_back(p.to_json());
  return {{"passes", j}, {"total_rewrites", total_rewrites()}};
}

namespace {

class PassScope {
 public:
  PassScope(Graph& g, std::string name) : g_(g) {
    stats_.pass = std::move(name);
    stats_.nodes_before = static_cast<int>(g.nodes.size());
    stats_.census_before = g.census();
  }

  PassStats finish() {
    std::erase_if(g_.nodes, [&](const Node& n) { return dead_.count(n.id) != 0; });
    sort_nodes(g_);
    stats_.nodes_after = static_cast<int>(g_.nodes.size());
    stats_.census_after = g_.census();
    return std::move(stats_);
  }

  void remove(int id) {
    if (dead_.insert(id).second) ++stats_.removed;
  }
  int add(Node n) {
    ++stats_.added;
    n.id = std::max(g_.next_id(), next_free_);
    next_free_ = n.id + 1;
    return g_.add(std::move(n));
  }
  bool is_output(int id) const { return std::find(g_.outputs.begin(), g_.outputs.end(), id) != g_.outputs.end(); }
  void replace_uses(int from, int to, int except = -1) {
    for (auto& n : g_.nodes) {
      if (n.id == except) continue;
      std::replace(n.inputs.begin(), n.inputs.end(), from, to);
    }
    std::replace(g_.outputs.begin(), g_.outputs.end(), from, to);
  }
  bool alive(int id) const { return !dead_.count(id); }

  PassStats& stats() { return stats_; }

 private:
  Graph& g_;
  PassStats stats_;
  std::set<int> dead_;
  int next_free_ = 0;
};

std::vector<int> ids_of(const Graph& g, OpKind kind) {
  std::vector<int> ids;
  for (const auto& n : g.nodes)
    if (n.kind == kind) ids.push_back(n.id);
  std::sort(ids.begin(), ids.end());
  return ids;
}

bool has_float_bn(const Node& n) { return n.kind == OpKind::BatchNorm && n.has_param("gamma"); }

PassStats fuse_bn_conv_impl(Graph& g, bool absorb_trailing) {
  PassScope scope(g, absorb_trailing ? "fuse_bn_conv_bn" : "fuse_bn_conv");
  for (int conv_id : ids_of(g, OpKind::FixedConv2D)) {
    const auto consumers = g.consumers();
    Node& conv = g.node(conv_id);
    Node* lead = g.find(conv.inputs.at(0));
    if (!lead || !has_float_bn(*lead)) continue;
    ++scope.stats().matched;
    const std::string site = lead->name + " -> " + conv.name;
    if (consumers.at(lead->id).size() != 1 || scope.is_output(lead->id)) {
      ++scope.stats().skipped;
      scope.stats().notes.push_back(site + ": BN has other consumers, skipped");
      continue;
    }
    const BNParams bn1 = BNParams::from_node(*lead);
    ConvParams p = ConvParams::from_node(conv);
    if (!p.weights.is_real()) continue;
    const auto& a = conv.attrs;
    const size_t co = static_cast<size_t>(a.out_channels), ci = static_cast<size_t>(a.in_channels);
    const size_t kk = static_cast<size_t>(a.kernel * a.kernel);
    if (a.padding > 0 && std::any_of(bn1.gamma.begin(), bn1.gamma.end(), [](double v) { return v == 0.0; })) {
      ++scope.stats().skipped;
      scope.stats().notes.push_back(site + ": gamma == 0 with spatial padding, padding value undefined, skipped");
      continue;
    }

    // Leading BN: w' = gamma w / s, b' = b + sum w (beta - gamma mu / s).
    std::vector<double> w1(p.weights.real.size());
    std::vector<double> b1 = p.bias;
    for (size_t o = 0; o < co; ++o)
      for (size_t i = 0; i < ci; ++i) {
        const double s = bn1.stddev(i);
        const double scale = bn1.gamma[i] / s;
        const double shift = bn1.beta[i] - bn1.gamma[i] * bn1.mu[i] / s;
        for (size_t k = 0; k < kk; ++k) {
          const size_t idx = (o * ci + i) * kk + k;
          w1[idx] = scale * p.weights.real[idx];
          b1[o] += p.weights.real[idx] * shift;
        }
      }
    // Borders must see the BN preimage of the old padding value.
    std::vector<double> pad = p.padding_value;
    if (a.padding > 0)
      for (size_t i = 0; i < ci; ++i)
        pad[i] = bn1.mu[i] + bn1.stddev(i) * (p.padding_value[i] - bn1.beta[i]) / bn1.gamma[i];

    int trailing_id = -1;
    if (absorb_trailing) {
      auto it = consumers.find(conv.id);
      if (it != consumers.end() && it->second.size() == 1 && !scope.is_output(conv.id)) {
        const Node& t = g.node(it->second[0]);
        if (has_float_bn(t)) trailing_id = t.id;
      }
    }
    if (trailing_id >= 0) {
      // Trailing BN: w'' = gamma'' w' / s'', b'' = beta'' + gamma'' (b' - mu'') / s''.
      const BNParams bn2 = BNParams::from_node(g.node(trailing_id));
      for (size_t o = 0; o < co; ++o) {
        const double s = bn2.stddev(o);
        for (size_t k = 0; k < ci * kk; ++k) w1[o * ci * kk + k] = bn2.gamma[o] * w1[o * ci * kk + k] / s;
        b1[o] = bn2.beta[o] + bn2.gamma[o] * (b1[o] - bn2.mu[o]) / s;
      }
    }

    ConvParams fused;
    fused.weights = Tensor::float64(p.weights.shape, std::move(w1));
    fused.bias = std::move(b1);
    fused.padding_value = std::move(pad);
    Node& conv_ref = g.node(conv_id);
    fused.store(conv_ref, DType::Float64);
    const int lead_id = lead->id;
    conv_ref.inputs[0] = lead->inputs.at(0);
    scope.remove(lead_id);
    if (trailing_id >= 0) {
      scope.replace_uses(trailing_id, conv_id);
      scope.remove(trailing_id);
    }
    ++scope.stats().rewritten;
  }
  return scope.finish();
}

}  // namespace

PassStats distribute_trailing_bn(Graph& g) {
  PassScope scope(g, "distribute_trailing_bn");
  for (int bn_id : ids_of(g, OpKind::BatchNorm)) {
    const auto consumers = g.consumers();
    auto it = consumers.find(bn_id);
    if (it == consumers.end()) continue;
    const std::vector<int> cons = it->second;
    const bool feeds_sign = std::any_of(cons.begin(), cons.end(), [&](int c) { return g.node(c).kind == OpKind::SignFn; });
    if (!feeds_sign) continue;
    ++scope.stats().matched;
    const Node bn = g.node(bn_id);
    const bool distinct = cons.size() == 2 && cons[0] != cons[1];
    if (!distinct || scope.is_output(bn_id)) {
      ++scope.stats().skipped;
      scope.stats().notes.push_back(bn.name + ": " + std::to_string(cons.size()) +
                                    " consumers (expected main + skip), skipped");
      continue;
    }
    for (int c : cons) {
      Node copy = bn;
      copy.id = -1;
      copy.name = bn.name + "@" + g.node(c).name;
      if (g.node(c).kind == OpKind::AvgPool) {
        // Per-channel affine maps commute with spatial averaging.
        g.node(c).inputs[0] = bn.inputs.at(0);
        copy.inputs = {c};
        const int copy_id = scope.add(std::move(copy));
        scope.replace_uses(c, copy_id, copy_id);
      } else {
        copy.inputs = bn.inputs;
        const int copy_id = scope.add(std::move(copy));
        auto& ins = g.node(c).inputs;
        std::replace(ins.begin(), ins.end(), bn_id, copy_id);
      }
    }
    scope.remove(bn_id);
    ++scope.stats().rewritten;
  }
  return scope.finish();
}

PassStats fuse_bn_sign_to_threshold(Graph& g) {
  PassScope scope(g, "fuse_bn_sign_to_threshold");
  for (int sign_id : ids_of(g, OpKind::SignFn)) {
    Node& sg = g.node(sign_id);
    const Node* bn = g.find(sg.inputs.at(0));
    if (!bn || !has_float_bn(*bn)) continue;
    ++scope.stats().matched;
    const int bn_id = bn->id;
    const ThresholdParams t = threshold_from_bn(BNParams::from_node(*bn));
    sg.kind = OpKind::Threshold;
    sg.inputs = bn->inputs;
    t.store(sg);
    ++scope.stats().rewritten;
    const auto consumers = g.consumers();
    if (!consumers.count(bn_id) && !scope.is_output(bn_id)) scope.remove(bn_id);
  }
  return scope.finish();
}

PassStats fuse_bn_conv(Graph& g) { return fuse_bn_conv_impl(g, false); }

PassStats fuse_bn_conv_bn(Graph& g) { return fuse_bn_conv_impl(g, true); }

PassStats eliminate_dead_nodes(Graph& g) {
  PassScope scope(g, "dead_node_elimination");
  std::set<int> live;
  std::vector<int> stack(g.outputs.begin(), g.outputs.end());
  while (!stack.empty()) {
    const int id = stack.back();
    stack.pop_back();
    if (!live.insert(id).second) continue;
    if (const Node* n = g.find(id))
      for (int in : n->inputs) stack.push_back(in);
  }
  for (const auto& n : g.nodes)
    if (!live.count(n.id) && n.kind != OpKind::Input) {
      scope.remove(n.id);
      ++scope.stats().matched;
      ++scope.stats().rewritten;
    }
  return scope.finish();
}

std::vector<std::string> default_pass_list() {
  return {"distribute_trailing_bn", "fuse_bn_sign_to_threshold", "fuse_bn_conv_bn", "dead_node_elimination"};
}

std::vector<std::string> known_passes() {
  return {"distribute_trailing_bn", "fuse_bn_sign_to_threshold", "fuse_bn_conv", "fuse_bn_conv_bn",
          "dead_node_elimination"};
}

PassReport run_pipeline(Graph& graph, std::span<const std::string> passes) {
  static const std::map<std::string, PassStats (*)(Graph&)> table = {
      {"distribute_trailing_bn", &distribute_trailing_bn},
      {"fuse_bn_sign_to_threshold", &fuse_bn_sign_to_threshold},
      {"fuse_bn_conv", &fuse_bn_conv},
      {"fuse_bn_conv_bn", &fuse_bn_conv_bn},
      {"dead_node_elimination", &eliminate_dead_nodes},
  };
  for (const auto& name : passes)
    if (!table.count(name)) throw Error("unknown pass '" + name + "'");
  if (graph.compiled) throw Error("run_pipeline: graph is already compiled");
  PassReport report;
  for (const auto& name : passes) report.passes.push_back(table.at(name)(graph));
  const auto violations = validate(graph);
  if (!violations.empty()) throw Error("pass pipeline produced an invalid graph: " + violations.front().to_string());
  return report;
}

}  // namespace blend
