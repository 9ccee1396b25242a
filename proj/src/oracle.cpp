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
#include "blendnet/oracle.hpp"

#include <algorithm>
#include <cmath>

#include "blendnet/passes.hpp"

namespace blend {

namespace {

double pm1(double v) { return v >= 0 ? 1.0 : -1.0; }

RealTensor conv(const RealTensor& x, const Node& n, bool binary) {
  const auto& a = n.attrs;
  const int64_t C = x.shape[0], H = x.shape[1], W = x.shape[2];
  const int64_t Co = a.out_channels, k = a.kernel;
  const int64_t Ho = (H + 2 * a.padding - k) / a.stride + 1, Wo = (W + 2 * a.padding - k) / a.stride + 1;
  const auto& w = real_param(n, "w");
  std::vector<double> bias(static_cast<size_t>(Co), 0.0), pad(static_cast<size_t>(C), binary ? (a.pad_bit ? 1.0 : -1.0) : 0.0);
  if (!binary) {
    const ConvParams p = ConvParams::from_node(n);
    bias = p.bias;
    pad = p.padding_value;
  }
  RealTensor out({Co, Ho, Wo});
  for (int64_t o = 0; o < Co; ++o)
    for (int64_t oy = 0; oy < Ho; ++oy)
      for (int64_t ox = 0; ox < Wo; ++ox) {
        double acc = bias[static_cast<size_t>(o)];
        for (int64_t i = 0; i < C; ++i)
          for (int64_t ky = 0; ky < k; ++ky)
            for (int64_t kx = 0; kx < k; ++kx) {
              const int64_t iy = oy * a.stride - a.padding + ky, ix = ox * a.stride - a.padding + kx;
              const bool inside = iy >= 0 && iy < H && ix >= 0 && ix < W;
              const double v = inside ? x.data[static_cast<size_t>((i * H + iy) * W + ix)] : pad[static_cast<size_t>(i)];
              acc += v * w[static_cast<size_t>(((o * C + i) * k + ky) * k + kx)];
            }
        out.data[static_cast<size_t>((o * Ho + oy) * Wo + ox)] = acc;
      }
  if (n.kind == OpKind::PatchEmbed) out.shape = {Co, Ho * Wo, 1};
  return out;
}

RealTensor linear(const RealTensor& x, const Node& n) {
  const int64_t C = x.shape[0], P = x.shape[1] * x.shape[2], Co = n.attrs.out_channels;
  const auto& w = real_param(n, "w");
  const bool fixed = n.attrs.precision == Precision::Fixed;
  RealTensor out({Co, x.shape[1], x.shape[2]});
  for (int64_t o = 0; o < Co; ++o)
    for (int64_t p = 0; p < P; ++p) {
      double acc = fixed ? real_param(n, "b")[static_cast<size_t>(o)] : 0.0;
      for (int64_t i = 0; i < C; ++i) acc += x.data[static_cast<size_t>(i * P + p)] * w[static_cast<size_t>(o * C + i)];
      out.data[static_cast<size_t>(o * P + p)] = acc;
    }
  return out;
}

RealTensor pool(const RealTensor& x, int k, int s, bool is_max) {
  const int64_t C = x.shape[0], H = x.shape[1], W = x.shape[2];
  const int64_t Ho = (H - k) / s + 1, Wo = (W - k) / s + 1;
  RealTensor out({C, Ho, Wo});
  for (int64_t c = 0; c < C; ++c)
    for (int64_t oy = 0; oy < Ho; ++oy)
      for (int64_t ox = 0; ox < Wo; ++ox) {
        double acc = is_max ? -INFINITY : 0.0;
        for (int ky = 0; ky < k; ++ky)
          for (int kx = 0; kx < k; ++kx) {
            const double v = x.data[static_cast<size_t>((c * H + oy * s + ky) * W + ox * s + kx)];
            acc = is_max ? std::max(acc, v) : acc + v;
          }
        out.data[static_cast<size_t>((c * Ho + oy) * Wo + ox)] = is_max ? acc : acc / (k * k);
      }
  return out;
}

RealTensor evaluate(const Node& n, const std::vector<const RealTensor*>& in) {
  const RealTensor& x = *in.at(0);
  const int64_t C = x.shape.at(0), P = x.size() / std::max<int64_t>(C, 1);
  switch (n.kind) {
    case OpKind::Input: return x;
    case OpKind::SignFn: {
      RealTensor out = x;
      for (auto& v : out.data) v = pm1(v);
      return out;
    }
    case OpKind::Threshold: {
      const ThresholdParams t = ThresholdParams::from_node(n);
      RealTensor out = x;
      for (int64_t c = 0; c < C; ++c)
        for (int64_t p = 0; p < P; ++p) {
          auto& v = out.data[static_cast<size_t>(c * P + p)];
          v = t.fires(static_cast<size_t>(c), v) ? 1.0 : -1.0;
        }
      return out;
    }
    case OpKind::BinaryConv2D: return conv(x, n, true);
    case OpKind::FixedConv2D:
    case OpKind::PatchEmbed: return conv(x, n, false);
    case OpKind::Linear: return linear(x, n);
    case OpKind::BatchNorm: {
      const BNParams bn = BNParams::from_node(n);
      RealTensor out = x;
      for (int64_t c = 0; c < C; ++c)
        for (int64_t p = 0; p < P; ++p) {
          auto& v = out.data[static_cast<size_t>(c * P + p)];
          v = bn.apply(static_cast<size_t>(c), v);
        }
      return out;
    }
    case OpKind::PReLU: {
      const auto& alpha = real_param(n, "alpha");
      RealTensor out = x;
      for (int64_t c = 0; c < C; ++c)
        for (int64_t p = 0; p < P; ++p) {
          auto& v = out.data[static_cast<size_t>(c * P + p)];
          if (v < 0) v *= alpha[static_cast<size_t>(c)];
        }
      return out;
    }
    case OpKind::AvgPool: return pool(x, n.attrs.kernel, n.attrs.stride, false);
    case OpKind::MaxPoolOr: return pool(x, n.attrs.kernel, n.attrs.stride, true);
    case OpKind::Add: {
      RealTensor out = x;
      const RealTensor& y = *in.at(1);
      for (size_t i = 0; i < out.data.size(); ++i) out.data[i] += y.data[i];
      return out;
    }
    case OpKind::GlobalAvgPool: {
      RealTensor out({C, 1, 1});
      for (int64_t c = 0; c < C; ++c) {
        double acc = 0.0;
        for (int64_t p = 0; p < P; ++p) acc += x.data[static_cast<size_t>(c * P + p)];
        out.data[static_cast<size_t>(c)] = acc / static_cast<double>(P);
      }
      return out;
    }
    case OpKind::Transpose: {
      const int64_t H = x.shape[1], W = x.shape[2];
      RealTensor out({H, C, W});
      for (int64_t c = 0; c < C; ++c)
        for (int64_t h = 0; h < H; ++h)
          for (int64_t w = 0; w < W; ++w)
            out.data[static_cast<size_t>((h * C + c) * W + w)] = x.data[static_cast<size_t>((c * H + h) * W + w)];
      return out;
    }
  }
  throw Error("reference_forward: unsupported op");
}

}  // namespace

RealTensor reference_forward(const Graph& graph, const RealTensor& input, ActivationDump* dump) {
  if (graph.compiled) throw Error("reference_forward: graph is compiled; evaluate the uncompiled form");
  const auto values = infer_values(graph);
  const auto inputs = graph.input_ids();
  if (inputs.size() != 1) throw Error("reference_forward: expected exactly one graph input");
  const Shape expected = values.at(inputs[0]).shape();
  if (input.shape != expected)
    throw Error("reference_forward: input shape " + to_string(input.shape) + " does not match " + to_string(expected));

  ActivationDump local;
  ActivationDump& acts = dump ? *dump : local;
  acts.clear();
  for (int id : topological_order(graph)) {
    const Node& n = graph.node(id);
    if (n.kind == OpKind::Input) {
      acts[id] = input;
      continue;
    }
    std::vector<const RealTensor*> in;
    for (int i : n.inputs) in.push_back(&acts.at(i));
    acts[id] = evaluate(n, in);
  }
  return acts.at(graph.outputs.at(0));
}

nlohmann::json ComparisonReport::to_json() const {
  nlohmann::json j = {{"max_abs_diff", max_abs_diff},
                      {"mean_abs_diff", mean_abs_diff},
                      {"argmax_agree", argmax_agree},
                      {"argmax_total", argmax_total},
                      {"tolerance", tolerance},
                      {"within_tolerance", within_tolerance}};
  if (first_divergence) {
    j["first_divergence"] = {{"node", *first_divergence}, {"name", first_divergence_name}};
  } else {
    j["first_divergence"] = nullptr;
  }
  return j;
}

ComparisonReport compare(const RealTensor& a, const RealTensor& b, double tolerance) {
  if (a.shape != b.shape) throw Error("compare: shape " + to_string(a.shape) + " vs " + to_string(b.shape));
  ComparisonReport r;
  r.tolerance = tolerance;
  double sum = 0.0;
  for (size_t i = 0; i < a.data.size(); ++i) {
    const double d = std::fabs(a.data[i] - b.data[i]);
    r.max_abs_diff = std::max(r.max_abs_diff, std::isnan(d) ? INFINITY : d);
    sum += d;
  }
  if (!a.data.empty()) r.mean_abs_diff = sum / static_cast<double>(a.data.size());
  const int64_t rows = a.shape.size() == 4 ? a.shape[0] : 1;
  const int64_t width = rows > 0 ? a.size() / rows : 0;
  for (int64_t row = 0; row < rows && width > 0; ++row) {
    const auto ab = a.data.begin() + row * width, bb = b.data.begin() + row * width;
    const auto ia = std::max_element(ab, ab + width) - ab;
    const auto ib = std::max_element(bb, bb + width) - bb;
    r.argmax_agree += ia == ib ? 1 : 0;
    ++r.argmax_total;
  }
  r.within_tolerance = r.max_abs_diff <= tolerance;
  return r;
}

void locate_divergence(ComparisonReport& report, const Graph& graph, const ActivationDump& a, const ActivationDump& b) {
  report.first_divergence.reset();
  report.first_divergence_name.clear();
  for (int id : topological_order(graph)) {
    auto ia = a.find(id), ib = b.find(id);
    if (ia == a.end() || ib == b.end() || ia->second.shape != ib->second.shape) continue;
    if (compare(ia->second, ib->second, report.tolerance).within_tolerance) continue;
    report.first_divergence = id;
    report.first_divergence_name = graph.node(id).name;
    return;
  }
}

}  // namespace blend
