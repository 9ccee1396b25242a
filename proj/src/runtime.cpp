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
#include "blendnet/runtime.hpp"

#include <algorithm>
#include <cmath>

namespace blend {

namespace {

Tensor quantize_param(const Shape& shape, std::span<const double> values, int frac, QuantStats* stats) {
  std::vector<int16_t> q(values.size());
  for (size_t i = 0; i < values.size(); ++i) q[i] = quantize_value(values[i], frac, stats);
  return Tensor::fixed16(shape, std::move(q), frac);
}

Tensor quantize_fit(const Tensor& t, QuantStats* stats) {
  return quantize_param(t.shape, t.real, fit_frac_bits(t.real), stats);
}

// Integer threshold on the input grid; folds out-of-range values into a
// constant decision.
void lower_threshold(Node& n, int in_frac) {
  const ThresholdParams t = ThresholdParams::from_node(n);
  std::vector<int16_t> q(t.channels(), 0);
  std::vector<uint8_t> dir(t.channels());
  for (size_t c = 0; c < t.channels(); ++c) {
    Direction d = t.direction[c];
    const double scaled = std::ldexp(t.tau[c], in_frac);
    if (d == Direction::GE) {
      const double v = std::ceil(scaled);
      if (v <= INT16_MIN) d = Direction::ConstPos;
      else if (v > INT16_MAX) d = Direction::ConstNeg;
      else q[c] = static_cast<int16_t>(v);
    } else if (d == Direction::LE) {
      const double v = std::floor(scaled);
      if (v >= INT16_MAX) d = Direction::ConstPos;
      else if (v < INT16_MIN) d = Direction::ConstNeg;
      else q[c] = static_cast<int16_t>(v);
    }
    dir[c] = static_cast<uint8_t>(d);
  }
  const Shape s{static_cast<int64_t>(t.channels())};
  n.params.clear();
  n.params["tau"] = Tensor::fixed16(s, std::move(q), in_frac);
  n.params["direction"] = Tensor::uint8(s, std::move(dir));
}

void lower_bn(Node& n, int out_frac, QuantStats* stats) {
  const BNParams bn = BNParams::from_node(n);
  const size_t C = bn.channels();
  std::vector<int16_t> scale(C), shift(C);
  std::vector<uint8_t> scale_frac(C);
  for (size_t c = 0; c < C; ++c) {
    const double s = bn.stddev(c);
    const double a = bn.gamma[c] / s;
    const double b = bn.beta[c] - bn.gamma[c] * bn.mu[c] / s;
    const int f = fit_frac_bits(std::span<const double>(&a, 1));
    scale_frac[c] = static_cast<uint8_t>(f);
    scale[c] = quantize_value(a, f, stats);
    shift[c] = quantize_value(b, out_frac, stats);
  }
  const Shape s{static_cast<int64_t>(C)};
  n.params.clear();
  n.params["scale"] = Tensor::fixed16(s, std::move(scale), 0);
  n.params["scale_frac"] = Tensor::uint8(s, std::move(scale_frac));
  n.params["shift"] = Tensor::fixed16(s, std::move(shift), out_frac);
}

}  // namespace

Graph lower(const Graph& src, int word_size, int frac_bits, QuantStats* stats) {
  if (src.compiled) throw Error("lower: graph is already compiled");
  if (word_size < 1 || word_size > 64) throw Error("lower: word size " + std::to_string(word_size) + " outside [1,64]");
  QFormat{16, frac_bits, true}.validate();
  const auto values = infer_values(src);
  Graph g = src;
  g.word_size = word_size;
  g.frac_bits = frac_bits;

  // Largest |value| an Integer edge can carry.
  std::map<int, int64_t> bound;
  for (int id : topological_order(g)) {
    Node& n = g.node(id);
    const ValueKind in_kind = n.inputs.empty() ? ValueKind::Real : values.at(n.inputs[0]).kind;
    const int in_frac = in_kind == ValueKind::Real ? frac_bits : 0;
    const auto& a = n.attrs;
    switch (n.kind) {
      case OpKind::BinaryConv2D:
      case OpKind::Linear: {
        const Tensor& w = n.param("w");
        if (n.kind == OpKind::BinaryConv2D || a.precision == Precision::Binary) {
          bound[id] = int64_t{a.in_channels} * a.kernel * a.kernel;
          if (n.kind == OpKind::Linear) bound[id] = a.in_channels;
          n.params["w"] = to_tensor(pack_bits(w.real, w.shape, word_size));
        } else {
          const Tensor b = n.param("b");
          n.params["w"] = quantize_fit(w, stats);
          n.params["b"] = quantize_fit(b, stats);
        }
        break;
      }
      case OpKind::FixedConv2D:
      case OpKind::PatchEmbed: {
        const ConvParams p = ConvParams::from_node(n);
        n.params.clear();
        n.params["w"] = quantize_fit(p.weights, stats);
        const Shape bs{static_cast<int64_t>(p.bias.size())};
        n.params["b"] = quantize_param(bs, p.bias, fit_frac_bits(p.bias), stats);
        const Shape ps{static_cast<int64_t>(p.padding_value.size())};
        n.params["pad"] = quantize_param(ps, p.padding_value, frac_bits, stats);
        break;
      }
      case OpKind::BatchNorm: lower_bn(n, frac_bits, stats); break;
      case OpKind::PReLU: n.params["alpha"] = quantize_fit(n.param("alpha"), stats); break;
      case OpKind::Threshold:
        if (in_kind == ValueKind::Integer && bound.at(n.inputs[0]) > INT16_MAX)
          throw Error("lower: integer range of '" + n.name + "' input exceeds 16-bit thresholds");
        lower_threshold(n, in_frac);
        break;
      case OpKind::Transpose:
        if (in_kind == ValueKind::Integer) bound[id] = bound.at(n.inputs[0]);
        break;
      default: break;
    }
  }
  g.compiled = true;
  const auto violations = validate(g);
  if (!violations.empty()) throw Error("lower: produced invalid graph: " + violations.front().to_string());
  return g;
}

CompileResult compile(const Graph& graph, const CompileOptions& options) {
  CompileResult r;
  Graph fused = graph;
  r.report = run_pipeline(fused, options.passes);
  r.graph = lower(fused, options.word_size, options.frac_bits, &r.lowering);
  return r;
}

namespace {

struct Buffers {
  std::vector<std::vector<int16_t>> real;
  std::vector<std::vector<int32_t>> integer;
  std::vector<std::vector<uint64_t>> bits;

  explicit Buffers(const ExecutionPlan& plan) {
    const size_t n = plan.buffers.size();
    real.resize(n);
    integer.resize(n);
    bits.resize(n);
    for (size_t i = 0; i < n; ++i) {
      const auto& slot = plan.buffers[i];
      const auto size = static_cast<size_t>(slot.elements);
      switch (slot.kind) {
        case ValueKind::Real: real[i].assign(size, 0); break;
        case ValueKind::Integer: integer[i].assign(size, 0); break;
        case ValueKind::Binary: bits[i].assign(size, 0); break;
      }
    }
  }
};

RealTensor read_value(const Buffers& buf, int slot, const ValueInfo& info, int frac_bits, int word_size) {
  RealTensor out(info.shape());
  const auto s = static_cast<size_t>(slot);
  const int64_t n = info.size();
  switch (info.kind) {
    case ValueKind::Real:
      for (int64_t i = 0; i < n; ++i) out.data[static_cast<size_t>(i)] = dequantize_value(buf.real[s][static_cast<size_t>(i)], frac_bits);
      break;
    case ValueKind::Integer:
      for (int64_t i = 0; i < n; ++i) out.data[static_cast<size_t>(i)] = buf.integer[s][static_cast<size_t>(i)];
      break;
    case ValueKind::Binary: {
      const int64_t P = info.height * info.width, wpp = (info.channels + word_size - 1) / word_size;
      for (int64_t c = 0; c < info.channels; ++c)
        for (int64_t p = 0; p < P; ++p) {
          const uint64_t w = buf.bits[s][static_cast<size_t>(p * wpp + c / word_size)];
          out.data[static_cast<size_t>(c * P + p)] = ((w >> (c % word_size)) & 1) ? 1.0 : -1.0;
        }
      break;
    }
  }
  return out;
}

ConvGeometry geometry(const Node& n, const ValueInfo& in) {
  const auto& a = n.attrs;
  return {in.channels, in.height, in.width, a.out_channels, a.kernel, a.stride, a.padding};
}

void run_step(const ExecutionPlan& plan, const PlanStep& step, Buffers& buf, const RealTensor* sample, int workers,
              QuantStats& stats) {
  const Graph& g = *plan.graph;
  const Node& n = g.node(step.node);
  const ValueInfo& out = plan.values.at(n.id);
  const int W = plan.word_size, F = plan.q.frac_bits;
  const auto o = static_cast<size_t>(step.output);
  const auto i0 = step.inputs.empty() ? size_t{0} : static_cast<size_t>(step.inputs[0]);
  const ValueInfo* in = n.inputs.empty() ? nullptr : &plan.values.at(n.inputs[0]);
  const int64_t P = in ? in->height * in->width : 0;

  switch (n.kind) {
    case OpKind::Input:
      for (size_t i = 0; i < sample->data.size(); ++i) buf.real[o][i] = quantize_value(sample->data[i], F, &stats);
      break;
    case OpKind::SignFn:
      if (in->kind == ValueKind::Real) sign_apply(buf.real[i0].data(), in->channels, P, W, buf.bits[o].data());
      else sign_apply(buf.integer[i0].data(), in->channels, P, W, buf.bits[o].data());
      break;
    case OpKind::Threshold: {
      const Tensor& tau = n.param("tau");
      const std::vector<int32_t> t(tau.fixed.begin(), tau.fixed.end());
      const uint8_t* modes = n.param("direction").bytes.data();
      if (in->kind == ValueKind::Real) threshold_apply(buf.real[i0].data(), in->channels, P, t.data(), modes, W, buf.bits[o].data());
      else threshold_apply(buf.integer[i0].data(), in->channels, P, t.data(), modes, W, buf.bits[o].data());
      break;
    }
    case OpKind::BinaryConv2D:
      binary_conv2d(buf.bits[i0].data(), n.param("w").words.data(), W, geometry(n, *in), n.attrs.pad_bit,
                    buf.integer[o].data(), workers);
      break;
    case OpKind::FixedConv2D:
    case OpKind::PatchEmbed: {
      const Tensor& w = n.param("w");
      const Tensor& b = n.param("b");
      FixedConvParams p{w.fixed.data(), w.frac_bits, b.fixed.data(), b.frac_bits,
                        n.has_param("pad") ? n.param("pad").fixed.data() : nullptr};
      fixed_conv2d(buf.real[i0].data(), F, geometry(n, *in), p, F, buf.real[o].data(), &stats, workers);
      break;
    }
    case OpKind::Linear:
      if (n.attrs.precision == Precision::Binary) {
        binary_linear(buf.bits[i0].data(), n.param("w").words.data(), W, in->channels, n.attrs.out_channels, P,
                      buf.integer[o].data(), workers);
      } else {
        const Tensor& w = n.param("w");
        const Tensor& b = n.param("b");
        FixedConvParams p{w.fixed.data(), w.frac_bits, b.fixed.data(), b.frac_bits, nullptr};
        fixed_conv2d(buf.real[i0].data(), F, geometry(n, *in), p, F, buf.real[o].data(), &stats, workers);
      }
      break;
    case OpKind::BatchNorm: {
      const int16_t* scale = n.param("scale").fixed.data();
      const uint8_t* sf = n.param("scale_frac").bytes.data();
      const int16_t* shift = n.param("shift").fixed.data();
      if (in->kind == ValueKind::Real)
        batchnorm_fixed(buf.real[i0].data(), F, in->channels, P, scale, sf, shift, F, buf.real[o].data(), &stats);
      else
        batchnorm_fixed(buf.integer[i0].data(), 0, in->channels, P, scale, sf, shift, F, buf.real[o].data(), &stats);
      break;
    }
    case OpKind::PReLU: {
      const Tensor& alpha = n.param("alpha");
      prelu_fixed(buf.real[i0].data(), in->channels, P, alpha.fixed.data(), alpha.frac_bits, buf.real[o].data(), &stats);
      break;
    }
    case OpKind::AvgPool:
      avgpool_fixed(buf.real[i0].data(), in->channels, in->height, in->width, n.attrs.kernel, n.attrs.stride,
                    buf.real[o].data());
      break;
    case OpKind::MaxPoolOr:
      maxpool_or(buf.bits[i0].data(), in->channels, in->height, in->width, W, n.attrs.kernel, n.attrs.stride,
                 buf.bits[o].data());
      break;
    case OpKind::Add:
      add_fixed(buf.real[i0].data(), buf.real[static_cast<size_t>(step.inputs[1])].data(), out.size(),
                buf.real[o].data(), &stats);
      break;
    case OpKind::GlobalAvgPool:
      global_avgpool_fixed(buf.real[i0].data(), in->channels, P, buf.real[o].data());
      break;
    case OpKind::Transpose:
      switch (in->kind) {
        case ValueKind::Real: transpose_ch(buf.real[i0].data(), in->channels, in->height, in->width, buf.real[o].data()); break;
        case ValueKind::Integer:
          transpose_ch(buf.integer[i0].data(), in->channels, in->height, in->width, buf.integer[o].data());
          break;
        case ValueKind::Binary:
          transpose_ch_bits(buf.bits[i0].data(), in->channels, in->height, in->width, W, buf.bits[o].data());
          break;
      }
      break;
  }
}

}  // namespace

RealTensor execute(const ExecutionPlan& plan, const RealTensor& input, const ExecOptions& options) {
  if (!plan.graph) throw Error("execute: empty plan");
  const Graph& g = *plan.graph;
  if (!g.compiled) throw Error("execute: plan was built from an uncompiled graph");
  const auto inputs = g.input_ids();
  if (inputs.size() != 1) throw Error("execute: expected exactly one graph input");
  const Shape sample_shape = plan.values.at(inputs[0]).shape();
  const bool batched = input.shape.size() == 4;
  Shape got = input.shape;
  if (batched) got.erase(got.begin());
  if (got != sample_shape)
    throw Error("execute: input shape " + to_string(input.shape) + " does not match " + to_string(sample_shape));
  if (input.data.size() != static_cast<size_t>(numel(input.shape))) throw Error("execute: input payload size mismatch");

  const int workers = options.workers > 0 ? options.workers : default_workers();
  const int64_t N = batched ? input.shape[0] : 1;
  const int out_id = g.outputs.at(0);
  const ValueInfo& out_info = plan.values.at(out_id);
  Shape out_shape = out_info.shape();
  if (batched) out_shape.insert(out_shape.begin(), N);
  RealTensor result(out_shape);

  QuantStats stats;
  Buffers buf(plan);
  const int64_t sample_size = numel(sample_shape);
  for (int64_t s = 0; s < N; ++s) {
    RealTensor sample(sample_shape, std::vector<double>(input.data.begin() + s * sample_size,
                                                         input.data.begin() + (s + 1) * sample_size));
    for (const auto& step : plan.steps) {
      run_step(plan, step, buf, &sample, workers, stats);
      if (options.dump && s == 0)
        (*options.dump)[step.node] = read_value(buf, step.output, plan.values.at(step.node), plan.q.frac_bits, plan.word_size);
    }
    const RealTensor y = read_value(buf, plan.buffer_of.at(out_id), out_info, plan.q.frac_bits, plan.word_size);
    std::copy(y.data.begin(), y.data.end(), result.data.begin() + s * out_info.size());
  }
  if (options.stats) *options.stats += stats;
  return result;
}

}  // namespace blend
