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
#include "blendnet/builders.hpp"

#include <cmath>

#include "blendnet/rng.hpp"

namespace blend {

void BlockConfig::validate() const {
  if (in_channels < 1 || out_channels < 1 || stride < 1) throw Error("block config: channels and stride must be >= 1");
  const bool needs_projection = stride > 1 || in_channels != out_channels;
  if (needs_projection && kind == BlockKind::Normal)
    throw Error("block config: channel mismatch between paths (" + std::to_string(in_channels) + " -> " +
                std::to_string(out_channels) + ", stride " + std::to_string(stride) +
                ") needs a downsample block");
  if (!needs_projection && kind == BlockKind::Downsample)
    throw Error("block config: downsample block requires stride > 1 or a channel change");
  if (!prelu_slopes.empty() && static_cast<int>(prelu_slopes.size()) != out_channels)
    throw Error("block config: prelu_slopes must have one entry per output channel");
}

int GraphBuilder::push(OpKind kind, const std::string& name, std::vector<int> inputs, NodeAttrs attrs) {
  Node n;
  n.kind = kind;
  n.name = name;
  n.inputs = std::move(inputs);
  n.attrs = std::move(attrs);
  return graph_.add(std::move(n));
}

int GraphBuilder::input(const std::string& name, Shape chw) {
  NodeAttrs a;
  a.shape = std::move(chw);
  return push(OpKind::Input, name, {}, a);
}

int GraphBuilder::sign(int x, const std::string& name) { return push(OpKind::SignFn, name, {x}, {}); }

int GraphBuilder::binary_conv(int x, const std::string& name, int in, int out, int kernel, int stride, int padding) {
  NodeAttrs a;
  a.in_channels = in;
  a.out_channels = out;
  a.kernel = kernel;
  a.stride = stride;
  a.padding = padding;
  const int id = push(OpKind::BinaryConv2D, name, {x}, a);
  const Shape ws{out, in, kernel, kernel};
  graph_.node(id).params["w"] = Tensor::float32(ws, std::vector<double>(static_cast<size_t>(numel(ws)), 1.0));
  return id;
}

int GraphBuilder::fixed_conv(int x, const std::string& name, int in, int out, int kernel, int stride, int padding) {
  NodeAttrs a;
  a.in_channels = in;
  a.out_channels = out;
  a.kernel = kernel;
  a.stride = stride;
  a.padding = padding;
  const int id = push(OpKind::FixedConv2D, name, {x}, a);
  const Shape ws{out, in, kernel, kernel};
  auto& p = graph_.node(id).params;
  p["w"] = Tensor::float32(ws, std::vector<double>(static_cast<size_t>(numel(ws)), 0.0));
  p["b"] = Tensor::float32({out}, std::vector<double>(static_cast<size_t>(out), 0.0));
  p["pad"] = Tensor::float32({in}, std::vector<double>(static_cast<size_t>(in), 0.0));
  return id;
}

int GraphBuilder::patch_embed(int x, const std::string& name, int in, int out, int patch) {
  NodeAttrs a;
  a.in_channels = in;
  a.out_channels = out;
  a.kernel = patch;
  a.stride = patch;
  const int id = push(OpKind::PatchEmbed, name, {x}, a);
  const Shape ws{out, in, patch, patch};
  auto& p = graph_.node(id).params;
  p["w"] = Tensor::float32(ws, std::vector<double>(static_cast<size_t>(numel(ws)), 0.0));
  p["b"] = Tensor::float32({out}, std::vector<double>(static_cast<size_t>(out), 0.0));
  return id;
}

int GraphBuilder::batch_norm(int x, const std::string& name, int channels, bool affine_free) {
  const int id = push(OpKind::BatchNorm, name, {x}, {});
  BNParams bn = BNParams::identity(static_cast<size_t>(channels), kBnEps);
  bn.affine_free = affine_free;
  bn.store(graph_.node(id));
  return id;
}

int GraphBuilder::prelu(int x, const std::string& name, std::vector<double> slopes) {
  const int id = push(OpKind::PReLU, name, {x}, {});
  const auto c = static_cast<int64_t>(slopes.size());
  graph_.node(id).params["alpha"] = Tensor::float32({c}, std::move(slopes));
  return id;
}

int GraphBuilder::add(int a, int b, const std::string& name) { return push(OpKind::Add, name, {a, b}, {}); }

int GraphBuilder::avg_pool(int x, const std::string& name, int window) {
  NodeAttrs a;
  a.kernel = window;
  a.stride = window;
  return push(OpKind::AvgPool, name, {x}, a);
}

int GraphBuilder::max_pool_or(int x, const std::string& name, int window) {
  NodeAttrs a;
  a.kernel = window;
  a.stride = window;
  return push(OpKind::MaxPoolOr, name, {x}, a);
}

int GraphBuilder::global_avg_pool(int x, const std::string& name) { return push(OpKind::GlobalAvgPool, name, {x}, {}); }

int GraphBuilder::linear(int x, const std::string& name, int in, int out, Precision precision) {
  NodeAttrs a;
  a.in_channels = in;
  a.out_channels = out;
  a.precision = precision;
  const int id = push(OpKind::Linear, name, {x}, a);
  const Shape ws{out, in};
  auto& p = graph_.node(id).params;
  const double fill = precision == Precision::Binary ? 1.0 : 0.0;
  p["w"] = Tensor::float32(ws, std::vector<double>(static_cast<size_t>(numel(ws)), fill));
  if (precision == Precision::Fixed) p["b"] = Tensor::float32({out}, std::vector<double>(static_cast<size_t>(out), 0.0));
  return id;
}

int GraphBuilder::transpose(int x, const std::string& name) { return push(OpKind::Transpose, name, {x}, {}); }

int GraphBuilder::blend_block(int x, const BlockConfig& cfg, const std::string& prefix) {
  cfg.validate();
  std::vector<double> slopes = cfg.prelu_slopes;
  if (slopes.empty()) slopes.assign(static_cast<size_t>(cfg.out_channels), kDefaultPReluSlope);

  int main = sign(x, prefix + ".sign");
  main = binary_conv(main, prefix + ".conv", cfg.in_channels, cfg.out_channels, 3, cfg.stride, 1);
  main = batch_norm(main, prefix + ".bn", cfg.out_channels);
  main = prelu(main, prefix + ".prelu", std::move(slopes));

  int skip = x;
  if (cfg.kind == BlockKind::Downsample) {
    if (cfg.stride > 1) skip = avg_pool(skip, prefix + ".skip_pool", cfg.stride);
    skip = fixed_conv(skip, prefix + ".skip_conv", cfg.in_channels, cfg.out_channels, 1, 1, 0);
    skip = batch_norm(skip, prefix + ".skip_bn", cfg.out_channels);
  }
  const int sum = add(main, skip, prefix + ".add");
  return batch_norm(sum, prefix + ".out_bn", cfg.out_channels, /*affine_free=*/true);
}

Graph GraphBuilder::finish() {
  sort_nodes(graph_);
  return std::move(graph_);
}

Graph build_block(const BlockConfig& cfg, int height, int width) {
  GraphBuilder b("block");
  const int x = b.input("input", {cfg.in_channels, height, width});
  b.set_outputs({b.blend_block(x, cfg, "block1")});
  return b.finish();
}

namespace {

Graph build_resnet_like(const std::string& arch, int num_classes, int stem_channels, const std::vector<int>& widths,
                        int blocks_per_stage) {
  if (num_classes < 2) throw Error("num_classes must be >= 2");
  GraphBuilder b(arch);
  int x = b.input("input", {3, 32, 32});
  x = b.fixed_conv(x, "stem.conv", 3, stem_channels, 3, 1, 1);
  x = b.batch_norm(x, "stem.bn", stem_channels);
  int channels = stem_channels;
  int index = 1;
  for (size_t s = 0; s < widths.size(); ++s) {
    for (int j = 0; j < blocks_per_stage; ++j) {
      BlockConfig cfg;
      cfg.in_channels = channels;
      cfg.out_channels = widths[s];
      cfg.stride = (j == 0 && s > 0) ? 2 : 1;
      cfg.kind = (cfg.stride > 1 || cfg.in_channels != cfg.out_channels) ? BlockKind::Downsample : BlockKind::Normal;
      x = b.blend_block(x, cfg, "block" + std::to_string(index++));
      channels = widths[s];
    }
  }
  x = b.global_avg_pool(x, "head.pool");
  x = b.linear(x, "head.fc", channels, num_classes, Precision::Fixed);
  b.set_outputs({x});
  return b.finish();
}

}  // namespace

Graph build_neuroblend20(int num_classes) { return build_resnet_like("neuroblend20", num_classes, 16, {16, 32, 64}, 3); }

Graph build_neuroblend18(int num_classes) {
  return build_resnet_like("neuroblend18", num_classes, 64, {64, 128, 256, 512}, 2);
}

MixerSpec MixerSpec::s4() { return {}; }

MixerSpec MixerSpec::b4() {
  MixerSpec s;
  s.hidden = 192;
  s.token_mlp = 96;
  s.channel_mlp = 768;
  s.layers = 12;
  return s;
}

MixerSpec MixerSpec::s2_4() {
  MixerSpec s;
  s.hidden = 256;
  s.token_mlp = 128;
  s.channel_mlp = 1024;
  s.layers = 8;
  return s;
}

void MixerSpec::validate() const {
  for (int v : {sequence_length, hidden, token_mlp, channel_mlp, patch, layers, image_side, in_channels})
    if (v < 1) throw Error("mixer spec: all sizes must be positive");
  if (num_classes < 2) throw Error("mixer spec: num_classes must be >= 2");
  if (image_side % patch != 0) throw Error("mixer spec: image side not divisible by patch");
  const int side = image_side / patch;
  if (sequence_length != side * side)
    throw Error("mixer spec: sequence length " + std::to_string(sequence_length) + " != (image_side/patch)^2 = " +
                std::to_string(side * side));
}

MixingPrecision MixingPrecision::parse(std::string_view text) {
  auto parse_block = [&](std::string_view s) {
    std::array<Precision, 2> out{};
    size_t i = 0;
    for (auto& p : out) {
      if (s.substr(i, 2) == "FP") {
        p = Precision::Fixed;
        i += 2;
      } else if (s.substr(i, 1) == "B") {
        p = Precision::Binary;
        i += 1;
      } else {
        throw Error("invalid precision flags '" + std::string(text) + "'");
      }
    }
    if (i != s.size()) throw Error("invalid precision flags '" + std::string(text) + "'");
    return out;
  };
  const auto slash = text.find('/');
  if (slash == std::string_view::npos) throw Error("invalid precision flags '" + std::string(text) + "': expected TOKEN/CHANNEL");
  MixingPrecision m;
  m.token = parse_block(text.substr(0, slash));
  m.channel = parse_block(text.substr(slash + 1));
  return m;
}

std::string MixingPrecision::to_string() const {
  auto f = [](Precision p) { return p == Precision::Binary ? "B" : "FP"; };
  return std::string(f(token[0])) + f(token[1]) + "/" + f(channel[0]) + f(channel[1]);
}

namespace {

// SignFn (binary FCs only), Linear, BN, PReLU.
int mixer_fc(GraphBuilder& b, int x, const std::string& prefix, int in, int out, Precision p, bool transpose_first) {
  if (p == Precision::Binary) x = b.sign(x, prefix + ".sign");
  if (transpose_first) x = b.transpose(x, prefix + ".transpose");
  x = b.linear(x, prefix + ".fc", in, out, p);
  x = b.batch_norm(x, prefix + ".bn", out);
  return b.prelu(x, prefix + ".prelu", std::vector<double>(static_cast<size_t>(out), kDefaultPReluSlope));
}

}  // namespace

Graph build_blendmixer(const MixerSpec& spec, const std::vector<MixingPrecision>& precision) {
  spec.validate();
  if (precision.size() != 1 && precision.size() != static_cast<size_t>(spec.layers))
    throw Error("mixer: precision flags must be given once or once per layer (" + std::to_string(spec.layers) + ")");
  GraphBuilder b("blendmixer");
  int x = b.input("input", {spec.in_channels, spec.image_side, spec.image_side});
  x = b.patch_embed(x, "embed", spec.in_channels, spec.hidden, spec.patch);
  x = b.batch_norm(x, "embed.bn", spec.hidden);
  const int S = spec.sequence_length, C = spec.hidden;
  for (int l = 0; l < spec.layers; ++l) {
    const MixingPrecision& p = precision.size() == 1 ? precision[0] : precision[static_cast<size_t>(l)];
    const std::string layer = "layer" + std::to_string(l + 1);

    // Token mixing runs on the transposed [S, C] view.
    const std::string tok = layer + ".token";
    int t = mixer_fc(b, x, tok + "1", S, spec.token_mlp, p.token[0], /*transpose_first=*/true);
    t = mixer_fc(b, t, tok + "2", spec.token_mlp, S, p.token[1], false);
    t = b.transpose(t, tok + ".untranspose");
    t = b.add(t, x, tok + ".add");
    x = b.batch_norm(t, tok + ".out_bn", C, /*affine_free=*/true);

    const std::string ch = layer + ".channel";
    int c = mixer_fc(b, x, ch + "1", C, spec.channel_mlp, p.channel[0], false);
    c = mixer_fc(b, c, ch + "2", spec.channel_mlp, C, p.channel[1], false);
    c = b.add(c, x, ch + ".add");
    x = b.batch_norm(c, ch + ".out_bn", C, /*affine_free=*/true);
  }
  x = b.global_avg_pool(x, "head.pool");
  x = b.linear(x, "head.fc", C, spec.num_classes, Precision::Fixed);
  b.set_outputs({x});
  return b.finish();
}

namespace {

void fill_uniform(Tensor& t, SplitMix64 rng, double lo, double hi) {
  for (auto& v : t.real) v = static_cast<double>(static_cast<float>(rng.uniform(lo, hi)));
}

void fill_sign(Tensor& t, SplitMix64 rng) {
  for (auto& v : t.real) v = rng.sign();
}

bool binary_producer(const Node& n) {
  return n.kind == OpKind::BinaryConv2D || (n.kind == OpKind::Linear && n.attrs.precision == Precision::Binary);
}

int64_t fan_in(const Node& n) {
  const auto& a = n.attrs;
  return n.kind == OpKind::Linear ? a.in_channels : static_cast<int64_t>(a.in_channels) * a.kernel * a.kernel;
}

}  // namespace

void random_init(Graph& graph, uint64_t seed) {
  graph.seed = seed;
  for (auto& n : graph.nodes) {
    auto stream = [&](const std::string& key) { return substream(seed, n.name + "." + key); };
    switch (n.kind) {
      case OpKind::BinaryConv2D:
        fill_sign(n.params.at("w"), stream("w"));
        break;
      case OpKind::Linear:
        if (n.attrs.precision == Precision::Binary) {
          fill_sign(n.params.at("w"), stream("w"));
          break;
        }
        [[fallthrough]];
      case OpKind::FixedConv2D:
      case OpKind::PatchEmbed: {
        const double a = std::sqrt(3.0 / static_cast<double>(fan_in(n)));
        fill_uniform(n.params.at("w"), stream("w"), -a, a);
        fill_uniform(n.params.at("b"), stream("b"), -0.1, 0.1);
        break;
      }
      case OpKind::BatchNorm: {
        BNParams bn = BNParams::from_node(n);
        double mean_scale = 1.0, var_scale = 1.0;
        if (n.inputs.size() == 1) {
          const Node* producer = graph.find(n.inputs[0]);
          if (producer && binary_producer(*producer)) {
            var_scale = static_cast<double>(fan_in(*producer));
            mean_scale = std::sqrt(var_scale);
          }
        }
        auto g = stream("gamma"), be = stream("beta"), m = stream("mu"), s = stream("sigma2");
        for (size_t c = 0; c < bn.channels(); ++c) {
          const double magnitude = g.uniform(0.5, 2.0);
          const bool negative = g.coin(0.25);
          if (!bn.affine_free) {
            bn.gamma[c] = negative ? -magnitude : magnitude;
            bn.beta[c] = be.uniform(-1.0, 1.0);
          }
          bn.mu[c] = m.uniform(-1.0, 1.0) * mean_scale;
          bn.sigma2[c] = s.uniform(0.25, 4.0) * var_scale;
        }
        bn.store(n);
        break;
      }
      default:
        break;
    }
  }
}

Graph build_arch(std::string_view arch, int num_classes) {
  std::string name(arch);
  std::string flags;
  if (auto colon = name.find(':'); colon != std::string::npos) {
    flags = name.substr(colon + 1);
    name = name.substr(0, colon);
  }
  if (name == "neuroblend20" || name == "neuroblend18") {
    if (!flags.empty()) throw Error("architecture " + name + " takes no precision flags");
    return name == "neuroblend20" ? build_neuroblend20(num_classes) : build_neuroblend18(num_classes);
  }
  MixerSpec spec;
  std::string family;
  if (name.rfind("blendmixer-", 0) == 0) {
    family = "blendmixer";
  } else if (name.rfind("mlpmixer-", 0) == 0) {
    family = "mlpmixer";
  } else {
    throw Error("unknown architecture '" + std::string(arch) + "'");
  }
  const std::string size = name.substr(family.size() + 1);
  if (size == "s4") {
    spec = MixerSpec::s4();
  } else if (size == "b4") {
    spec = MixerSpec::b4();
  } else if (size == "2s4") {
    spec = MixerSpec::s2_4();
  } else {
    throw Error("unknown mixer size '" + size + "'");
  }
  spec.num_classes = num_classes;
  MixingPrecision p = family == "mlpmixer" ? MixingPrecision::all(Precision::Fixed) : MixingPrecision::all(Precision::Binary);
  if (!flags.empty()) p = MixingPrecision::parse(flags);
  Graph g = build_blendmixer(spec, {p});
  g.arch = std::string(arch);
  return g;
}

std::vector<std::string> known_archs() {
  return {"neuroblend20", "neuroblend18", "blendmixer-s4", "blendmixer-b4", "blendmixer-2s4",
          "mlpmixer-s4",  "mlpmixer-b4",  "mlpmixer-2s4"};
}

RealTensor random_input(const Shape& shape, uint64_t seed, int grid_frac) {
  RealTensor x(shape);
  auto rng = substream(seed, "input");
  for (auto& v : x.data) v = std::ldexp(std::nearbyint(std::ldexp(rng.uniform(-1.0, 1.0), grid_frac)), -grid_frac);
  return x;
}

}  // namespace blend
