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
// nbc: build, compile, run, verify, count and bench blendnet models.
//
// Exit codes: 0 success, 1 usage, 2 I/O, 3 verification failure.

#include <chrono>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "blendnet/builders.hpp"
#include "blendnet/costmodel.hpp"
#include "blendnet/model_io.hpp"
#include "blendnet/runtime.hpp"
#include "blendnet/verify.hpp"

namespace {

using namespace blend;

constexpr int kExitUsage = 1;
constexpr int kExitIo = 2;
constexpr int kExitVerify = 3;

struct Options {
  std::string arch = "neuroblend20";
  uint64_t seed = 0;
  int classes = 10;
  std::string model;
  std::string input;
  std::string out;
  std::string report;
  std::vector<std::string> passes = default_pass_list();
  int word_size = kDefaultWordSize;
  int frac_bits = 8;
  int seeds = 100;
  double tol = 1e-5;
  std::string mode = "fusion";
  int iters = 100;
  int warmup = 5;
  int threads = 0;
  bool plain = false;
  bool latency = false;
  bool json = false;
};

RealTensor as_real(const Tensor& t) {
  switch (t.dtype) {
    case DType::Float32:
    case DType::Float64: return RealTensor(t.shape, t.real);
    case DType::Fixed16: {
      RealTensor r(t.shape);
      for (size_t i = 0; i < t.fixed.size(); ++i) r.data[i] = dequantize_value(t.fixed[i], t.frac_bits);
      return r;
    }
    default: throw Error(std::string("input tensor dtype ") + to_string(t.dtype) + " is not numeric");
  }
}

Graph load_compiled(const std::string& path) {
  Graph g = load_model(path);
  if (!g.compiled) throw Error("'" + path + "' is not compiled; run 'nbc compile' first");
  return g;
}

int cmd_build(const Options& o) {
  Graph g = build_arch(o.arch, o.classes);
  random_init(g, o.seed);
  save_model(g, o.out);
  std::printf("built %s (seed %llu, %zu nodes) -> %s\n", g.arch.c_str(), static_cast<unsigned long long>(o.seed),
              g.nodes.size(), o.out.c_str());
  return 0;
}

int cmd_compile(const Options& o) {
  const Graph g = load_model(o.model);
  CompileOptions opts{o.passes, o.word_size, o.frac_bits};
  CompileResult r = compile(g, opts);
  save_model(r.graph, o.out);
  nlohmann::json rep = r.report.to_json();
  rep["word_size"] = o.word_size;
  rep["frac_bits"] = o.frac_bits;
  rep["lowering_saturated"] = r.lowering.saturated;
  if (!o.report.empty()) {
    const std::string text = rep.dump(2) + "\n";
    write_file(o.report, std::span<const uint8_t>(reinterpret_cast<const uint8_t*>(text.data()), text.size()));
  }
  std::printf("compiled %s: %d rewrites, %zu -> %zu nodes -> %s\n", g.arch.c_str(), r.report.total_rewrites(),
              g.nodes.size(), r.graph.nodes.size(), o.out.c_str());
  return 0;
}

int cmd_run(const Options& o) {
  const ExecutionPlan plan = topo_schedule(load_compiled(o.model));
  const RealTensor x = as_real(load_tensor(o.input));
  QuantStats stats;
  const RealTensor y = execute(plan, x, {o.threads, &stats, nullptr});
  save_tensor(Tensor::float32(y.shape, y.data), o.out);
  std::printf("output %s -> %s (saturated %lld, accumulator overflows %lld)\n", to_string(y.shape).c_str(),
              o.out.c_str(), static_cast<long long>(stats.saturated),
              static_cast<long long>(stats.accumulator_overflows));
  return 0;
}

int cmd_verify(const Options& o) {
  const Graph g = load_model(o.model);
  CompileOptions opts{o.passes, o.word_size, o.frac_bits};
  const VerifySummary s = verify_model(g, o.mode, o.seeds, o.tol, opts);
  if (o.plain) {
    std::printf("mode %s, %zu seeds, tol %g: max|diff| %.6g, argmax %d/%zu, plane mismatches %lld, failures %d\n",
                s.mode.c_str(), s.samples.size(), s.tolerance, s.max_abs_diff(), s.argmax_agree(), s.samples.size(),
                static_cast<long long>(s.plane_mismatches()), s.failures());
    for (const auto& c : s.samples)
      if (!c.passed())
        std::printf("  seed %llu: max|diff| %.6g, first divergence %s\n", static_cast<unsigned long long>(c.seed),
                    c.report.max_abs_diff, c.report.first_divergence_name.c_str());
  } else {
    std::cout << s.to_json().dump(2) << "\n";
  }
  return s.passed() ? 0 : kExitVerify;
}

int cmd_count(const Options& o) {
  const Graph g = load_model(o.model);
  const CostReport c = count_ops(g);
  if (o.plain) {
    std::cout << c.to_table();
    if (o.latency) {
      const LatencyReport l = estimate_latency(g);
      std::printf("latency (first-order): pipeline %lld cycles, sequential %lld cycles\n",
                  static_cast<long long>(l.pipeline_cycles), static_cast<long long>(l.sequential_cycles));
    }
    return 0;
  }
  nlohmann::json j = c.to_json();
  j["arch"] = g.arch;
  if (o.latency) j["latency"] = estimate_latency(g).to_json(HardwareProfile{});
  std::cout << j.dump(2) << "\n";
  return 0;
}

int cmd_bench(const Options& o) {
  const Graph g = load_compiled(o.model);
  const ExecutionPlan plan = topo_schedule(g);
  const CostReport cost = count_ops(g);
  const RealTensor x = random_input(plan.values.at(g.input_ids().at(0)).shape(), o.seed, plan.q.frac_bits);
  const int workers = o.threads > 0 ? o.threads : default_workers();
  for (int i = 0; i < o.warmup; ++i) execute(plan, x, {workers});
  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < o.iters; ++i) execute(plan, x, {workers});
  const double ns = std::chrono::duration<double, std::nano>(std::chrono::steady_clock::now() - t0).count();
  const double ns_per = ns / o.iters;
  const double macs = static_cast<double>(cost.bmac + cost.fpmac);
  if (o.json) {
    std::cout << nlohmann::json{{"arch", g.arch},         {"iters", o.iters},         {"warmup", o.warmup},
                                {"workers", workers},      {"ns_per_op", ns_per},      {"ops_per_s", 1e9 / ns_per},
                                {"macs_per_op", macs},     {"macs_per_s", macs * 1e9 / ns_per}}
                     .dump(2)
              << "\n";
  } else {
    std::printf("%s: %d iters (%d warmup), %d workers\n", g.arch.c_str(), o.iters, o.warmup, workers);
    std::printf("  %.0f ns/op, %.2f ops/s, %.3g MAC/s\n", ns_per, 1e9 / ns_per, macs * 1e9 / ns_per);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"blendnet model compiler and runtime"};
  app.require_subcommand(1);
  Options o;

  auto word_size = [&](CLI::App* c) {
    c->add_option("--word-size", o.word_size, "binary lanes per packed word")->check(CLI::Range(1, 64));
    c->add_option("--frac-bits", o.frac_bits, "activation fractional bits")->check(CLI::Range(0, 15));
    c->add_option("--pass-list", o.passes, "comma-separated passes")->delimiter(',');
  };

  auto* build = app.add_subcommand("build", "build a seeded model");
  build->add_option("--arch", o.arch, "architecture")->required();
  build->add_option("--seed", o.seed, "parameter seed");
  build->add_option("--classes", o.classes, "number of classes")->check(CLI::PositiveNumber);
  build->add_option("-o,--out", o.out, "output .nblm")->required();

  auto* comp = app.add_subcommand("compile", "run the pass pipeline and lower to runtime form");
  comp->add_option("model", o.model, "input .nblm")->required();
  word_size(comp);
  comp->add_option("-o,--out", o.out, "output .nblm")->required();
  comp->add_option("--report", o.report, "write the pass report as JSON");

  auto* run = app.add_subcommand("run", "execute a compiled model on one .nbt input");
  run->add_option("model", o.model, "compiled .nblm")->required();
  run->add_option("input", o.input, "input .nbt")->required();
  run->add_option("-o,--out", o.out, "output .nbt")->required();
  run->add_option("--threads", o.threads, "worker count")->check(CLI::NonNegativeNumber);

  auto* ver = app.add_subcommand("verify", "compare against the float oracle");
  ver->add_option("model", o.model, "uncompiled .nblm")->required();
  ver->add_option("--seeds", o.seeds, "number of random inputs")->check(CLI::PositiveNumber);
  ver->add_option("--tol", o.tol, "max abs tolerance")->check(CLI::PositiveNumber);
  ver->add_option("--mode", o.mode, "fusion or runtime")->check(CLI::IsMember({"fusion", "runtime"}));
  ver->add_flag("--plain", o.plain, "human-readable output");
  word_size(ver);

  auto* count = app.add_subcommand("count", "operation and size accounting");
  count->add_option("model", o.model, ".nblm")->required();
  count->add_flag("--plain", o.plain, "human-readable table");
  count->add_flag("--latency", o.latency, "include the first-order latency estimate");

  auto* bench = app.add_subcommand("bench", "time compiled execution");
  bench->add_option("model", o.model, "compiled .nblm")->required();
  bench->add_option("--iters", o.iters, "timed iterations")->check(CLI::PositiveNumber);
  bench->add_option("--warmup", o.warmup, "untimed iterations")->check(CLI::NonNegativeNumber);
  bench->add_option("--threads", o.threads, "worker count")->check(CLI::NonNegativeNumber);
  bench->add_option("--seed", o.seed, "input seed");
  bench->add_flag("--json", o.json, "JSON output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*build) return cmd_build(o);
    if (*comp) return cmd_compile(o);
    if (*run) return cmd_run(o);
    if (*ver) return cmd_verify(o);
    if (*count) return cmd_count(o);
    if (*bench) return cmd_bench(o);
  } catch (const ModelIoError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitIo;
  } catch (const std::filesystem::filesystem_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitIo;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  }
  return kExitUsage;
}
