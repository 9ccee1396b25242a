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
#include "blendnet/verify.hpp"

#include <algorithm>

#include "blendnet/builders.hpp"

namespace blend {

SampleCheck check_fusion(const Graph& unfused, const Graph& fused, const RealTensor& input, double tolerance) {
  SampleCheck s;
  ActivationDump du, df;
  const RealTensor yu = reference_forward(unfused, input, &du);
  const RealTensor yf = reference_forward(fused, input, &df);
  s.report = compare(yu, yf, tolerance);
  for (const auto& n : fused.nodes) {
    if (n.kind != OpKind::Threshold) continue;
    const Node* orig = unfused.find(n.id);
    if (!orig || orig->kind != OpKind::SignFn) continue;
    const auto& a = du.at(n.id).data;
    const auto& b = df.at(n.id).data;
    ++s.planes_checked;
    if (a.size() != b.size()) {
      s.plane_mismatches += static_cast<int64_t>(std::max(a.size(), b.size()));
      continue;
    }
    for (size_t i = 0; i < a.size(); ++i) s.plane_mismatches += a[i] != b[i] ? 1 : 0;
  }
  if (!s.passed()) locate_divergence(s.report, fused, du, df);
  return s;
}

SampleCheck check_runtime(const Graph& reference, const ExecutionPlan& plan, const RealTensor& input,
                          double tolerance, int workers) {
  SampleCheck s;
  ActivationDump dr, de;
  const RealTensor yr = reference_forward(reference, input, &dr);
  const RealTensor ye = execute(plan, input, {workers, nullptr, &de});
  s.report = compare(yr, ye, tolerance);
  if (!s.passed()) locate_divergence(s.report, reference, dr, de);
  return s;
}

int VerifySummary::failures() const {
  return static_cast<int>(std::count_if(samples.begin(), samples.end(), [](const SampleCheck& s) { return !s.passed(); }));
}

double VerifySummary::max_abs_diff() const {
  double m = 0.0;
  for (const auto& s : samples) m = std::max(m, s.report.max_abs_diff);
  return m;
}

int VerifySummary::argmax_agree() const {
  int n = 0;
  for (const auto& s : samples) n += s.report.argmax_agree;
  return n;
}

int64_t VerifySummary::plane_mismatches() const {
  int64_t n = 0;
  for (const auto& s : samples) n += s.plane_mismatches;
  return n;
}

nlohmann::json VerifySummary::to_json() const {
  nlohmann::json per = nlohmann::json::array();
  for (const auto& s : samples) {
    auto j = s.report.to_json();
    j["seed"] = s.seed;
    j["plane_mismatches"] = s.plane_mismatches;
    j["planes_checked"] = s.planes_checked;
    j["passed"] = s.passed();
    per.push_back(std::move(j));
  }
  return {{"mode", mode},
          {"tolerance", tolerance},
          {"seeds", samples.size()},
          {"failures", failures()},
          {"max_abs_diff", max_abs_diff()},
          {"argmax_agree", argmax_agree()},
          {"plane_mismatches", plane_mismatches()},
          {"passed", passed()},
          {"samples", per}};
}

VerifySummary verify_model(const Graph& graph, const std::string& mode, int seeds, double tolerance,
                           const CompileOptions& options, uint64_t first_seed) {
  if (graph.compiled) throw Error("verify: model is compiled; verification needs the float model");
  if (seeds < 1) throw Error("verify: seed count must be positive");
  if (!(tolerance > 0)) throw Error("verify: tolerance must be positive");
  if (mode != "fusion" && mode != "runtime") throw Error("verify: unknown mode '" + mode + "'");
  const auto inputs = graph.input_ids();
  if (inputs.size() != 1) throw Error("verify: expected exactly one graph input");
  const Shape shape = graph.node(inputs[0]).attrs.shape;

  Graph fused = graph;
  run_pipeline(fused, options.passes);
  VerifySummary summary{mode, tolerance, {}};
  if (mode == "fusion") {
    for (int i = 0; i < seeds; ++i) {
      const uint64_t seed = first_seed + static_cast<uint64_t>(i);
      summary.samples.push_back(check_fusion(graph, fused, random_input(shape, seed, options.frac_bits), tolerance));
      summary.samples.back().seed = seed;
    }
  } else {
    const ExecutionPlan plan = topo_schedule(lower(fused, options.word_size, options.frac_bits));
    for (int i = 0; i < seeds; ++i) {
      const uint64_t seed = first_seed + static_cast<uint64_t>(i);
      summary.samples.push_back(check_runtime(fused, plan, random_input(shape, seed, options.frac_bits), tolerance));
      summary.samples.back().seed = seed;
    }
  }
  return summary;
}

}  // namespace blend
