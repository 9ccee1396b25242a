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
#include "blendnet/fixed.hpp"

#include <algorithm>
#include <string>

namespace blend {

void QFormat::validate() const {
  if (total_bits != 16 || !is_signed)
    throw Error("QFormat: only signed 16-bit formats are supported");
  if (frac_bits < 0 || frac_bits > 15)
    throw Error("QFormat: frac_bits " + std::to_string(frac_bits) + " outside [0,15]");
}

int16_t quantize_value(double value, int frac_bits, QuantStats* stats) {
  if (std::isnan(value)) {
    if (stats) ++stats->saturated;
    return 0;
  }
  // Scaling by a power of two is exact, so nearbyint sees the true value and
  // rounds ties to even under the default rounding mode.
  const double scaled = std::nearbyint(std::ldexp(value, frac_bits));
  if (scaled > INT16_MAX) {
    if (stats) ++stats->saturated;
    return INT16_MAX;
  }
  if (scaled < INT16_MIN) {
    if (stats) ++stats->saturated;
    return INT16_MIN;
  }
  return static_cast<int16_t>(scaled);
}

FixedTensor quantize_fixed(std::span<const double> values, Shape shape, QFormat q, QuantStats* stats) {
  q.validate();
  if (static_cast<int64_t>(values.size()) != numel(shape))
    throw Error("quantize_fixed: value count does not match shape " + to_string(shape));
  FixedTensor out{q, std::move(shape), {}};
  out.data.resize(values.size());
  for (size_t i = 0; i < values.size(); ++i) out.data[i] = quantize_value(values[i], q.frac_bits, stats);
  return out;
}

FixedTensor quantize_fixed(const RealTensor& x, QFormat q, QuantStats* stats) {
  return quantize_fixed(x.data, x.shape, q, stats);
}

RealTensor dequantize_fixed(const FixedTensor& x) {
  RealTensor out(x.shape);
  for (size_t i = 0; i < x.data.size(); ++i) out.data[i] = dequantize_value(x.data[i], x.q.frac_bits);
  return out;
}

int64_t shift_round_even(int64_t value, int shift) {
  if (shift <= 0) return value * (int64_t{1} << -shift);
  const int64_t floor_q = value >> shift;
  const int64_t rem = value - (floor_q << shift);
  const int64_t half = int64_t{1} << (shift - 1);
  if (rem > half || (rem == half && (floor_q & 1))) return floor_q + 1;
  return floor_q;
}

int fit_frac_bits(std::span<const double> values) {
  double max_abs = 0.0;
  for (double v : values) max_abs = std::max(max_abs, std::fabs(v));
  for (int f = 15; f > 0; --f) {
    const double scaled = std::nearbyint(std::ldexp(max_abs, f));
    if (scaled <= INT16_MAX) return f;
  }
  return 0;
}

}  // namespace blend
