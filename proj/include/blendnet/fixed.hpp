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

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "blendnet/tensor.hpp"

namespace blend {

// Signed 16-bit fixed-point format. Q8.8 (frac_bits = 8) is the default for
// activations; parameter tensors pick their own frac_bits to fit their range.
struct QFormat {
  int total_bits = 16;
  int frac_bits = 8;
  bool is_signed = true;

  int32_t raw_min() const { return -(1 << (total_bits - 1)); }
  int32_t raw_max() const { return (1 << (total_bits - 1)) - 1; }
  double lsb() const { return std::ldexp(1.0, -frac_bits); }
  double min_value() const { return raw_min() * lsb(); }
  double max_value() const { return raw_max() * lsb(); }

  // Throws unless this is a signed 16-bit format with 0 <= frac_bits <= 15.
  void validate() const;

  bool operator==(const QFormat&) const = default;
};

// Side channel for saturation events. Saturation is defined behaviour, never
// an error.
struct QuantStats {
  int64_t saturated = 0;
  int64_t accumulator_overflows = 0;

  QuantStats& operator+=(const QuantStats& o) {
    saturated += o.saturated;
    accumulator_overflows += o.accumulator_overflows;
    return *this;
  }
};

struct FixedTensor {
  QFormat q;
  Shape shape;
  std::vector<int16_t> data;

  int64_t size() const { return static_cast<int64_t>(data.size()); }
  bool operator==(const FixedTensor&) const = default;
};

// Round-to-nearest-even, saturating.
int16_t quantize_value(double value, int frac_bits, QuantStats* stats = nullptr);
inline double dequantize_value(int32_t raw, int frac_bits) { return std::ldexp(static_cast<double>(raw), -frac_bits); }

FixedTensor quantize_fixed(std::span<const double> values, Shape shape, QFormat q, QuantStats* stats = nullptr);
FixedTensor quantize_fixed(const RealTensor& x, QFormat q, QuantStats* stats = nullptr);
RealTensor dequantize_fixed(const FixedTensor& x);

// Arithmetic right shift with round-half-to-even; negative shift multiplies.
int64_t shift_round_even(int64_t value, int shift);

inline int16_t saturate16(int64_t v, QuantStats* stats = nullptr) {
  if (v > INT16_MAX) {
    if (stats) ++stats->saturated;
    return INT16_MAX;
  }
  if (v < INT16_MIN) {
    if (stats) ++stats->saturated;
    return INT16_MIN;
  }
  return static_cast<int16_t>(v);
}

// Largest frac_bits in [0, 15] whose Q range holds every value without
// saturation (0 if none does).
int fit_frac_bits(std::span<const double> values);

}  // namespace blend
