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

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "blendnet/fixed.hpp"
#include "blendnet/packing.hpp"

namespace blend {

// Worker count from the NB_THREADS environment variable when set to a
// positive integer, otherwise std::thread::hardware_concurrency().
int default_workers();

// Splits [0, n) into contiguous chunks, one per worker, and joins. fn(begin,
// end, worker) must only write data owned by its range.
void parallel_for(int64_t n, int workers, const std::function<void(int64_t, int64_t, int)>& fn);

// Sum of lane-wise +-1 products over the lanes selected by `masks`:
// 2 * popcount(XNOR(a, b) & mask) - n_valid. Bits outside the masks are ignored.
int32_t bmac_dot(std::span<const uint64_t> a, std::span<const uint64_t> b, std::span<const uint64_t> masks);

struct ConvGeometry {
  int64_t in_channels = 0, in_height = 0, in_width = 0;
  int64_t out_channels = 0;
  int kernel = 1, stride = 1, padding = 0;

  int64_t out_height() const { return (in_height + 2 * padding - kernel) / stride + 1; }
  int64_t out_width() const { return (in_width + 2 * padding - kernel) / stride + 1; }
};

// x: packed activations [H][W][wpp]; w: packed weights [C_out][k][k][wpp];
// out: [C_out][H_out][W_out]. Border pixels hold pad_bit on every valid lane
// (0 encodes -1). Results lie in [-n, n], n = C_in * k * k.
void binary_conv2d(const uint64_t* x, const uint64_t* w, int word_size, const ConvGeometry& g, int pad_bit,
                   int32_t* out, int workers = 1);

// Convenience form on PackedBitTensor: x is [1, C, H, W], w is [C_out, C, k, k].
std::vector<int32_t> binary_conv2d(const PackedBitTensor& x, const PackedBitTensor& w, int stride, int padding,
                                   int pad_bit = 0, int workers = 1);

// Per-pixel binary FC: x [H][W][wpp] with C_in channels, w [C_out][wpp].
void binary_linear(const uint64_t* x, const uint64_t* w, int word_size, int64_t in_channels, int64_t out_channels,
                   int64_t pixels, int32_t* out, int workers = 1);

struct FixedConvParams {
  const int16_t* weights = nullptr;  // [C_out][C_in][k][k]
  int weight_frac = 0;
  const int16_t* bias = nullptr;     // [C_out], may be null
  int bias_frac = 0;
  const int16_t* padding_value = nullptr;  // [C_in] at the input format, null means 0
};

// Integer MACs into a 32-bit accumulator (overflow saturates and is counted),
// then one round-half-even shift to out_frac with saturation.
void fixed_conv2d(const int16_t* x, int in_frac, const ConvGeometry& g, const FixedConvParams& p, int out_frac,
                  int16_t* out, QuantStats* stats = nullptr, int workers = 1);

// Per-channel binary decision written as packed bits, output [H][W][wpp].
// mode: 0 GE (x >= t), 1 LE (x <= t), 2 always +1, 3 always -1.
template <typename T>
void threshold_apply(const T* x, int64_t channels, int64_t pixels, const int32_t* thresholds, const uint8_t* modes,
                     int word_size, uint64_t* out);
// Sign with sign(0) = +1, output packed.
template <typename T>
void sign_apply(const T* x, int64_t channels, int64_t pixels, int word_size, uint64_t* out);

void maxpool_or(const uint64_t* x, int64_t channels, int64_t height, int64_t width, int word_size, int window,
                int stride, uint64_t* out);

// Window sum followed by a single round-half-even division.
void avgpool_fixed(const int16_t* x, int64_t channels, int64_t height, int64_t width, int window, int stride,
                   int16_t* out);
void global_avgpool_fixed(const int16_t* x, int64_t channels, int64_t pixels, int16_t* out);

void prelu_fixed(const int16_t* x, int64_t channels, int64_t pixels, const int16_t* alpha, int alpha_frac,
                 int16_t* out, QuantStats* stats = nullptr);
void add_fixed(const int16_t* a, const int16_t* b, int64_t n, int16_t* out, QuantStats* stats = nullptr);

// y * scale + shift per channel; scale[c] carries scale_frac[c] fractional
// bits, shift and the output use out_frac.
template <typename T>
void batchnorm_fixed(const T* x, int in_frac, int64_t channels, int64_t pixels, const int16_t* scale,
                     const uint8_t* scale_frac, const int16_t* shift, int out_frac, int16_t* out,
                     QuantStats* stats = nullptr);

// Swaps the channel and height axes of a [C][H][W] value.
template <typename T>
void transpose_ch(const T* x, int64_t channels, int64_t height, int64_t width, T* out);
void transpose_ch_bits(const uint64_t* x, int64_t channels, int64_t height, int64_t width, int word_size,
                       uint64_t* out);

// Round-half-even integer division by a positive divisor.
int64_t div_round_even(int64_t num, int64_t den);

}  // namespace blend
