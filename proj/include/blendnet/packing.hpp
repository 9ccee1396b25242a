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
#include <span>
#include <vector>

#include "blendnet/tensor.hpp"

namespace blend {

inline constexpr int kDefaultWordSize = 48;

// Binary tensor packed along axis 1 (channels). Lane i of word j holds channel
// j * word_size + i, lane 0 in bit 0. A set bit encodes +1, a clear bit -1.
// Lanes past the channel count are always zero.
//
// For a logical shape [A, C, P...] the words are laid out [A][P...][ceil(C/W)],
// so every pixel owns a contiguous run of words.
struct PackedBitTensor {
  Shape shape;
  int word_size = kDefaultWordSize;
  std::vector<uint64_t> words;

  int64_t channels() const { return shape.at(1); }
  int64_t outer() const { return shape.at(0); }
  int64_t pixels() const;  // product of dims after axis 1
  int64_t words_per_pixel() const { return (channels() + word_size - 1) / word_size; }

  uint64_t full_mask() const;
  uint64_t last_word_mask() const;
  uint64_t word_mask(int64_t j) const { return j + 1 == words_per_pixel() ? last_word_mask() : full_mask(); }
  // Per-word valid-lane masks for one pixel.
  std::vector<uint64_t> masks() const;

  bool operator==(const PackedBitTensor&) const = default;
};

PackedBitTensor make_packed(Shape shape, int word_size);

// Throws blend::Error on values other than -1/+1 or word sizes outside [1,64].
PackedBitTensor pack_bits(std::span<const double> values, const Shape& shape, int word_size = kDefaultWordSize);
PackedBitTensor pack_bits(std::span<const int8_t> values, const Shape& shape, int word_size = kDefaultWordSize);
std::vector<int8_t> unpack_bits(const PackedBitTensor& packed);

Tensor to_tensor(const PackedBitTensor& packed);
PackedBitTensor from_tensor(const Tensor& t);

}  // namespace blend
