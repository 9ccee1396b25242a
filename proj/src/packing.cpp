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
#include "blendnet/packing.hpp"

#include <string>

namespace blend {

namespace {

void check_word_size(int w) {
  if (w < 1 || w > 64) throw Error("word size " + std::to_string(w) + " outside [1,64]");
}

uint64_t low_bits(int64_t n) { return n >= 64 ? ~uint64_t{0} : ((uint64_t{1} << n) - 1); }

template <typename T>
PackedBitTensor pack_impl(std::span<const T> values, const Shape& shape, int word_size) {
  PackedBitTensor p = make_packed(shape, word_size);
  if (static_cast<int64_t>(values.size()) != numel(shape))
    throw Error("pack_bits: value count does not match shape " + to_string(shape));
  const int64_t C = p.channels(), P = p.pixels(), wpp = p.words_per_pixel();
  for (int64_t a = 0; a < p.outer(); ++a)
    for (int64_t c = 0; c < C; ++c)
      for (int64_t px = 0; px < P; ++px) {
        const T v = values[static_cast<size_t>((a * C + c) * P + px)];
        if (v == T(1)) {
          p.words[static_cast<size_t>((a * P + px) * wpp + c / word_size)] |= uint64_t{1} << (c % word_size);
        } else if (v != T(-1)) {
          throw Error("pack_bits: non-binary value " + std::to_string(static_cast<double>(v)) + " at channel " +
                      std::to_string(c));
        }
      }
  return p;
}

}  // namespace

int64_t PackedBitTensor::pixels() const {
  int64_t p = 1;
  for (size_t i = 2; i < shape.size(); ++i) p *= shape[i];
  return p;
}

uint64_t PackedBitTensor::full_mask() const { return low_bits(word_size); }

uint64_t PackedBitTensor::last_word_mask() const {
  const int64_t rem = channels() % word_size;
  return rem == 0 ? full_mask() : low_bits(rem);
}

std::vector<uint64_t> PackedBitTensor::masks() const {
  std::vector<uint64_t> m(static_cast<size_t>(words_per_pixel()), full_mask());
  if (!m.empty()) m.back() = last_word_mask();
  return m;
}

PackedBitTensor make_packed(Shape shape, int word_size) {
  check_word_size(word_size);
  if (shape.size() < 2) throw Error("packed tensors need rank >= 2, got " + to_string(shape));
  PackedBitTensor p;
  p.shape = std::move(shape);
  p.word_size = word_size;
  p.words.assign(static_cast<size_t>(p.outer() * p.pixels() * p.words_per_pixel()), 0);
  return p;
}

PackedBitTensor pack_bits(std::span<const double> values, const Shape& shape, int word_size) {
  return pack_impl(values, shape, word_size);
}

PackedBitTensor pack_bits(std::span<const int8_t> values, const Shape& shape, int word_size) {
  return pack_impl(values, shape, word_size);
}

std::vector<int8_t> unpack_bits(const PackedBitTensor& p) {
  const int64_t C = p.channels(), P = p.pixels(), wpp = p.words_per_pixel();
  std::vector<int8_t> out(static_cast<size_t>(p.outer() * C * P));
  for (int64_t a = 0; a < p.outer(); ++a)
    for (int64_t c = 0; c < C; ++c)
      for (int64_t px = 0; px < P; ++px) {
        const uint64_t w = p.words[static_cast<size_t>((a * P + px) * wpp + c / p.word_size)];
        out[static_cast<size_t>((a * C + c) * P + px)] = ((w >> (c % p.word_size)) & 1) ? 1 : -1;
      }
  return out;
}

Tensor to_tensor(const PackedBitTensor& p) {
  Tensor t;
  t.dtype = DType::PackedBits;
  t.shape = p.shape;
  t.word_size = p.word_size;
  t.words = p.words;
  return t;
}

PackedBitTensor from_tensor(const Tensor& t) {
  if (t.dtype != DType::PackedBits) throw Error("from_tensor: tensor is not packed");
  PackedBitTensor p = make_packed(t.shape, t.word_size);
  if (t.words.size() != p.words.size())
    throw Error("from_tensor: " + std::to_string(t.words.size()) + " words, expected " +
                std::to_string(p.words.size()));
  p.words = t.words;
  return p;
}

}  // namespace blend
