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
#include "blendnet/tensor.hpp"

#include <cmath>

namespace blend {

const char* to_string(DType dtype) {
  switch (dtype) {
    case DType::Float32: return "float32";
    case DType::Fixed16: return "int16";
    case DType::PackedBits: return "packed-u64";
    case DType::UInt8: return "uint8";
    case DType::Float64: return "float64";
  }
  return "unknown";
}

size_t element_bytes(DType dtype) {
  switch (dtype) {
    case DType::Float32: return 4;
    case DType::Fixed16: return 2;
    case DType::PackedBits: return 8;
    case DType::UInt8: return 1;
    case DType::Float64: return 8;
  }
  return 0;
}

int64_t numel(const Shape& shape) {
  int64_t n = 1;
  for (auto d : shape) {
    if (d < 0) throw Error("negative dimension in shape " + to_string(shape));
    n *= d;
  }
  return n;
}

std::string to_string(const Shape& shape) {
  std::string s = "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

RealTensor::RealTensor(Shape s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {
  if (static_cast<int64_t>(data.size()) != numel(shape))
    throw Error("RealTensor: " + std::to_string(data.size()) + " values for shape " + to_string(shape));
}

namespace {

void check_count(const Shape& shape, size_t n) {
  if (static_cast<int64_t>(n) != numel(shape))
    throw Error("tensor: " + std::to_string(n) + " values for shape " + to_string(shape));
}

}  // namespace

Tensor Tensor::float32(Shape shape, std::vector<double> values) {
  check_count(shape, values.size());
  Tensor t;
  t.dtype = DType::Float32;
  t.shape = std::move(shape);
  // Keep float32 tensors exactly representable so save/load is bit-exact.
  for (auto& v : values) v = static_cast<double>(static_cast<float>(v));
  t.real = std::move(values);
  return t;
}

Tensor Tensor::float64(Shape shape, std::vector<double> values) {
  check_count(shape, values.size());
  Tensor t;
  t.dtype = DType::Float64;
  t.shape = std::move(shape);
  t.real = std::move(values);
  return t;
}

Tensor Tensor::fixed16(Shape shape, std::vector<int16_t> values, int frac_bits) {
  check_count(shape, values.size());
  Tensor t;
  t.dtype = DType::Fixed16;
  t.shape = std::move(shape);
  t.fixed = std::move(values);
  t.frac_bits = frac_bits;
  return t;
}

Tensor Tensor::uint8(Shape shape, std::vector<uint8_t> values) {
  check_count(shape, values.size());
  Tensor t;
  t.dtype = DType::UInt8;
  t.shape = std::move(shape);
  t.bytes = std::move(values);
  return t;
}

size_t Tensor::stored_elements() const {
  switch (dtype) {
    case DType::Float32:
    case DType::Float64: return real.size();
    case DType::Fixed16: return fixed.size();
    case DType::PackedBits: return words.size();
    case DType::UInt8: return bytes.size();
  }
  return 0;
}

}  // namespace blend
