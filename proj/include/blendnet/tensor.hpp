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
#include <stdexcept>
#include <string>
#include <vector>

namespace blend {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// On-disk dtype tags. Float64 holds fused parameters produced by the pass
// pipeline so that thresholds and folded weights survive a save/load intact.
enum class DType : uint32_t {
  Float32 = 0,
  Fixed16 = 1,
  PackedBits = 2,
  UInt8 = 3,
  Float64 = 4,
};

const char* to_string(DType dtype);
size_t element_bytes(DType dtype);

using Shape = std::vector<int64_t>;

int64_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

// Dense float64 tensor used by the reference interpreter and as the exchange
// type at API boundaries. Layout is row-major, activations are NCHW.
struct RealTensor {
  Shape shape;
  std::vector<double> data;

  RealTensor() = default;
  explicit RealTensor(Shape s) : shape(std::move(s)), data(static_cast<size_t>(numel(shape)), 0.0) {}
  RealTensor(Shape s, std::vector<double> d);

  int64_t size() const { return static_cast<int64_t>(data.size()); }
  bool operator==(const RealTensor&) const = default;
};

// Named parameter payload stored on graph nodes. Exactly one storage vector is
// populated, selected by dtype.
struct Tensor {
  DType dtype = DType::Float32;
  Shape shape;
  std::vector<double> real;     // Float32, Float64
  std::vector<int16_t> fixed;   // Fixed16
  std::vector<uint64_t> words;  // PackedBits, channels (axis 1) packed
  std::vector<uint8_t> bytes;   // UInt8
  int frac_bits = 0;            // Fixed16 only
  int word_size = 0;            // PackedBits only: valid lanes per word

  static Tensor float32(Shape shape, std::vector<double> values);
  static Tensor float64(Shape shape, std::vector<double> values);
  static Tensor fixed16(Shape shape, std::vector<int16_t> values, int frac_bits);
  static Tensor uint8(Shape shape, std::vector<uint8_t> values);

  int64_t size() const { return numel(shape); }
  bool is_real() const { return dtype == DType::Float32 || dtype == DType::Float64; }

  // Number of stored elements of the active storage vector.
  size_t stored_elements() const;
  size_t payload_bytes() const { return stored_elements() * element_bytes(dtype); }

  bool operator==(const Tensor&) const = default;
};

}  // namespace blend
