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
#include <filesystem>
#include <span>
#include <vector>

#include "blendnet/graph.hpp"
#include "blendnet/tensor.hpp"

namespace blend {

// .nblm container:
//   "NBLM" | u32 version | u64 manifest length | JSON manifest | tensor blobs
// All integers and payloads little-endian. The manifest lists nodes, attrs and
// tensor descriptors (name, dtype tag, shape, offset, byte count).
inline constexpr uint32_t kModelVersion = 1;

enum class IoErrc {
  BadMagic = 1,
  UnsupportedVersion,
  Truncated,
  ShapeMismatch,
  Malformed,
  FileError,
};

const char* to_string(IoErrc code);

class ModelIoError : public Error {
 public:
  ModelIoError(IoErrc code, const std::string& what) : Error(std::string(to_string(code)) + ": " + what), code_(code) {}
  IoErrc code() const { return code_; }

 private:
  IoErrc code_;
};

std::vector<uint8_t> serialize_model(const Graph& graph);
Graph deserialize_model(std::span<const uint8_t> bytes);

void save_model(const Graph& graph, const std::filesystem::path& path);
Graph load_model(const std::filesystem::path& path);

// .nbt tensor file: "NBT1" | u32 dtype | u32 rank | u64 dims[rank] | payload.
// Supports float32, int16, uint8 and float64 payloads.
std::vector<uint8_t> serialize_tensor(const Tensor& tensor);
Tensor deserialize_tensor(std::span<const uint8_t> bytes);
void save_tensor(const Tensor& tensor, const std::filesystem::path& path);
Tensor load_tensor(const std::filesystem::path& path);

std::vector<uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const uint8_t> bytes);

}  // namespace blend
