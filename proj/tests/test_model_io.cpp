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
#include <doctest.h>

#include <cstring>
#include <filesystem>

#include "blendnet/builders.hpp"
#include "blendnet/model_io.hpp"
#include "blendnet/runtime.hpp"

using namespace blend;

namespace {

IoErrc error_code(const std::vector<uint8_t>& bytes) {
  try {
    deserialize_model(bytes);
  } catch (const ModelIoError& e) {
    return e.code();
  }
  return IoErrc{};
}

}  // namespace

TEST_CASE("model round trip keeps every field") {
  Graph g = build_neuroblend20(10);
  random_init(g, 7);
  const auto bytes = serialize_model(g);
  CHECK(deserialize_model(bytes) == g);
  CHECK(serialize_model(g) == bytes);

  const Graph compiled = compile(g).graph;
  CHECK(deserialize_model(serialize_model(compiled)) == compiled);

  Graph mixer = build_arch("blendmixer-s4:FPB/BB", 10);
  random_init(mixer, 1);
  CHECK(deserialize_model(serialize_model(mixer)) == mixer);
}

TEST_CASE("model files on disk") {
  Graph g = build_neuroblend20(10);
  random_init(g, 2);
  const auto dir = std::filesystem::temp_directory_path();
  const auto path = dir / "blendnet_io_test.nblm";
  save_model(g, path);
  CHECK(load_model(path) == g);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_model(dir / "blendnet_missing.nblm"), ModelIoError);
}

TEST_CASE("corrupt model files are rejected with a code") {
  Graph g = build_neuroblend20(10);
  random_init(g, 3);
  const auto good = serialize_model(g);

  auto bad_magic = good;
  bad_magic[0] = 'X';
  CHECK(error_code(bad_magic) == IoErrc::BadMagic);

  auto bad_version = good;
  bad_version[4] = 99;
  CHECK(error_code(bad_version) == IoErrc::UnsupportedVersion);

  auto truncated = good;
  truncated.resize(good.size() - 10);
  CHECK(error_code(truncated) == IoErrc::Truncated);
  CHECK(error_code(std::vector<uint8_t>(good.begin(), good.begin() + 6)) == IoErrc::Truncated);

  auto manifest = good;
  manifest[16] = '[';
  CHECK(error_code(manifest) == IoErrc::Malformed);
}

TEST_CASE("tensor files") {
  const Tensor f = Tensor::float32({2, 3}, {1, 2, 3, 4, 5, 6.5});
  CHECK(deserialize_tensor(serialize_tensor(f)) == f);
  const Tensor q = Tensor::fixed16({4}, {1, -2, 300, -32768}, 8);
  const Tensor q2 = deserialize_tensor(serialize_tensor(q));
  CHECK(q2.fixed == q.fixed);
  const Tensor d = Tensor::float64({1}, {0.1});
  CHECK(deserialize_tensor(serialize_tensor(d)) == d);

  auto extra = serialize_tensor(f);
  extra.push_back(0);
  try {
    deserialize_tensor(extra);
    FAIL("trailing bytes accepted");
  } catch (const ModelIoError& e) {
    CHECK(e.code() == IoErrc::ShapeMismatch);
  }
  Tensor packed;
  packed.dtype = DType::PackedBits;
  packed.shape = {1, 2};
  packed.word_size = 48;
  packed.words = {1};
  CHECK_THROWS_AS(serialize_tensor(packed), Error);
}
