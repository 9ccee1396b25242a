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

#include "blendnet/packing.hpp"
#include "support/oracles.hpp"

using namespace blend;

TEST_CASE("lane layout: channel j*W+i lives in bit i of word j") {
  std::vector<double> v(100, -1.0);
  v[0] = v[47] = v[48] = v[99] = 1.0;
  const PackedBitTensor p = pack_bits(v, {1, 100}, 48);
  REQUIRE(p.words.size() == 3);
  CHECK(p.words[0] == ((uint64_t{1} << 0) | (uint64_t{1} << 47)));
  CHECK(p.words[1] == 1);
  CHECK(p.words[2] == (uint64_t{1} << 3));
  CHECK(p.last_word_mask() == 0xF);
  CHECK(p.full_mask() == (uint64_t{1} << 48) - 1);
}

TEST_CASE("pack/unpack round trip over word sizes and shapes") {
  SplitMix64 rng(3);
  for (int W : {1, 7, 48, 63, 64})
    for (int64_t C : {1, 3, 47, 48, 49, 64, 65, 130}) {
      const Shape shape{2, C, 3, 2};
      const auto v = oracle::random_pm1(static_cast<size_t>(numel(shape)), rng);
      const PackedBitTensor p = pack_bits(std::span<const int8_t>(v), shape, W);
      CHECK(unpack_bits(p) == v);
      const auto masks = p.masks();
      for (size_t i = 0; i < p.words.size(); ++i)
        CHECK((p.words[i] & ~masks[i % masks.size()]) == 0);
      CHECK(from_tensor(to_tensor(p)) == p);
    }
}

TEST_CASE("pack rejects non-binary values and bad word sizes") {
  const std::vector<double> bad{1.0, 0.5};
  CHECK_THROWS_AS(pack_bits(bad, {1, 2}, 48), Error);
  const std::vector<double> ok{1.0, -1.0};
  CHECK_THROWS_AS(pack_bits(ok, {1, 2}, 0), Error);
  CHECK_THROWS_AS(pack_bits(ok, {1, 2}, 65), Error);
  CHECK_THROWS_AS(pack_bits(ok, {2}, 48), Error);
}
