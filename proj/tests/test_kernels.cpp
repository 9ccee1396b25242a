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

#include <atomic>
#include <vector>

#include "blendnet/kernels.hpp"
#include "blendnet/rng.hpp"
#include "support/oracles.hpp"

using namespace blend;

namespace {

std::vector<int8_t> unpack_plane(const std::vector<uint64_t>& words, int64_t channels, int64_t pixels, int ws) {
  const int64_t wpp = (channels + ws - 1) / ws;
  std::vector<int8_t> out(static_cast<size_t>(channels * pixels));
  for (int64_t c = 0; c < channels; ++c)
    for (int64_t p = 0; p < pixels; ++p)
      out[static_cast<size_t>(c * pixels + p)] = ((words[static_cast<size_t>(p * wpp + c / ws)] >> (c % ws)) & 1) ? 1 : -1;
  return out;
}

}  // namespace

TEST_CASE("parallel_for covers each index once") {
  for (int workers : {1, 2, 3, 8, 17}) {
    for (int64_t n : {0, 1, 5, 100}) {
      std::vector<std::atomic<int>> hits(static_cast<size_t>(n));
      parallel_for(n, workers, [&](int64_t b, int64_t e, int w) {
        CHECK(w >= 0);
        CHECK(w < std::max(1, workers));
        for (int64_t i = b; i < e; ++i) ++hits[static_cast<size_t>(i)];
      });
      for (auto& h : hits) CHECK(h.load() == 1);
    }
  }
}

TEST_CASE("bmac dot") {
  const std::vector<uint64_t> ones{(uint64_t{1} << 48) - 1}, zeros{0}, mask{(uint64_t{1} << 48) - 1};
  CHECK(bmac_dot(ones, ones, mask) == 48);
  CHECK(bmac_dot(ones, zeros, mask) == -48);
  const std::vector<uint64_t> half{0x0000'00ff'ffffULL};
  CHECK(bmac_dot(ones, half, mask) == 0);
  const std::vector<uint64_t> low3{0x7};
  CHECK(bmac_dot(ones, zeros, low3) == -3);
  const std::vector<uint64_t> two{0, 0};
  CHECK_THROWS_AS(bmac_dot(ones, two, mask), Error);
}

TEST_CASE("bmac dot matches the integer dot product") {
  SplitMix64 rng(11);
  for (int ws : {1, 7, 48, 64}) {
    for (int64_t C : {1, 5, 47, 48, 49, 130}) {
      const auto a = oracle::random_pm1(static_cast<size_t>(C), rng);
      const auto b = oracle::random_pm1(static_cast<size_t>(C), rng);
      const auto pa = pack_bits(std::span<const int8_t>(a), {1, C}, ws);
      const auto pb = pack_bits(std::span<const int8_t>(b), {1, C}, ws);
      const int32_t got = bmac_dot(pa.words, pb.words, pa.masks());
      CHECK(got == oracle::dot_pm1(a, b));
      CHECK((got + C) % 2 == 0);
    }
  }
}

TEST_CASE("binary conv: all +1 gives the window size") {
  const std::vector<int8_t> x(3 * 4 * 4, 1), w(2 * 3 * 3 * 3, 1);
  const auto px = pack_bits(std::span<const int8_t>(x), {1, 3, 4, 4});
  const auto pw = pack_bits(std::span<const int8_t>(w), {2, 3, 3, 3});
  const auto out = binary_conv2d(px, pw, 1, 0);
  REQUIRE(out.size() == 2 * 2 * 2);
  for (int32_t v : out) CHECK(v == 27);
  // With -1 padding the corner windows see 5 of 9 pixels as -1.
  const auto padded = binary_conv2d(px, pw, 1, 1, 0);
  CHECK(padded[0] == 3 * (4 - 5));
  const auto padded_pos = binary_conv2d(px, pw, 1, 1, 1);
  CHECK(padded_pos[0] == 27);
}

TEST_CASE("binary conv matches the dense oracle") {
  SplitMix64 rng(3);
  int cases = 0;
  for (int ws : {48, 64, 13})
    for (int64_t C : {1, 3, 47, 48, 49, 96})
      for (int stride : {1, 2})
        for (int pad : {0, 1})
          for (int pad_bit : {0, 1}) {
            const int H = 6, W = 5, Co = 3, k = 3;
            const auto x = oracle::random_pm1(static_cast<size_t>(C * H * W), rng);
            const auto w = oracle::random_pm1(static_cast<size_t>(Co * C * k * k), rng);
            const auto px = pack_bits(std::span<const int8_t>(x), {1, C, H, W}, ws);
            const auto pw = pack_bits(std::span<const int8_t>(w), {Co, C, k, k}, ws);
            const auto got = binary_conv2d(px, pw, stride, pad, pad_bit, 1 + cases % 3);
            const auto want = oracle::conv_pm1(x, static_cast<int>(C), H, W, w, Co, k, stride, pad,
                                               static_cast<int8_t>(pad_bit ? 1 : -1));
            CHECK(got == want);
            for (int32_t v : got) {
              CHECK(std::abs(v) <= C * k * k);
              CHECK((v + C * k * k) % 2 == 0);
            }
            ++cases;
          }
  CHECK(cases == 144);
}

TEST_CASE("binary conv ignores padded lanes") {
  SplitMix64 rng(9);
  const int64_t C = 49, H = 4, W = 4, Co = 2;
  const auto x = oracle::random_pm1(static_cast<size_t>(C * H * W), rng);
  const auto w = oracle::random_pm1(static_cast<size_t>(Co * C * 9), rng);
  auto px = pack_bits(std::span<const int8_t>(x), {1, C, H, W}, 48);
  auto pw = pack_bits(std::span<const int8_t>(w), {Co, C, 3, 3}, 48);
  const auto clean = binary_conv2d(px, pw, 1, 1);
  const uint64_t junk = ~px.last_word_mask();
  for (size_t i = 1; i < px.words.size(); i += 2) px.words[i] |= junk & 0xdeadbeefcafef00dULL;
  for (size_t i = 1; i < pw.words.size(); i += 2) pw.words[i] ^= junk;
  CHECK(binary_conv2d(px, pw, 1, 1) == clean);
}

TEST_CASE("binary conv rejects bad shapes") {
  const std::vector<int8_t> x(2 * 3 * 3, 1), w(1 * 3 * 3 * 3, 1);
  const auto px = pack_bits(std::span<const int8_t>(x), {1, 2, 3, 3});
  const auto pw = pack_bits(std::span<const int8_t>(w), {1, 3, 3, 3});
  CHECK_THROWS_AS(binary_conv2d(px, pw, 1, 0), Error);
}

TEST_CASE("binary linear matches dot products") {
  SplitMix64 rng(5);
  const int64_t C = 70, Co = 4, P = 3;
  const auto x = oracle::random_pm1(static_cast<size_t>(C * P), rng);
  const auto w = oracle::random_pm1(static_cast<size_t>(Co * C), rng);
  const auto px = pack_bits(std::span<const int8_t>(x), {1, C, P, 1});
  const auto pw = pack_bits(std::span<const int8_t>(w), {Co, C});
  std::vector<int32_t> out(static_cast<size_t>(Co * P));
  binary_linear(px.words.data(), pw.words.data(), 48, C, Co, P, out.data(), 2);
  for (int64_t o = 0; o < Co; ++o)
    for (int64_t p = 0; p < P; ++p) {
      int64_t s = 0;
      for (int64_t c = 0; c < C; ++c) s += x[static_cast<size_t>(c * P + p)] * w[static_cast<size_t>(o * C + c)];
      CHECK(out[static_cast<size_t>(o * P + p)] == s);
    }
}

TEST_CASE("fixed conv") {
  SUBCASE("w = 2, b = -1, x = 1.5 gives 2.0") {
    const int16_t x = 384;          // 1.5 in Q8.8
    const int16_t w = 16384;        // 2.0 with 13 fractional bits
    const int16_t b = -16384;       // -1.0 with 14 fractional bits
    int16_t out = 0;
    FixedConvParams p{&w, 13, &b, 14, nullptr};
    fixed_conv2d(&x, 8, ConvGeometry{1, 1, 1, 1, 1, 1, 0}, p, 8, &out);
    CHECK(out == 512);
  }
  SUBCASE("identity kernel") {
    std::vector<int16_t> x{1, -2, 3, 4, 5, -6, 7, 8, 9};
    const int16_t w[9] = {0, 0, 0, 0, 1 << 14, 0, 0, 0, 0};
    std::vector<int16_t> out(9);
    fixed_conv2d(x.data(), 8, ConvGeometry{1, 3, 3, 1, 3, 1, 1}, FixedConvParams{w, 14}, 8, out.data());
    CHECK(out == x);
  }
  SUBCASE("padding value is used at the border") {
    const int16_t x = 0, w[9] = {1 << 8, 1 << 8, 1 << 8, 1 << 8, 1 << 8, 1 << 8, 1 << 8, 1 << 8, 1 << 8};
    const int16_t pad = 256;
    int16_t out = 0;
    fixed_conv2d(&x, 8, ConvGeometry{1, 1, 1, 1, 3, 1, 1}, FixedConvParams{w, 8, nullptr, 0, &pad}, 8, &out);
    CHECK(out == 8 * 256);
  }
  SUBCASE("accumulator overflow saturates and is counted") {
    const std::vector<int16_t> x(3, 32767), w(3, 32767);
    int16_t out = 0;
    QuantStats st;
    fixed_conv2d(x.data(), 8, ConvGeometry{3, 1, 1, 1, 1, 1, 0}, FixedConvParams{w.data(), 8}, 8, &out, &st);
    CHECK(st.accumulator_overflows == 1);
    CHECK(out == 32767);
  }
  SUBCASE("matches the real-valued oracle within rounding") {
    SplitMix64 rng(21);
    const int C = 4, H = 5, W = 5, Co = 3, k = 3;
    std::vector<int16_t> x(C * H * W), w(Co * C * k * k), b(Co);
    std::vector<double> xr(x.size()), wr(w.size()), br(b.size());
    for (size_t i = 0; i < x.size(); ++i) xr[i] = (x[i] = static_cast<int16_t>(rng.uniform(-256, 256))) / 256.0;
    for (size_t i = 0; i < w.size(); ++i) wr[i] = (w[i] = static_cast<int16_t>(rng.uniform(-8192, 8192))) / 16384.0;
    for (size_t i = 0; i < b.size(); ++i) br[i] = (b[i] = static_cast<int16_t>(rng.uniform(-4096, 4096))) / 4096.0;
    std::vector<int16_t> out(static_cast<size_t>(Co * H * W));
    fixed_conv2d(x.data(), 8, ConvGeometry{C, H, W, Co, k, 1, 1}, FixedConvParams{w.data(), 14, b.data(), 12}, 8,
                 out.data(), nullptr, 2);
    const auto ref = oracle::conv_real(xr, C, H, W, wr, br, Co, k, 1, 1);
    for (size_t i = 0; i < out.size(); ++i) CHECK(std::abs(out[i] / 256.0 - ref[i]) <= 0.5 / 256.0);
  }
}

TEST_CASE("threshold and sign") {
  const int16_t x[4] = {512, 511, -1, 0};  // one channel, four pixels, Q8.8
  const int32_t tau = 512;
  std::vector<uint64_t> out(4);
  for (uint8_t mode : {0, 1, 2, 3}) {
    threshold_apply<int16_t>(x, 1, 4, &tau, &mode, 48, out.data());
    const auto bits = unpack_plane(out, 1, 4, 48);
    if (mode == 0) CHECK(bits == std::vector<int8_t>{1, -1, -1, -1});
    if (mode == 1) CHECK(bits == std::vector<int8_t>{1, 1, 1, 1});
    if (mode == 2) CHECK(bits == std::vector<int8_t>{1, 1, 1, 1});
    if (mode == 3) CHECK(bits == std::vector<int8_t>{-1, -1, -1, -1});
  }
  sign_apply<int16_t>(x, 1, 4, 48, out.data());
  CHECK(unpack_plane(out, 1, 4, 48) == std::vector<int8_t>{1, 1, -1, 1});
}

TEST_CASE("maxpool on packed bits is OR") {
  SplitMix64 rng(8);
  const int64_t C = 50, H = 4, W = 4;
  const auto x = oracle::random_pm1(static_cast<size_t>(C * H * W), rng);
  const auto px = pack_bits(std::span<const int8_t>(x), {1, C, H, W});
  std::vector<uint64_t> out(static_cast<size_t>(4 * px.words_per_pixel()));
  maxpool_or(px.words.data(), C, H, W, 48, 2, 2, out.data());
  CHECK(unpack_plane(out, C, 4, 48) == oracle::maxpool_pm1(x, static_cast<int>(C), 4, 4, 2, 2));
}

TEST_CASE("fixed element-wise ops") {
  SUBCASE("prelu") {
    const int16_t x[2] = {-256, 256}, alpha = 8192;  // 0.25 with 15 fractional bits
    int16_t out[2];
    prelu_fixed(x, 1, 2, &alpha, 15, out);
    CHECK(out[0] == -64);
    CHECK(out[1] == 256);
  }
  SUBCASE("average pool rounds half to even") {
    const int16_t a[4] = {1, 2, 3, 4}, b[4] = {1, 2, 3, 6};
    int16_t out = 0;
    avgpool_fixed(a, 1, 2, 2, 2, 2, &out);
    CHECK(out == 2);
    avgpool_fixed(b, 1, 2, 2, 2, 2, &out);
    CHECK(out == 3);
    global_avgpool_fixed(a, 1, 4, &out);
    CHECK(out == 2);
  }
  SUBCASE("div_round_even") {
    CHECK(div_round_even(5, 2) == 2);
    CHECK(div_round_even(7, 2) == 4);
    CHECK(div_round_even(-5, 2) == -2);
    CHECK(div_round_even(-7, 2) == -4);
    CHECK(div_round_even(-7, 3) == -2);
    CHECK(div_round_even(10, 4) == 2);
  }
  SUBCASE("add saturates") {
    const int16_t a[2] = {32000, 1}, b[2] = {1000, 2};
    int16_t out[2];
    QuantStats st;
    add_fixed(a, b, 2, out, &st);
    CHECK(out[0] == 32767);
    CHECK(out[1] == 3);
    CHECK(st.saturated == 1);
  }
  SUBCASE("batchnorm scale and shift") {
    const int16_t x = 256, scale = 16384, shift = 64;  // 1.0, 0.5 (frac 15), 0.25
    const uint8_t sf = 15;
    int16_t out = 0;
    batchnorm_fixed<int16_t>(&x, 8, 1, 1, &scale, &sf, &shift, 8, &out);
    CHECK(out == 192);
  }
}

TEST_CASE("channel transpose") {
  const std::vector<int16_t> x{0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11};  // [2][3][2]
  std::vector<int16_t> y(12), z(12);
  transpose_ch<int16_t>(x.data(), 2, 3, 2, y.data());
  CHECK(y == std::vector<int16_t>{0, 1, 6, 7, 2, 3, 8, 9, 4, 5, 10, 11});
  transpose_ch<int16_t>(y.data(), 3, 2, 2, z.data());
  CHECK(z == x);
}
