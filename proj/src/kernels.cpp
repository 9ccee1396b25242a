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
#include "blendnet/kernels.hpp"

#include <algorithm>
#include <bit>
#include <cstdlib>
#include <limits>
#include <string>
#include <thread>

namespace blend {

int default_workers() {
  if (const char* env = std::getenv("NB_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<int>(std::min<long>(v, 1024));
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(int64_t n, int workers, const std::function<void(int64_t, int64_t, int)>& fn) {
  if (n <= 0) return;
  const int64_t w = std::clamp<int64_t>(workers, 1, n);
  if (w == 1) {
    fn(0, n, 0);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(static_cast<size_t>(w - 1));
  const int64_t chunk = (n + w - 1) / w;
  for (int64_t t = 1; t < w; ++t) {
    const int64_t b = t * chunk, e = std::min(n, b + chunk);
    if (b >= e) break;
    pool.emplace_back(fn, b, e, static_cast<int>(t));
  }
  fn(0, std::min(n, chunk), 0);
  for (auto& th : pool) th.join();
}

namespace {

uint64_t lane_mask(int64_t lanes) { return lanes >= 64 ? ~uint64_t{0} : ((uint64_t{1} << lanes) - 1); }

std::vector<uint64_t> word_masks(int64_t channels, int word_size) {
  const int64_t wpp = (channels + word_size - 1) / word_size;
  std::vector<uint64_t> m(static_cast<size_t>(wpp), lane_mask(word_size));
  if (wpp > 0 && channels % word_size) m.back() = lane_mask(channels % word_size);
  return m;
}

int64_t words_for(int64_t channels, int word_size) { return (channels + word_size - 1) / word_size; }

// Saturates a 64-bit partial result into the 32-bit accumulator range.
int64_t clamp_acc(int64_t v, QuantStats* stats) {
  if (v > INT32_MAX || v < INT32_MIN) {
    if (stats) ++stats->accumulator_overflows;
    return std::clamp<int64_t>(v, INT32_MIN, INT32_MAX);
  }
  return v;
}

}  // namespace

int32_t bmac_dot(std::span<const uint64_t> a, std::span<const uint64_t> b, std::span<const uint64_t> masks) {
  if (a.size() != b.size() || a.size() != masks.size()) throw Error("bmac_dot: word counts differ");
  int32_t agree = 0, valid = 0;
  for (size_t j = 0; j < a.size(); ++j) {
    agree += std::popcount(~(a[j] ^ b[j]) & masks[j]);
    valid += std::popcount(masks[j]);
  }
  return 2 * agree - valid;
}

void binary_conv2d(const uint64_t* x, const uint64_t* w, int word_size, const ConvGeometry& g, int pad_bit,
                   int32_t* out, int workers) {
  const int64_t wpp = words_for(g.in_channels, word_size);
  const auto masks = word_masks(g.in_channels, word_size);
  const int64_t Ho = g.out_height(), Wo = g.out_width();
  const int k = g.kernel;
  const int32_t n = static_cast<int32_t>(g.in_channels * k * k);

  parallel_for(g.out_channels, workers, [&](int64_t o_begin, int64_t o_end, int) {
    std::vector<int32_t> pad_mismatch(static_cast<size_t>(k * k));
    for (int64_t o = o_begin; o < o_end; ++o) {
      const uint64_t* wo = w + o * k * k * wpp;
      for (int t = 0; t < k * k; ++t) {
        int32_t m = 0;
        for (int64_t j = 0; j < wpp; ++j) {
          const uint64_t pad_word = pad_bit ? masks[static_cast<size_t>(j)] : 0;
          m += std::popcount((pad_word ^ wo[t * wpp + j]) & masks[static_cast<size_t>(j)]);
        }
        pad_mismatch[static_cast<size_t>(t)] = m;
      }
      for (int64_t oy = 0; oy < Ho; ++oy)
        for (int64_t ox = 0; ox < Wo; ++ox) {
          int32_t mismatch = 0;
          for (int ky = 0; ky < k; ++ky) {
            const int64_t iy = oy * g.stride - g.padding + ky;
            for (int kx = 0; kx < k; ++kx) {
              const int64_t ix = ox * g.stride - g.padding + kx;
              const int t = ky * k + kx;
              if (iy < 0 || iy >= g.in_height || ix < 0 || ix >= g.in_width) {
                mismatch += pad_mismatch[static_cast<size_t>(t)];
                continue;
              }
              const uint64_t* xp = x + (iy * g.in_width + ix) * wpp;
              const uint64_t* wp = wo + t * wpp;
              for (int64_t j = 0; j < wpp; ++j) mismatch += std::popcount((xp[j] ^ wp[j]) & masks[static_cast<size_t>(j)]);
            }
          }
          out[(o * Ho + oy) * Wo + ox] = n - 2 * mismatch;
        }
    }
  });
}

std::vector<int32_t> binary_conv2d(const PackedBitTensor& x, const PackedBitTensor& w, int stride, int padding,
                                   int pad_bit, int workers) {
  if (x.shape.size() != 4 || x.shape[0] != 1) throw Error("binary_conv2d: input must be [1,C,H,W]");
  if (w.shape.size() != 4 || w.shape[2] != w.shape[3]) throw Error("binary_conv2d: weights must be [Co,C,k,k]");
  if (w.shape[1] != x.shape[1]) throw Error("binary_conv2d: channel mismatch");
  if (w.word_size != x.word_size) throw Error("binary_conv2d: word size mismatch");
  if (stride < 1 || padding < 0) throw Error("binary_conv2d: invalid stride/padding");
  ConvGeometry g{x.shape[1], x.shape[2], x.shape[3], w.shape[0], static_cast<int>(w.shape[2]), stride, padding};
  if (g.out_height() < 1 || g.out_width() < 1) throw Error("binary_conv2d: kernel larger than padded input");
  std::vector<int32_t> out(static_cast<size_t>(g.out_channels * g.out_height() * g.out_width()));
  binary_conv2d(x.words.data(), w.words.data(), x.word_size, g, pad_bit, out.data(), workers);
  return out;
}

void binary_linear(const uint64_t* x, const uint64_t* w, int word_size, int64_t in_channels, int64_t out_channels,
                   int64_t pixels, int32_t* out, int workers) {
  const int64_t wpp = words_for(in_channels, word_size);
  const auto masks = word_masks(in_channels, word_size);
  const int32_t n = static_cast<int32_t>(in_channels);
  parallel_for(out_channels, workers, [&](int64_t o_begin, int64_t o_end, int) {
    for (int64_t o = o_begin; o < o_end; ++o) {
      const uint64_t* wo = w + o * wpp;
      for (int64_t p = 0; p < pixels; ++p) {
        const uint64_t* xp = x + p * wpp;
        int32_t mismatch = 0;
        for (int64_t j = 0; j < wpp; ++j) mismatch += std::popcount((xp[j] ^ wo[j]) & masks[static_cast<size_t>(j)]);
        out[o * pixels + p] = n - 2 * mismatch;
      }
    }
  });
}

void fixed_conv2d(const int16_t* x, int in_frac, const ConvGeometry& g, const FixedConvParams& p, int out_frac,
                  int16_t* out, QuantStats* stats, int workers) {
  const int64_t Ho = g.out_height(), Wo = g.out_width();
  const int k = g.kernel;
  const int acc_frac = in_frac + p.weight_frac;
  const int64_t plane = g.in_height * g.in_width;
  std::vector<QuantStats> local(static_cast<size_t>(std::max(1, workers)));

  parallel_for(g.out_channels, workers, [&](int64_t o_begin, int64_t o_end, int worker) {
    QuantStats& st = local[static_cast<size_t>(worker)];
    for (int64_t o = o_begin; o < o_end; ++o) {
      int64_t bias = 0;
      if (p.bias) {
        const int shift = p.bias_frac - acc_frac;
        bias = shift >= 0 ? shift_round_even(p.bias[o], shift) : int64_t{p.bias[o]} * (int64_t{1} << -shift);
      }
      const int16_t* wo = p.weights + o * g.in_channels * k * k;
      for (int64_t oy = 0; oy < Ho; ++oy)
        for (int64_t ox = 0; ox < Wo; ++ox) {
          int64_t acc = bias;
          for (int64_t i = 0; i < g.in_channels; ++i) {
            const int16_t* xi = x + i * plane;
            const int16_t* wi = wo + i * k * k;
            const int64_t pad = p.padding_value ? p.padding_value[i] : 0;
            for (int ky = 0; ky < k; ++ky) {
              const int64_t iy = oy * g.stride - g.padding + ky;
              for (int kx = 0; kx < k; ++kx) {
                const int64_t ix = ox * g.stride - g.padding + kx;
                const bool inside = iy >= 0 && iy < g.in_height && ix >= 0 && ix < g.in_width;
                acc += (inside ? int64_t{xi[iy * g.in_width + ix]} : pad) * wi[ky * k + kx];
              }
            }
          }
          acc = clamp_acc(acc, &st);
          out[(o * Ho + oy) * Wo + ox] = saturate16(shift_round_even(acc, acc_frac - out_frac), &st);
        }
    }
  });
  if (stats)
    for (const auto& s : local) *stats += s;
}

template <typename T>
void threshold_apply(const T* x, int64_t channels, int64_t pixels, const int32_t* thresholds, const uint8_t* modes,
                     int word_size, uint64_t* out) {
  const int64_t wpp = words_for(channels, word_size);
  std::fill(out, out + pixels * wpp, uint64_t{0});
  for (int64_t c = 0; c < channels; ++c) {
    const uint64_t bit = uint64_t{1} << (c % word_size);
    const int64_t j = c / word_size;
    const int32_t t = thresholds[c];
    const T* xc = x + c * pixels;
    for (int64_t p = 0; p < pixels; ++p) {
      bool on = false;
      switch (modes[c]) {
        case 0: on = xc[p] >= t; break;
        case 1: on = xc[p] <= t; break;
        case 2: on = true; break;
        default: on = false; break;
      }
      if (on) out[p * wpp + j] |= bit;
    }
  }
}

template <typename T>
void sign_apply(const T* x, int64_t channels, int64_t pixels, int word_size, uint64_t* out) {
  const int64_t wpp = words_for(channels, word_size);
  std::fill(out, out + pixels * wpp, uint64_t{0});
  for (int64_t c = 0; c < channels; ++c) {
    const uint64_t bit = uint64_t{1} << (c % word_size);
    const int64_t j = c / word_size;
    for (int64_t p = 0; p < pixels; ++p)
      if (x[c * pixels + p] >= 0) out[p * wpp + j] |= bit;
  }
}

void maxpool_or(const uint64_t* x, int64_t channels, int64_t height, int64_t width, int word_size, int window,
                int stride, uint64_t* out) {
  const int64_t wpp = words_for(channels, word_size);
  const auto masks = word_masks(channels, word_size);
  const int64_t Ho = (height - window) / stride + 1, Wo = (width - window) / stride + 1;
  for (int64_t oy = 0; oy < Ho; ++oy)
    for (int64_t ox = 0; ox < Wo; ++ox)
      for (int64_t j = 0; j < wpp; ++j) {
        uint64_t acc = 0;
        for (int ky = 0; ky < window; ++ky)
          for (int kx = 0; kx < window; ++kx)
            acc |= x[((oy * stride + ky) * width + ox * stride + kx) * wpp + j];
        out[(oy * Wo + ox) * wpp + j] = acc & masks[static_cast<size_t>(j)];
      }
}

int64_t div_round_even(int64_t num, int64_t den) {
  int64_t q = num / den, r = num % den;
  if (r < 0) {
    r += den;
    --q;
  }
  if (2 * r > den || (2 * r == den && (q & 1))) ++q;
  return q;
}

void avgpool_fixed(const int16_t* x, int64_t channels, int64_t height, int64_t width, int window, int stride,
                   int16_t* out) {
  const int64_t Ho = (height - window) / stride + 1, Wo = (width - window) / stride + 1;
  const int64_t area = int64_t{window} * window;
  for (int64_t c = 0; c < channels; ++c)
    for (int64_t oy = 0; oy < Ho; ++oy)
      for (int64_t ox = 0; ox < Wo; ++ox) {
        int64_t sum = 0;
        for (int ky = 0; ky < window; ++ky)
          for (int kx = 0; kx < window; ++kx) sum += x[(c * height + oy * stride + ky) * width + ox * stride + kx];
        out[(c * Ho + oy) * Wo + ox] = static_cast<int16_t>(div_round_even(sum, area));
      }
}

void global_avgpool_fixed(const int16_t* x, int64_t channels, int64_t pixels, int16_t* out) {
  for (int64_t c = 0; c < channels; ++c) {
    int64_t sum = 0;
    for (int64_t p = 0; p < pixels; ++p) sum += x[c * pixels + p];
    out[c] = static_cast<int16_t>(div_round_even(sum, pixels));
  }
}

void prelu_fixed(const int16_t* x, int64_t channels, int64_t pixels, const int16_t* alpha, int alpha_frac,
                 int16_t* out, QuantStats* stats) {
  for (int64_t c = 0; c < channels; ++c)
    for (int64_t p = 0; p < pixels; ++p) {
      const int16_t v = x[c * pixels + p];
      out[c * pixels + p] = v >= 0 ? v : saturate16(shift_round_even(int64_t{v} * alpha[c], alpha_frac), stats);
    }
}

void add_fixed(const int16_t* a, const int16_t* b, int64_t n, int16_t* out, QuantStats* stats) {
  for (int64_t i = 0; i < n; ++i) out[i] = saturate16(int64_t{a[i]} + b[i], stats);
}

template <typename T>
void batchnorm_fixed(const T* x, int in_frac, int64_t channels, int64_t pixels, const int16_t* scale,
                     const uint8_t* scale_frac, const int16_t* shift, int out_frac, int16_t* out, QuantStats* stats) {
  for (int64_t c = 0; c < channels; ++c) {
    const int k = in_frac + scale_frac[c] - out_frac;
    for (int64_t p = 0; p < pixels; ++p) {
      const int64_t prod = int64_t{x[c * pixels + p]} * scale[c];
      int64_t r;
      if (k >= 0) {
        r = shift_round_even(clamp_acc(prod + (int64_t{shift[c]} << k), stats), k);
      } else {
        r = clamp_acc(prod * (int64_t{1} << -k) + shift[c], stats);
      }
      out[c * pixels + p] = saturate16(r, stats);
    }
  }
}

template <typename T>
void transpose_ch(const T* x, int64_t channels, int64_t height, int64_t width, T* out) {
  for (int64_t c = 0; c < channels; ++c)
    for (int64_t h = 0; h < height; ++h)
      std::copy(x + (c * height + h) * width, x + (c * height + h + 1) * width, out + (h * channels + c) * width);
}

void transpose_ch_bits(const uint64_t* x, int64_t channels, int64_t height, int64_t width, int word_size,
                       uint64_t* out) {
  // Input [C][H][W] packs C; output [H][C][W] packs H.
  const int64_t wpp_in = words_for(channels, word_size), wpp_out = words_for(height, word_size);
  std::fill(out, out + channels * width * wpp_out, uint64_t{0});
  for (int64_t c = 0; c < channels; ++c)
    for (int64_t h = 0; h < height; ++h)
      for (int64_t w = 0; w < width; ++w) {
        const uint64_t word = x[(h * width + w) * wpp_in + c / word_size];
        if ((word >> (c % word_size)) & 1) out[(c * width + w) * wpp_out + h / word_size] |= uint64_t{1} << (h % word_size);
      }
}

template void threshold_apply<int16_t>(const int16_t*, int64_t, int64_t, const int32_t*, const uint8_t*, int,
                                       uint64_t*);
template void threshold_apply<int32_t>(const int32_t*, int64_t, int64_t, const int32_t*, const uint8_t*, int,
                                       uint64_t*);
template void sign_apply<int16_t>(const int16_t*, int64_t, int64_t, int, uint64_t*);
template void sign_apply<int32_t>(const int32_t*, int64_t, int64_t, int, uint64_t*);
template void batchnorm_fixed<int16_t>(const int16_t*, int, int64_t, int64_t, const int16_t*, const uint8_t*,
                                       const int16_t*, int, int16_t*, QuantStats*);
template void batchnorm_fixed<int32_t>(const int32_t*, int, int64_t, int64_t, const int16_t*, const uint8_t*,
                                       const int16_t*, int, int16_t*, QuantStats*);
template void transpose_ch<int16_t>(const int16_t*, int64_t, int64_t, int64_t, int16_t*);
template void transpose_ch<int32_t>(const int32_t*, int64_t, int64_t, int64_t, int32_t*);

}  // namespace blend
