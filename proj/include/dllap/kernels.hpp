#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <span>
#include <vector>

namespace dllap::kernels {

// Output channels are processed in blocks of this many lanes.
inline constexpr std::size_t kOutBlock = 64;
// Frames per register tile in batch mode.
inline constexpr std::size_t kFrameTile = 4;

inline std::size_t round_up(std::size_t n, std::size_t m) { return (n + m - 1) / m * m; }

// Dense map over a (tap, channel) window. Row r = tap * in + channel.
//
// Weights are stored as [out_block][row][kOutBlock]. Each output is bias plus
// rows in ascending order for any frame tile, matching streaming and batch
// bit for bit.
class PackedDense {
 public:
  PackedDense() = default;

  // weight is [out][in][taps] (PyTorch Conv1d order); bias is [out].
  PackedDense(std::size_t in, std::size_t out, std::size_t taps, std::span<const float> weight,
              std::span<const float> bias)
      : in_(in), out_(out), taps_(taps), out_padded_(round_up(out, kOutBlock)) {
    const std::size_t rows = in * taps;
    packed_.assign(out_padded_ * rows, 0.0f);
    bias_.assign(out_padded_, 0.0f);
    for (std::size_t o = 0; o < out; ++o) {
      const std::size_t blk = o / kOutBlock, lane = o % kOutBlock;
      float* dst = packed_.data() + blk * rows * kOutBlock + lane;
      for (std::size_t i = 0; i < in; ++i) {
        for (std::size_t j = 0; j < taps; ++j) {
          dst[(j * in + i) * kOutBlock] = weight[(o * in + i) * taps + j];
        }
      }
      bias_[o] = bias[o];
    }
  }

  std::size_t in() const { return in_; }
  std::size_t out() const { return out_; }
  std::size_t taps() const { return taps_; }
  std::size_t bytes() const { return (packed_.size() + bias_.size()) * sizeof(float); }

  // taps[f * taps() + j] points at the in()-wide input for tap j of frame f;
  // outs[f] receives out() values.
  template <std::size_t F>
  void apply(const float* const* taps, float* const* outs) const {
    const std::size_t rows = in_ * taps_;
    for (std::size_t blk = 0; blk < out_padded_ / kOutBlock; ++blk) {
      float acc[F][kOutBlock];
      const float* b = bias_.data() + blk * kOutBlock;
      for (std::size_t f = 0; f < F; ++f) {
        for (std::size_t l = 0; l < kOutBlock; ++l) acc[f][l] = b[l];
      }
      const float* w = packed_.data() + blk * rows * kOutBlock;
      for (std::size_t j = 0; j < taps_; ++j) {
        const float* xs[F];
        for (std::size_t f = 0; f < F; ++f) xs[f] = taps[f * taps_ + j];
        for (std::size_t i = 0; i < in_; ++i, w += kOutBlock) {
          for (std::size_t f = 0; f < F; ++f) {
            const float xv = xs[f][i];
            for (std::size_t l = 0; l < kOutBlock; ++l) acc[f][l] += w[l] * xv;
          }
        }
      }
      const std::size_t lanes = std::min(kOutBlock, out_ - blk * kOutBlock);
      for (std::size_t f = 0; f < F; ++f) {
        std::copy_n(acc[f], lanes, outs[f] + blk * kOutBlock);
      }
    }
  }

 private:
  std::size_t in_ = 0, out_ = 0, taps_ = 0, out_padded_ = 0;
  std::vector<float> packed_;
  std::vector<float> bias_;
};

// Per-channel filter: y[c] = bias[c] + sum_j w[j][c] * x_j[c], j ascending.
class PackedDepthwise {
 public:
  PackedDepthwise() = default;

  // weight is [channels][1][taps]; bias is [channels].
  PackedDepthwise(std::size_t channels, std::size_t taps, std::span<const float> weight,
                  std::span<const float> bias)
      : channels_(channels), taps_(taps), packed_(channels * taps), bias_(bias.begin(), bias.end()) {
    for (std::size_t c = 0; c < channels; ++c) {
      for (std::size_t j = 0; j < taps; ++j) packed_[j * channels + c] = weight[c * taps + j];
    }
  }

  std::size_t channels() const { return channels_; }
  std::size_t taps() const { return taps_; }
  std::size_t bytes() const { return (packed_.size() + bias_.size()) * sizeof(float); }

  void apply(const float* const* taps, float* out) const {
    std::copy(bias_.begin(), bias_.end(), out);
    for (std::size_t j = 0; j < taps_; ++j) {
      const float* x = taps[j];
      const float* w = packed_.data() + j * channels_;
      for (std::size_t c = 0; c < channels_; ++c) out[c] += w[c] * x[c];
    }
  }

 private:
  std::size_t channels_ = 0, taps_ = 0;
  std::vector<float> packed_;
  std::vector<float> bias_;
};

}  // namespace dllap::kernels
