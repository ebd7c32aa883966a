#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "dllap/error.hpp"
#include "dllap/kernels.hpp"
#include "dllap/tensor.hpp"

namespace dllap {

enum class GrnMode { global, causal_cumulative };

inline std::string to_string(GrnMode m) {
  return m == GrnMode::global ? "global" : "causal_cumulative";
}

struct ConvGeometry {
  std::size_t kernel = 1;
  std::size_t dilation = 1;
  bool causal = true;

  std::size_t span() const { return (kernel - 1) * dilation; }
  // Zero frames inserted before the sequence. The non-causal split leaves
  // floor(span/2) frames of lookahead on the right.
  std::size_t left_pad() const { return causal ? span() : span() - span() / 2; }

  bool operator==(const ConvGeometry&) const = default;
};

struct ConvParams {
  std::size_t in_ch = 0;
  std::size_t out_ch = 0;
  std::size_t kernel = 1;
  std::size_t dilation = 1;
  bool causal = true;
  std::vector<float> weight;  // [out_ch x in_ch x kernel]
  std::vector<float> bias;    // [out_ch]

  ConvGeometry geometry() const { return {kernel, dilation, causal}; }
};

namespace detail {

inline void check_conv(const ConvParams& p, std::size_t weight_in) {
  if (p.kernel == 0 || p.dilation == 0) throw InvalidArgument("conv: kernel and dilation must be >= 1");
  if (p.weight.size() != p.out_ch * weight_in * p.kernel || p.bias.size() != p.out_ch) {
    throw InvalidArgument("conv: weight/bias sizes do not match (out_ch, in_ch, kernel)");
  }
}

// Input frame read by tap j when producing output frame t, or the zero frame
// when that position falls in the padding.
inline const float* tap_source(const FrameTensor& x, std::size_t t, std::size_t j,
                               const ConvGeometry& g, const float* zero) {
  const auto pos = static_cast<std::ptrdiff_t>(t) - static_cast<std::ptrdiff_t>(g.left_pad()) +
                   static_cast<std::ptrdiff_t>(j * g.dilation);
  if (pos < 0 || pos >= static_cast<std::ptrdiff_t>(x.frames)) return zero;
  return x.values.data() + static_cast<std::size_t>(pos) * x.channels;
}

}  // namespace detail

// Whole-sequence evaluation of a packed dense conv with the given geometry.
inline FrameTensor dense_sequence(const kernels::PackedDense& layer, const ConvGeometry& g,
                                  const FrameTensor& x) {
  if (x.channels != layer.in()) {
    throw InvalidArgument("conv1d: input has " + std::to_string(x.channels) +
                          " channels, layer expects " + std::to_string(layer.in()));
  }
  constexpr std::size_t F = kernels::kFrameTile;
  const std::size_t k = layer.taps();
  FrameTensor y(x.frames, layer.out());
  const std::vector<float> zero(x.channels, 0.0f);
  std::vector<const float*> taps(F * k);
  float* outs[F];
  std::size_t t = 0;
  for (; t + F <= x.frames; t += F) {
    for (std::size_t f = 0; f < F; ++f) {
      for (std::size_t j = 0; j < k; ++j) taps[f * k + j] = detail::tap_source(x, t + f, j, g, zero.data());
      outs[f] = y.values.data() + (t + f) * y.channels;
    }
    layer.apply<F>(taps.data(), outs);
  }
  for (; t < x.frames; ++t) {
    for (std::size_t j = 0; j < k; ++j) taps[j] = detail::tap_source(x, t, j, g, zero.data());
    outs[0] = y.values.data() + t * y.channels;
    layer.apply<1>(taps.data(), outs);
  }
  return y;
}

inline FrameTensor depthwise_sequence(const kernels::PackedDepthwise& layer, const ConvGeometry& g,
                                      const FrameTensor& x) {
  if (x.channels != layer.channels()) {
    throw InvalidArgument("depthwise_conv1d: input has " + std::to_string(x.channels) +
                          " channels, layer expects " + std::to_string(layer.channels()));
  }
  FrameTensor y(x.frames, x.channels);
  const std::vector<float> zero(x.channels, 0.0f);
  std::vector<const float*> taps(layer.taps());
  for (std::size_t t = 0; t < x.frames; ++t) {
    for (std::size_t j = 0; j < layer.taps(); ++j) taps[j] = detail::tap_source(x, t, j, g, zero.data());
    layer.apply(taps.data(), y.values.data() + t * y.channels);
  }
  return y;
}

// Stride-1 convolution. Causal mode left-pads (k-1)*d zero frames; non-causal
// pads ceil((k-1)d/2) on the left and floor((k-1)d/2) on the right.
inline FrameTensor conv1d(const FrameTensor& x, const ConvParams& p) {
  detail::check_conv(p, p.in_ch);
  if (x.channels != p.in_ch) {
    throw InvalidArgument("conv1d: input has " + std::to_string(x.channels) +
                          " channels, expected in_ch = " + std::to_string(p.in_ch));
  }
  const kernels::PackedDense layer(p.in_ch, p.out_ch, p.kernel, p.weight, p.bias);
  return dense_sequence(layer, p.geometry(), x);
}

// One filter per channel; weight is [C x 1 x kernel].
inline FrameTensor depthwise_conv1d(const FrameTensor& x, const ConvParams& p) {
  if (p.in_ch != p.out_ch) throw InvalidArgument("depthwise_conv1d: in_ch must equal out_ch");
  detail::check_conv(p, 1);
  if (x.channels != p.in_ch) {
    throw InvalidArgument("depthwise_conv1d: input has " + std::to_string(x.channels) +
                          " channels, expected " + std::to_string(p.in_ch));
  }
  const kernels::PackedDepthwise layer(p.in_ch, p.kernel, p.weight, p.bias);
  return depthwise_sequence(layer, p.geometry(), x);
}

inline void layer_norm_frame(std::span<const float> x, std::span<const float> gamma,
                             std::span<const float> beta, double eps, std::span<float> y) {
  const std::size_t c = x.size();
  double mean = 0.0;
  for (float v : x) mean += v;
  mean /= static_cast<double>(c);
  double var = 0.0;
  for (float v : x) var += (v - mean) * (v - mean);
  var /= static_cast<double>(c);
  const double inv = 1.0 / std::sqrt(var + eps);
  for (std::size_t i = 0; i < c; ++i) {
    y[i] = static_cast<float>(gamma[i] * ((x[i] - mean) * inv) + beta[i]);
  }
}

inline FrameTensor layer_norm_channels(const FrameTensor& x, std::span<const float> gamma,
                                       std::span<const float> beta, double eps = 1e-6) {
  if (gamma.size() != x.channels || beta.size() != x.channels) {
    throw InvalidArgument("layer_norm_channels: gamma/beta must have one entry per channel");
  }
  if (x.channels == 1 && eps == 0.0) {
    throw InvalidArgument("layer_norm_channels: a single channel with eps = 0 divides by zero");
  }
  FrameTensor y(x.frames, x.channels);
  for (std::size_t t = 0; t < x.frames; ++t) layer_norm_frame(x.frame(t), gamma, beta, eps, y.frame(t));
  return y;
}

// Exact (erf-based) GELU.
inline float gelu(float x) {
  const double xd = x;
  return static_cast<float>(0.5 * xd * (1.0 + std::erf(xd / std::numbers::sqrt2)));
}

inline void gelu_inplace(std::span<float> x) {
  for (auto& v : x) v = gelu(v);
}

// y = gamma * (x * n) + beta + x with n_c = g_c / (mean_c g + eps).
inline void grn_frame(std::span<const float> x, std::span<const double> g,
                      std::span<const float> gamma, std::span<const float> beta, double eps,
                      std::span<float> y) {
  double mean = 0.0;
  for (double v : g) mean += v;
  mean /= static_cast<double>(g.size());
  const double denom = mean + eps;
  for (std::size_t c = 0; c < x.size(); ++c) {
    const double n = g[c] / denom;
    y[c] = static_cast<float>(gamma[c] * (x[c] * n) + beta[c] + x[c]);
  }
}

// Adds one frame to running per-channel sums of squares and writes the
// corresponding norms.
inline void accumulate_sumsq(std::span<const float> x, std::span<double> sumsq, std::span<double> g) {
  for (std::size_t c = 0; c < x.size(); ++c) {
    sumsq[c] += static_cast<double>(x[c]) * x[c];
    g[c] = std::sqrt(sumsq[c]);
  }
}

inline FrameTensor grn(const FrameTensor& x, std::span<const float> gamma, std::span<const float> beta,
                       GrnMode mode, double eps = 1e-6) {
  if (gamma.size() != x.channels || beta.size() != x.channels) {
    throw InvalidArgument("grn: gamma/beta must have one entry per channel");
  }
  FrameTensor y(x.frames, x.channels);
  std::vector<double> sumsq(x.channels, 0.0), g(x.channels, 0.0);
  if (mode == GrnMode::global) {
    for (std::size_t t = 0; t < x.frames; ++t) accumulate_sumsq(x.frame(t), sumsq, g);
    for (std::size_t t = 0; t < x.frames; ++t) grn_frame(x.frame(t), g, gamma, beta, eps, y.frame(t));
  } else {
    for (std::size_t t = 0; t < x.frames; ++t) {
      accumulate_sumsq(x.frame(t), sumsq, g);
      grn_frame(x.frame(t), g, gamma, beta, eps, y.frame(t));
    }
  }
  return y;
}

inline float phase_from_components(float real, float imag) {
  if (real == 0.0f && imag == 0.0f) return 0.0f;
  float p = std::atan2(imag, real);
  if (p <= -std::numbers::pi_v<float>) p = std::numbers::pi_v<float>;
  return p;
}

// Wrapped phase from pseudo-real and pseudo-imaginary parts.
inline FrameTensor phase_activate(const FrameTensor& real, const FrameTensor& imag) {
  if (real.frames != imag.frames || real.channels != imag.channels) {
    throw InvalidArgument("phase_activate: real and imaginary parts differ in shape");
  }
  FrameTensor y(real.frames, real.channels);
  for (std::size_t i = 0; i < y.values.size(); ++i) {
    y.values[i] = phase_from_components(real.values[i], imag.values[i]);
  }
  return y;
}

}  // namespace dllap
