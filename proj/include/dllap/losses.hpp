#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <set>
#include <span>
#include <string>

#include "dllap/error.hpp"
#include "dllap/model.hpp"
#include "dllap/spectral.hpp"

namespace dllap {

// |x - 2*pi*round(x / 2*pi)|, round half away from zero; result in [0, pi].
inline double anti_wrap(double x) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  return std::abs(x - two_pi * std::round(x / two_pi));
}

namespace detail {

inline void require_same_shape(const FrameTensor& a, const FrameTensor& b, const std::string& what) {
  if (a.frames != b.frames || a.channels != b.channels) {
    throw InvalidArgument(what + ": shape [" + std::to_string(a.frames) + " x " + std::to_string(a.channels) +
                          "] does not match [" + std::to_string(b.frames) + " x " + std::to_string(b.channels) + "]");
  }
}

inline double mean_abs_diff(const FrameTensor& a, const FrameTensor& b) {
  if (a.values.empty()) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    s += std::abs(static_cast<double>(a.values[i]) - static_cast<double>(b.values[i]));
  }
  return s / static_cast<double>(a.values.size());
}

}  // namespace detail

// Mean squared error between log-amplitude spectra.
inline double amplitude_loss(const FrameTensor& pred, const FrameTensor& target) {
  detail::require_same_shape(pred, target, "amplitude_loss");
  if (pred.values.empty()) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < pred.values.size(); ++i) {
    const double d = static_cast<double>(pred.values[i]) - target.values[i];
    s += d * d;
  }
  return s / static_cast<double>(pred.values.size());
}

struct PhaseLossParts {
  double instantaneous = 0.0;   // IP
  double group_delay = 0.0;     // GD, difference along frequency
  double inst_frequency = 0.0;  // IAF, difference along time
  double total() const { return instantaneous + group_delay + inst_frequency; }
};

inline PhaseLossParts phase_loss_parts(const FrameTensor& pred, const FrameTensor& target) {
  detail::require_same_shape(pred, target, "phase_loss");
  const std::size_t T = pred.frames, F = pred.channels;
  const auto delta = [&](std::size_t t, std::size_t f) {
    return static_cast<double>(pred.at(t, f)) - static_cast<double>(target.at(t, f));
  };
  PhaseLossParts p;
  double ip = 0, gd = 0, iaf = 0;
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t f = 0; f < F; ++f) {
      ip += anti_wrap(delta(t, f));
      if (f + 1 < F) gd += anti_wrap(delta(t, f + 1) - delta(t, f));
      if (t + 1 < T) iaf += anti_wrap(delta(t + 1, f) - delta(t, f));
    }
  }
  if (T * F > 0) p.instantaneous = ip / static_cast<double>(T * F);
  if (T > 0 && F > 1) p.group_delay = gd / static_cast<double>(T * (F - 1));
  if (T > 1 && F > 0) p.inst_frequency = iaf / static_cast<double>((T - 1) * F);
  return p;
}

inline double phase_loss(const FrameTensor& pred, const FrameTensor& target) {
  return phase_loss_parts(pred, target).total();
}

// MSE of real parts plus MSE of imaginary parts between the predicted complex
// spectrum exp(logA) e^{i phi} and the STFT of the target waveform.
inline double stft_loss(const SpectralPair& pred, std::span<const float> target_wave, const SpectralConfig& cfg) {
  const auto target = stft(target_wave, cfg);
  detail::require_same_shape(pred.log_amplitude, target.amplitude, "stft_loss");
  detail::require_same_shape(pred.phase, target.phase, "stft_loss");
  const std::size_t n = target.amplitude.values.size();
  if (n == 0) return 0.0;
  double re = 0.0, im = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double pa = std::exp(static_cast<double>(pred.log_amplitude.values[i]));
    const double pp = pred.phase.values[i];
    const double ta = target.amplitude.values[i];
    const double tp = target.phase.values[i];
    const double dr = pa * std::cos(pp) - ta * std::cos(tp);
    const double di = pa * std::sin(pp) - ta * std::sin(tp);
    re += dr * dr;
    im += di * di;
  }
  return re / static_cast<double>(n) + im / static_cast<double>(n);
}

// Mel reconstruction term: mean |mel(pred) - mel(target)| over the common
// length.
inline double waveform_loss(std::span<const float> pred_wave, std::span<const float> target_wave,
                            const SpectralConfig& cfg) {
  const std::size_t n = std::min(pred_wave.size(), target_wave.size());
  if (n == 0) return 0.0;
  const auto a = extract_mel(pred_wave.first(n), cfg);
  const auto b = extract_mel(target_wave.first(n), cfg);
  return detail::mean_abs_diff(a.values, b.values);
}

// Blocks are numbered 1..K.
using BlockSet = std::set<std::size_t>;

inline BlockSet first_blocks(std::size_t n) {
  BlockSet s;
  for (std::size_t k = 1; k <= n; ++k) s.insert(k);
  return s;
}

// L1 feature distillation: per branch, mean |teacher - student| after the
// input convolution plus the same term for every active block; branches summed.
inline double kd_loss(const FeatureTrace& teacher, const FeatureTrace& student, const BlockSet& active_blocks) {
  double total = 0.0;
  for (Branch b : {Branch::amplitude, Branch::phase}) {
    const auto& tb = teacher.branch(b);
    const auto& sb = student.branch(b);
    const std::string p = branch_prefix(b);
    if (tb.block_outs.size() != sb.block_outs.size()) {
      throw InvalidArgument("kd_loss: teacher has " + std::to_string(tb.block_outs.size()) + " " + p +
                            " blocks, student has " + std::to_string(sb.block_outs.size()));
    }
    detail::require_same_shape(tb.input_conv_out, sb.input_conv_out, "kd_loss " + p + ".input_conv");
    total += detail::mean_abs_diff(tb.input_conv_out, sb.input_conv_out);
    for (std::size_t k : active_blocks) {
      if (k == 0 || k > tb.block_outs.size()) {
        throw InvalidArgument("kd_loss: block " + std::to_string(k) + " outside 1.." +
                              std::to_string(tb.block_outs.size()));
      }
      detail::require_same_shape(tb.block_outs[k - 1], sb.block_outs[k - 1],
                                 "kd_loss " + block_prefix(b, k - 1));
      total += detail::mean_abs_diff(tb.block_outs[k - 1], sb.block_outs[k - 1]);
    }
  }
  return total;
}

struct LossWeights {
  double lambda_A = 45.0;
  double lambda_P = 100.0;
  double lambda_S = 1.0;
  double lambda_W = 1.0;
  double lambda_KD = 5.0;
};

struct LossBreakdown {
  double L_A = 0, L_P = 0, L_S = 0, L_W = 0, L_KD = 0;
  double total = 0;
};

inline LossBreakdown total_loss(LossBreakdown parts, const LossWeights& w) {
  for (double v : {parts.L_A, parts.L_P, parts.L_S, parts.L_W, parts.L_KD}) {
    if (!(v >= 0.0)) throw InvalidArgument("total_loss: loss components must be non-negative");
  }
  for (double v : {w.lambda_A, w.lambda_P, w.lambda_S, w.lambda_W, w.lambda_KD}) {
    if (!(v >= 0.0)) throw InvalidArgument("total_loss: weights must be non-negative");
  }
  parts.total = w.lambda_A * parts.L_A + w.lambda_P * parts.L_P + w.lambda_S * parts.L_S +
                w.lambda_W * parts.L_W + w.lambda_KD * parts.L_KD;
  return parts;
}

}  // namespace dllap
