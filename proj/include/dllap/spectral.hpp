#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "dllap/error.hpp"
#include "dllap/fft.hpp"
#include "dllap/tensor.hpp"

namespace dllap {

struct SpectralConfig {
  std::size_t sample_rate = 16000;
  std::size_t n_fft = 1024;
  std::size_t frame_len = 320;
  std::size_t hop = 80;
  std::size_t n_mels = 80;
  double fmin = 0.0;
  double fmax = 8000.0;
  double log_floor = 1e-5;

  std::size_t n_bins() const { return n_fft / 2 + 1; }
  double frames_per_second() const {
    return static_cast<double>(sample_rate) / static_cast<double>(hop);
  }

  void validate() const {
    if (hop == 0 || hop > frame_len || frame_len > n_fft) {
      throw InvalidArgument("SpectralConfig: require 0 < hop <= frame_len <= n_fft");
    }
    if (frame_len % hop != 0) throw InvalidArgument("SpectralConfig: frame_len must be a multiple of hop");
    if (n_fft % 2 != 0) throw InvalidArgument("SpectralConfig: n_fft must be even");
    if (n_mels == 0) throw InvalidArgument("SpectralConfig: n_mels must be >= 1");
    if (sample_rate == 0) throw InvalidArgument("SpectralConfig: sample_rate must be > 0");
    if (fmin < 0.0 || fmax > static_cast<double>(sample_rate) / 2.0) {
      throw InvalidArgument("SpectralConfig: require 0 <= fmin and fmax <= sample_rate/2");
    }
    if (!(log_floor > 0.0)) throw InvalidArgument("SpectralConfig: log_floor must be > 0");
  }

  bool operator==(const SpectralConfig&) const = default;
};

// amplitude >= 0, phase in (-pi, pi]; both [frames x n_bins].
struct ComplexSpectrogram {
  FrameTensor amplitude;
  FrameTensor phase;

  std::size_t frames() const { return amplitude.frames; }
  std::size_t bins() const { return amplitude.channels; }
};

// Natural-log mel energies, [frames x n_mels].
struct MelSpectrogram {
  FrameTensor values;

  std::size_t frames() const { return values.frames; }
  std::size_t mels() const { return values.channels; }
  bool operator==(const MelSpectrogram&) const = default;
};

inline constexpr float kPiF = std::numbers::pi_v<float>;

// Narrows a double-precision angle to float, keeping the result in (-pi, pi]
// as seen in float arithmetic.
inline float to_phase(double angle) {
  auto f = static_cast<float>(angle);
  if (f <= -kPiF) f = kPiF;
  return f;
}

// Periodic Hann window.
inline std::vector<double> make_window(std::size_t length) {
  if (length == 0) throw InvalidArgument("make_window: length must be >= 1");
  std::vector<double> w(length);
  const double step = 2.0 * std::numbers::pi / static_cast<double>(length);
  for (std::size_t n = 0; n < length; ++n) {
    w[n] = 0.5 * (1.0 - std::cos(step * static_cast<double>(n)));
  }
  return w;
}

inline std::size_t stft_frame_count(std::size_t n_samples, const SpectralConfig& cfg) {
  return n_samples / cfg.hop + 1;
}

namespace detail {

// Mirror an out-of-range index back into [0, n) without repeating the edge
// sample (numpy "reflect"), folding repeatedly for very short signals.
inline std::size_t reflect_index(std::ptrdiff_t i, std::size_t n) {
  if (n == 1) return 0;
  const auto period = static_cast<std::ptrdiff_t>(2 * (n - 1));
  std::ptrdiff_t m = i % period;
  if (m < 0) m += period;
  if (m >= static_cast<std::ptrdiff_t>(n)) m = period - m;
  return static_cast<std::size_t>(m);
}

}  // namespace detail

inline ComplexSpectrogram stft(std::span<const float> wave, const SpectralConfig& cfg) {
  cfg.validate();
  if (wave.empty()) throw InvalidArgument("stft: waveform must contain at least one sample");
  const std::size_t n = wave.size();
  const std::size_t frames = stft_frame_count(n, cfg);
  const std::size_t bins = cfg.n_bins();
  const auto pad = static_cast<std::ptrdiff_t>(cfg.frame_len / 2);
  const auto window = make_window(cfg.frame_len);

  RealFft fft(cfg.n_fft);
  std::vector<double> buf(cfg.n_fft, 0.0);
  std::vector<std::complex<double>> spec(bins);
  ComplexSpectrogram out{FrameTensor(frames, bins), FrameTensor(frames, bins)};

  for (std::size_t t = 0; t < frames; ++t) {
    const auto start = static_cast<std::ptrdiff_t>(t * cfg.hop) - pad;
    std::fill(buf.begin(), buf.end(), 0.0);
    for (std::size_t j = 0; j < cfg.frame_len; ++j) {
      const auto src = detail::reflect_index(start + static_cast<std::ptrdiff_t>(j), n);
      buf[j] = static_cast<double>(wave[src]) * window[j];
    }
    fft.forward(buf, spec);
    for (std::size_t k = 0; k < bins; ++k) {
      out.amplitude.at(t, k) = static_cast<float>(std::abs(spec[k]));
      out.phase.at(t, k) = to_phase(std::arg(spec[k]));
    }
  }
  return out;
}

// Turns one (amplitude, phase) frame into a synthesis-windowed time frame of
// frame_len samples. Shared by batch iSTFT and the streaming emitter so both
// produce identical per-frame arithmetic. One instance per thread.
class FrameSynthesizer {
 public:
  explicit FrameSynthesizer(const SpectralConfig& cfg)
      : cfg_(cfg), window_(make_window(cfg.frame_len)), fft_(cfg.n_fft),
        spec_(cfg.n_bins()), time_(cfg.n_fft) {}

  const std::vector<double>& window() const { return window_; }

  void synthesize(std::span<const float> amplitude, std::span<const float> phase,
                  std::span<double> out) {
    for (std::size_t k = 0; k < spec_.size(); ++k) {
      spec_[k] = std::polar(static_cast<double>(amplitude[k]), static_cast<double>(phase[k]));
    }
    // A real signal has purely real DC and Nyquist bins.
    spec_.front() = {spec_.front().real(), 0.0};
    spec_.back() = {spec_.back().real(), 0.0};
    fft_.inverse(spec_, time_);
    for (std::size_t j = 0; j < cfg_.frame_len; ++j) out[j] = time_[j] * window_[j];
  }

 private:
  SpectralConfig cfg_;
  std::vector<double> window_;
  RealFft fft_;
  std::vector<std::complex<double>> spec_;
  std::vector<double> time_;
};

inline constexpr double kEnvelopeFloor = 1e-8;

inline std::vector<float> istft_batch(const ComplexSpectrogram& spec, const SpectralConfig& cfg,
                                      std::size_t out_len) {
  cfg.validate();
  const std::size_t bins = cfg.n_bins();
  if (spec.amplitude.channels != bins || spec.phase.channels != bins ||
      spec.amplitude.frames != spec.phase.frames) {
    throw InvalidArgument("istft_batch: spectrogram must be [T x " + std::to_string(bins) +
                          "] for both amplitude and phase");
  }
  const std::size_t frames = spec.frames();
  if (frames == 0) {
    if (out_len != 0) throw InvalidArgument("istft_batch: empty spectrogram");
    return {};
  }
  const std::size_t total = (frames - 1) * cfg.hop + cfg.frame_len;
  if (out_len > total) {
    throw InvalidArgument("istft_batch: out_len exceeds (T-1)*hop + frame_len");
  }

  FrameSynthesizer synth(cfg);
  const auto& w = synth.window();
  std::vector<double> acc(total, 0.0);
  std::vector<double> env(total, 0.0);
  std::vector<double> frame(cfg.frame_len);
  for (std::size_t t = 0; t < frames; ++t) {
    synth.synthesize(spec.amplitude.frame(t), spec.phase.frame(t), frame);
    const std::size_t off = t * cfg.hop;
    for (std::size_t j = 0; j < cfg.frame_len; ++j) {
      acc[off + j] += frame[j];
      env[off + j] += w[j] * w[j];
    }
  }

  const std::size_t trim = cfg.frame_len / 2;
  std::vector<float> out(out_len, 0.0f);
  for (std::size_t i = 0; i < out_len && trim + i < total; ++i) {
    out[i] = static_cast<float>(acc[trim + i] / std::max(env[trim + i], kEnvelopeFloor));
  }
  return out;
}

// Analysis followed by resynthesis with no model in between.
inline std::vector<float> copy_synthesize(std::span<const float> wave, const SpectralConfig& cfg) {
  return istft_batch(stft(wave, cfg), cfg, wave.size());
}

inline double hz_to_mel_slaney(double hz) {
  constexpr double f_sp = 200.0 / 3.0;
  constexpr double min_log_hz = 1000.0;
  constexpr double min_log_mel = min_log_hz / f_sp;
  const double logstep = std::log(6.4) / 27.0;
  if (hz < min_log_hz) return hz / f_sp;
  return min_log_mel + std::log(hz / min_log_hz) / logstep;
}

inline double mel_to_hz_slaney(double mel) {
  constexpr double f_sp = 200.0 / 3.0;
  constexpr double min_log_hz = 1000.0;
  constexpr double min_log_mel = min_log_hz / f_sp;
  const double logstep = std::log(6.4) / 27.0;
  if (mel < min_log_mel) return mel * f_sp;
  return min_log_hz * std::exp(logstep * (mel - min_log_mel));
}

struct MelFilterbank {
  std::size_t n_mels = 0;
  std::size_t n_bins = 0;
  std::vector<double> weights;     // [n_mels x n_bins]
  std::vector<double> centers_hz;  // [n_mels]

  double at(std::size_t m, std::size_t k) const { return weights[m * n_bins + k]; }
};

// Slaney-scale triangles, each scaled by 2 / (upper edge - lower edge).
inline MelFilterbank mel_filterbank(const SpectralConfig& cfg) {
  if (!(cfg.fmax > cfg.fmin)) throw InvalidArgument("mel_filterbank: fmax must exceed fmin");
  cfg.validate();
  MelFilterbank fb;
  fb.n_mels = cfg.n_mels;
  fb.n_bins = cfg.n_bins();
  fb.weights.assign(fb.n_mels * fb.n_bins, 0.0);

  const double mel_lo = hz_to_mel_slaney(cfg.fmin);
  const double mel_hi = hz_to_mel_slaney(cfg.fmax);
  std::vector<double> edges(cfg.n_mels + 2);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    const double m = mel_lo + (mel_hi - mel_lo) * static_cast<double>(i) /
                                  static_cast<double>(cfg.n_mels + 1);
    edges[i] = mel_to_hz_slaney(m);
  }
  const double bin_hz = static_cast<double>(cfg.sample_rate) / static_cast<double>(cfg.n_fft);

  for (std::size_t m = 0; m < cfg.n_mels; ++m) {
    const double lo = edges[m], mid = edges[m + 1], hi = edges[m + 2];
    const double enorm = 2.0 / (hi - lo);
    bool any = false;
    for (std::size_t k = 0; k < fb.n_bins; ++k) {
      const double f = bin_hz * static_cast<double>(k);
      const double rise = (f - lo) / (mid - lo);
      const double fall = (hi - f) / (hi - mid);
      const double v = std::max(0.0, std::min(rise, fall)) * enorm;
      fb.weights[m * fb.n_bins + k] = v;
      any = any || v > 0.0;
    }
    if (!any) {
      throw InvalidArgument("mel_filterbank: filter " + std::to_string(m) +
                            " covers no FFT bin; reduce n_mels or increase n_fft");
    }
    fb.centers_hz.push_back(mid);
  }
  return fb;
}

// Log-mel from an amplitude spectrogram: ln(max(fb . amp, floor)).
inline MelSpectrogram amplitude_to_mel(const FrameTensor& amplitude, const MelFilterbank& fb,
                                       double log_floor) {
  if (amplitude.channels != fb.n_bins) throw InvalidArgument("amplitude_to_mel: bin count mismatch");
  MelSpectrogram mel{FrameTensor(amplitude.frames, fb.n_mels)};
  for (std::size_t t = 0; t < amplitude.frames; ++t) {
    const auto a = amplitude.frame(t);
    for (std::size_t m = 0; m < fb.n_mels; ++m) {
      double e = 0.0;
      const double* row = fb.weights.data() + m * fb.n_bins;
      for (std::size_t k = 0; k < fb.n_bins; ++k) e += row[k] * static_cast<double>(a[k]);
      mel.values.at(t, m) = static_cast<float>(std::log(std::max(e, log_floor)));
    }
  }
  return mel;
}

inline MelSpectrogram extract_mel(std::span<const float> wave, const SpectralConfig& cfg) {
  const auto spec = stft(wave, cfg);
  return amplitude_to_mel(spec.amplitude, mel_filterbank(cfg), cfg.log_floor);
}

}  // namespace dllap
