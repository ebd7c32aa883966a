#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

#include "dllap/error.hpp"
#include "dllap/spectral.hpp"

namespace dllap {

inline constexpr double kSnrCapDb = 100.0;

inline double snr_db(std::span<const float> ref, std::span<const float> deg) {
  if (ref.size() != deg.size()) throw InvalidArgument("snr_db: signals differ in length");
  double sig = 0.0, err = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    const double r = ref[i], e = r - static_cast<double>(deg[i]);
    sig += r * r;
    err += e * e;
  }
  if (sig == 0.0) throw InvalidArgument("snr_db: reference is all zeros");
  if (err < 1e-10 * sig) return kSnrCapDb;
  return std::min(kSnrCapDb, 10.0 * std::log10(sig / err));
}

inline double las_rmse_db(std::span<const float> ref, std::span<const float> deg, const SpectralConfig& cfg) {
  const std::size_t n = std::min(ref.size(), deg.size());
  if (n == 0) return 0.0;
  const auto a = stft(ref.first(n), cfg);
  const auto b = stft(deg.first(n), cfg);
  double s = 0.0;
  for (std::size_t i = 0; i < a.amplitude.values.size(); ++i) {
    const double d = 20.0 * std::log10(a.amplitude.values[i] + 1e-5) - 20.0 * std::log10(b.amplitude.values[i] + 1e-5);
    s += d * d;
  }
  return std::sqrt(s / static_cast<double>(a.amplitude.values.size()));
}

inline constexpr std::size_t kMcdOrder = 12;

// Orthonormal DCT-II coefficients 0..count-1 of one frame.
inline std::vector<double> dct2_orthonormal(std::span<const float> x, std::size_t count) {
  const std::size_t n = x.size();
  std::vector<double> c(count, 0.0);
  for (std::size_t k = 0; k < count; ++k) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      s += x[i] * std::cos(std::numbers::pi * static_cast<double>(k) * (2.0 * static_cast<double>(i) + 1.0) /
                           (2.0 * static_cast<double>(n)));
    }
    c[k] = s * std::sqrt((k == 0 ? 1.0 : 2.0) / static_cast<double>(n));
  }
  return c;
}

// Mel-cepstral distortion between aligned log-mel sequences, c0 excluded.
inline double mcd_from_mel(const MelSpectrogram& a, const MelSpectrogram& b) {
  const std::size_t frames = std::min(a.frames(), b.frames());
  if (frames == 0) return 0.0;
  const double k = 10.0 * std::numbers::sqrt2 / std::numbers::ln10;
  double sum = 0.0;
  for (std::size_t t = 0; t < frames; ++t) {
    const auto ca = dct2_orthonormal(a.values.frame(t), kMcdOrder + 1);
    const auto cb = dct2_orthonormal(b.values.frame(t), kMcdOrder + 1);
    double d2 = 0.0;
    for (std::size_t i = 1; i <= kMcdOrder; ++i) d2 += (ca[i] - cb[i]) * (ca[i] - cb[i]);
    sum += std::sqrt(d2);
  }
  return k * sum / static_cast<double>(frames);
}

inline double mcd_db(std::span<const float> ref, std::span<const float> deg, const SpectralConfig& cfg) {
  const std::size_t n = std::min(ref.size(), deg.size());
  if (n == 0) return 0.0;
  return mcd_from_mel(extract_mel(ref.first(n), cfg), extract_mel(deg.first(n), cfg));
}

struct F0Frame {
  std::optional<double> f0_hz;  // nullopt when unvoiced
};

struct F0TrackerConfig {
  double window_s = 0.040;
  double hop_s = 0.010;
  double f0_min = 65.0;
  double f0_max = 400.0;
  double voicing_threshold = 0.3;
  // Shortest-lag peak within this fraction of the strongest one wins.
  double octave_tolerance = 0.9;
};

// Normalized-autocorrelation pitch tracker with parabolic peak refinement.
inline std::vector<F0Frame> f0_track(std::span<const float> wave, const SpectralConfig& cfg,
                                     const F0TrackerConfig& tc = {}) {
  const double sr = static_cast<double>(cfg.sample_rate);
  const auto win = static_cast<std::size_t>(std::lround(tc.window_s * sr));
  const auto hop = static_cast<std::size_t>(std::lround(tc.hop_s * sr));
  const auto min_lag = static_cast<std::size_t>(std::floor(sr / tc.f0_max));
  const auto max_lag = static_cast<std::size_t>(std::ceil(sr / tc.f0_min));
  if (max_lag + 2 >= win) throw InvalidArgument("f0_track: analysis window shorter than the longest period");

  std::vector<F0Frame> frames;
  std::vector<double> r(max_lag + 2, 0.0);
  for (std::size_t start = 0; start + win <= wave.size(); start += hop) {
    const float* x = wave.data() + start;
    double energy = 0.0;
    for (std::size_t i = 0; i < win; ++i) energy += static_cast<double>(x[i]) * x[i];
    F0Frame fr;
    if (energy > 1e-10) {
      for (std::size_t lag = min_lag - 1; lag <= max_lag + 1; ++lag) {
        double xy = 0.0, xx = 0.0, yy = 0.0;
        for (std::size_t i = 0; i + lag < win; ++i) {
          const double a = x[i], b = x[i + lag];
          xy += a * b;
          xx += a * a;
          yy += b * b;
        }
        r[lag] = (xx > 0.0 && yy > 0.0) ? xy / std::sqrt(xx * yy) : 0.0;
      }
      std::size_t best = 0;
      double best_r = -1.0;
      for (std::size_t lag = min_lag; lag <= max_lag; ++lag) {
        const bool peak = r[lag] >= r[lag - 1] && r[lag] >= r[lag + 1];
        if (peak && r[lag] > best_r) {
          best_r = r[lag];
          best = lag;
        }
      }
      for (std::size_t lag = min_lag; lag < best; ++lag) {
        const bool peak = r[lag] >= r[lag - 1] && r[lag] >= r[lag + 1];
        if (peak && r[lag] >= tc.octave_tolerance * best_r) {
          best = lag;
          break;
        }
      }
      if (best != 0 && best_r >= tc.voicing_threshold) {
        const double a = r[best - 1], b = r[best], c = r[best + 1];
        const double denom = a - 2.0 * b + c;
        const double shift = denom != 0.0 ? std::clamp(0.5 * (a - c) / denom, -0.5, 0.5) : 0.0;
        fr.f0_hz = sr / (static_cast<double>(best) + shift);
      }
    }
    frames.push_back(fr);
  }
  return frames;
}

inline double f0_rmse_cents(std::span<const float> ref, std::span<const float> deg, const SpectralConfig& cfg) {
  const auto a = f0_track(ref, cfg);
  const auto b = f0_track(deg, cfg);
  const std::size_t n = std::min(a.size(), b.size());
  double s = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (a[i].f0_hz && b[i].f0_hz) {
      const double c = 1200.0 * std::log2(*b[i].f0_hz / *a[i].f0_hz);
      s += c * c;
      ++count;
    }
  }
  return count ? std::sqrt(s / static_cast<double>(count)) : 0.0;
}

inline double vuv_error_pct(std::span<const float> ref, std::span<const float> deg, const SpectralConfig& cfg) {
  const auto a = f0_track(ref, cfg);
  const auto b = f0_track(deg, cfg);
  const std::size_t n = std::min(a.size(), b.size());
  if (n == 0) return 0.0;
  std::size_t diff = 0;
  for (std::size_t i = 0; i < n; ++i) diff += a[i].f0_hz.has_value() != b[i].f0_hz.has_value();
  return 100.0 * static_cast<double>(diff) / static_cast<double>(n);
}

struct MetricReport {
  double snr_db = 0;
  double las_rmse_db = 0;
  double mcd_db = 0;
  double f0_rmse_cents = 0;
  double vuv_error_pct = 0;
};

// Signals are truncated to their common length.
inline MetricReport evaluate_metrics(std::span<const float> ref, std::span<const float> deg, const SpectralConfig& cfg) {
  const std::size_t n = std::min(ref.size(), deg.size());
  const auto r = ref.first(n), d = deg.first(n);
  MetricReport m;
  m.snr_db = snr_db(r, d);
  m.las_rmse_db = las_rmse_db(r, d, cfg);
  m.mcd_db = mcd_db(r, d, cfg);
  m.f0_rmse_cents = f0_rmse_cents(r, d, cfg);
  m.vuv_error_pct = vuv_error_pct(r, d, cfg);
  return m;
}

}  // namespace dllap
