#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "dllap/archive.hpp"
#include "dllap/io.hpp"
#include "dllap/metrics.hpp"
#include "dllap/model.hpp"
#include "dllap/streaming.hpp"

namespace dllap {

struct PropertyResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

// Deterministic pseudo-random log-mel input in [-3, 2).
inline MelSpectrogram random_mel(std::size_t frames, std::size_t mels, std::uint64_t seed) {
  MelSpectrogram m{FrameTensor(frames, mels)};
  for (std::size_t i = 0; i < m.values.values.size(); ++i) {
    m.values.values[i] = -3.0f + 5.0f * counter_uniform(seed ^ 0x6D656CULL, i, 1.0);
  }
  return m;
}

// Deterministic white noise in [-amplitude, amplitude).
inline std::vector<float> random_wave(std::size_t n, std::uint64_t seed, double amplitude = 0.5) {
  std::vector<float> w(n);
  for (std::size_t i = 0; i < n; ++i) w[i] = counter_uniform(seed ^ 0x776176ULL, i, amplitude);
  return w;
}

inline double max_abs_diff(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) return INFINITY;
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(static_cast<double>(a[i]) - b[i]));
  return m;
}

inline double max_trace_diff(const FeatureTrace& a, const FeatureTrace& b) {
  double m = 0.0;
  for (Branch br : {Branch::amplitude, Branch::phase}) {
    const auto& x = a.branch(br);
    const auto& y = b.branch(br);
    if (x.block_outs.size() != y.block_outs.size()) return INFINITY;
    m = std::max(m, max_abs_diff(x.input_conv_out.values, y.input_conv_out.values));
    for (std::size_t k = 0; k < x.block_outs.size(); ++k) {
      m = std::max(m, max_abs_diff(x.block_outs[k].values, y.block_outs[k].values));
    }
  }
  return m;
}

// Copy of `mel` with every frame after `t` replaced by fresh random values.
inline MelSpectrogram perturb_after(const MelSpectrogram& mel, std::size_t t, std::uint64_t seed) {
  MelSpectrogram p = mel;
  const auto noise = random_mel(mel.frames(), mel.mels(), seed);
  for (std::size_t i = (t + 1) * mel.mels(); i < p.values.values.size(); ++i) p.values.values[i] = noise.values.values[i];
  return p;
}

// The self-check suite behind `verify`: causality of the streaming engine,
// streaming == batch, batch prefix stability, and the persistence and
// spectral round trips.
inline std::vector<PropertyResult> run_property_checks(const ModelConfig& cfg, std::uint64_t seed, std::size_t frames) {
  std::vector<PropertyResult> out;
  const auto weights = random_init(cfg, seed);
  const auto model = std::make_shared<const Vocoder>(weights, cfg);
  const auto mel = random_mel(frames, cfg.n_mels(), seed + 1);
  const auto& sc = cfg.spectral;

  std::string stream_error;
  try {
    require_streamable(cfg);
  } catch (const UnsupportedConfiguration& e) {
    stream_error = e.what();
  }

  if (!stream_error.empty()) {
    out.push_back({"causality", false, stream_error});
    out.push_back({"streaming_equals_batch", false, stream_error});
  } else {
    auto st = stream_init(model);
    const auto base = stream_synthesize(st, mel);
    bool ok = true;
    std::string detail;
    for (std::size_t probe = 0; probe < 3 && frames > 1; ++probe) {
      const std::size_t t = (frames - 1) * (probe + 1) / 4;
      auto st2 = stream_init(model);
      const auto alt = stream_synthesize(st2, perturb_after(mel, t, seed + 100 + probe));
      const std::size_t fixed = (t + 1) * sc.hop;
      if (!std::equal(base.begin(), base.begin() + static_cast<std::ptrdiff_t>(fixed), alt.begin())) {
        ok = false;
        detail = "perturbing frames after " + std::to_string(t) + " changed earlier samples";
      }
    }
    out.push_back({"causality", ok, detail});

    FeatureTrace stream_trace;
    auto st3 = stream_init(model);
    const auto streamed = align_stream_to_batch(stream_synthesize(st3, mel, &stream_trace), frames, sc);
    const auto batch = model->forward(mel);
    const auto batch_wave = Vocoder::spectra_to_wave(batch.spectra, sc);
    const double dw = max_abs_diff(streamed, batch_wave);
    const double df = max_trace_diff(stream_trace, batch.trace);
    out.push_back({"streaming_equals_batch", dw <= 1e-4 && df <= 1e-5,
                   "max_sample_diff=" + std::to_string(dw) + " max_feature_diff=" + std::to_string(df)});
  }

  {
    const std::size_t cut = frames / 2;
    MelSpectrogram head{mel.values.head(cut)};
    const auto full = model->forward(mel);
    const auto part = model->forward(head);
    const bool ok = part.spectra.log_amplitude == full.spectra.log_amplitude.head(cut) &&
                    part.spectra.phase == full.spectra.phase.head(cut);
    out.push_back({"batch_prefix", ok || !cfg.causal,
                   cfg.causal ? "" : "non-causal configuration: prefix property not expected"});
  }

  {
    const auto bytes = encode_archive(weights);
    const auto back = decode_archive(bytes);
    out.push_back({"archive_round_trip", back == weights && encode_archive(back) == bytes, ""});
  }

  {
    const auto wave = random_wave(sc.sample_rate, seed + 2);
    const double snr = snr_db(wave, copy_synthesize(wave, sc));
    out.push_back({"spectral_round_trip", snr >= 60.0, "snr_db=" + std::to_string(snr)});
  }
  return out;
}

}  // namespace dllap
