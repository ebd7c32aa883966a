#pragma once

#include <algorithm>
#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dllap/error.hpp"
#include "dllap/model.hpp"
#include "dllap/nn_ops.hpp"
#include "dllap/spectral.hpp"

namespace dllap {

// Future input frames a stride-1 symmetric convolution reads.
constexpr std::size_t zeta(std::size_t kernel, std::size_t dilation) {
  return (kernel - 1) * dilation / 2;
}

// nullopt means unbounded (a sequence-global statistic is present).
inline std::optional<std::size_t> lookahead_frames(const ModelConfig& cfg) {
  std::size_t worst = 0;
  for (Branch b : {Branch::amplitude, Branch::phase}) {
    std::size_t serial = 0, heads = 0;
    for (const auto& l : layer_graph(cfg)) {
      if (l.branch != b) continue;
      if (l.sequence_global) return std::nullopt;
      const std::size_t z = l.geometry.causal ? 0 : zeta(l.geometry.kernel, l.geometry.dilation);
      if (l.parallel_head) {
        heads = std::max(heads, z);
      } else {
        serial += z;
      }
    }
    worst = std::max(worst, serial + heads);
  }
  return worst;
}

struct LatencyReport {
  std::optional<std::size_t> lookahead_frames;
  std::optional<double> model_latency_ms;
  double ola_latency_ms = 0.0;
  std::optional<double> total_ms;
};

// Latency = lookahead * hop + (frame_len - hop) samples: the delay between the
// newest input frame arriving and the newest finalized output sample.
inline LatencyReport total_latency(const ModelConfig& cfg) {
  const auto& sc = cfg.spectral;
  const double ms_per_sample = 1000.0 / static_cast<double>(sc.sample_rate);
  LatencyReport r;
  r.lookahead_frames = lookahead_frames(cfg);
  r.ola_latency_ms = static_cast<double>(sc.frame_len - sc.hop) * ms_per_sample;
  if (r.lookahead_frames) {
    r.model_latency_ms = static_cast<double>(*r.lookahead_frames * sc.hop) * ms_per_sample;
    r.total_ms = static_cast<double>(*r.lookahead_frames * sc.hop + sc.frame_len - sc.hop) * ms_per_sample;
  }
  return r;
}

// Fixed-size history of the last (k-1)*d input frames of one causal layer.
class FrameHistory {
 public:
  FrameHistory() = default;
  FrameHistory(const ConvGeometry& g, std::size_t channels)
      : geometry_(g), channels_(channels), length_(g.span()), data_(length_ * channels, 0.0f) {}

  std::size_t length() const { return length_; }

  // Tap pointers for the frame `current`, ordered oldest first.
  void taps(const float* current, const float** out) const {
    for (std::size_t j = 0; j < geometry_.kernel; ++j) {
      const std::size_t lag = (geometry_.kernel - 1 - j) * geometry_.dilation;
      out[j] = lag == 0 ? current : data_.data() + ((next_ + length_ - lag) % length_) * channels_;
    }
  }

  void push(std::span<const float> frame) {
    if (length_ == 0) return;
    std::copy(frame.begin(), frame.end(), data_.begin() + static_cast<std::ptrdiff_t>(next_ * channels_));
    next_ = (next_ + 1) % length_;
  }

  void reset() {
    std::fill(data_.begin(), data_.end(), 0.0f);
    next_ = 0;
  }

  std::size_t bytes() const { return data_.size() * sizeof(float); }
  bool operator==(const FrameHistory&) const = default;

 private:
  ConvGeometry geometry_;
  std::size_t channels_ = 0;
  std::size_t length_ = 0;
  std::size_t next_ = 0;
  std::vector<float> data_;
};

struct BlockStreamState {
  FrameHistory dw_history;
  std::vector<double> grn_sumsq;
  bool operator==(const BlockStreamState&) const = default;
};

struct BranchStreamState {
  FrameHistory input_history;
  std::vector<BlockStreamState> blocks;
  FrameHistory head_history;
  bool operator==(const BranchStreamState&) const = default;
};

// Everything a running stream remembers. Single owner: one push/flush at a
// time; distinct states may share one Vocoder concurrently.
class StreamState {
 public:
  explicit StreamState(std::shared_ptr<const Vocoder> model)
      : model_(std::move(model)), synth_(model_->config().spectral) {
    const auto& cfg = model_->config();
    for (Branch b : {Branch::amplitude, Branch::phase}) {
      auto& st = branch(b);
      st.input_history = FrameHistory(cfg.io_geometry(), cfg.n_mels());
      st.blocks.assign(cfg.num_blocks,
                       BlockStreamState{FrameHistory(cfg.dw_geometry(), cfg.hidden),
                                        std::vector<double>(cfg.intermediate, 0.0)});
      st.head_history = FrameHistory(cfg.io_geometry(), cfg.hidden);
    }
    const auto& sc = cfg.spectral;
    ola_acc_.assign(sc.frame_len, 0.0);
    ola_env_.assign(sc.frame_len, 0.0);
    x_.resize(cfg.hidden);
    dw_.resize(cfg.hidden);
    norm_.resize(cfg.hidden);
    residual_.resize(cfg.hidden);
    inter_.resize(cfg.intermediate);
    inter2_.resize(cfg.intermediate);
    g_.resize(cfg.intermediate);
    frame_.resize(sc.frame_len);
    log_amp_.resize(cfg.n_bins());
    amp_lin_.resize(cfg.n_bins());
    real_.resize(cfg.n_bins());
    imag_.resize(cfg.n_bins());
    phase_.resize(cfg.n_bins());
    taps_.resize(std::max(cfg.kernel_io, cfg.kernel_dw));
  }

  const Vocoder& model() const { return *model_; }
  std::size_t frames_pushed() const { return frames_pushed_; }
  bool flushed() const { return flushed_; }

  // Bytes of per-stream memory; independent of how many frames were pushed.
  std::size_t state_bytes() const {
    std::size_t n = (ola_acc_.size() + ola_env_.size()) * sizeof(double);
    for (const auto* st : {&amp_, &pha_}) {
      n += st->input_history.bytes() + st->head_history.bytes();
      for (const auto& blk : st->blocks) n += blk.dw_history.bytes() + blk.grn_sumsq.size() * sizeof(double);
    }
    return n;
  }

  void reset() {
    for (auto* st : {&amp_, &pha_}) {
      st->input_history.reset();
      st->head_history.reset();
      for (auto& blk : st->blocks) {
        blk.dw_history.reset();
        std::fill(blk.grn_sumsq.begin(), blk.grn_sumsq.end(), 0.0);
      }
    }
    std::fill(ola_acc_.begin(), ola_acc_.end(), 0.0);
    std::fill(ola_env_.begin(), ola_env_.end(), 0.0);
    frames_pushed_ = 0;
    flushed_ = false;
  }

  // Runs one mel frame through both branches and returns the hop samples that
  // no later frame can still change.
  std::vector<float> push(std::span<const float> mel_frame, FeatureTrace* trace = nullptr) {
    const auto& cfg = model_->config();
    if (flushed_) throw InvalidState("stream_push_frame: stream already flushed");
    if (mel_frame.size() != cfg.n_mels()) {
      throw InvalidArgument("stream_push_frame: frame has " + std::to_string(mel_frame.size()) +
                            " values, expected " + std::to_string(cfg.n_mels()));
    }
    run_branch(Branch::amplitude, mel_frame, trace);
    for (std::size_t k = 0; k < log_amp_.size(); ++k) amp_lin_[k] = amplitude_from_log(log_amp_[k]);
    run_branch(Branch::phase, mel_frame, trace);
    for (std::size_t k = 0; k < phase_.size(); ++k) phase_[k] = phase_from_components(real_[k], imag_[k]);

    synth_.synthesize(amp_lin_, phase_, frame_);
    const auto& w = synth_.window();
    const std::size_t len = cfg.spectral.frame_len, hop = cfg.spectral.hop;
    for (std::size_t j = 0; j < len; ++j) {
      ola_acc_[j] += frame_[j];
      ola_env_[j] += w[j] * w[j];
    }
    std::vector<float> out(hop);
    for (std::size_t i = 0; i < hop; ++i) {
      out[i] = static_cast<float>(ola_acc_[i] / std::max(ola_env_[i], kEnvelopeFloor));
    }
    std::copy(ola_acc_.begin() + static_cast<std::ptrdiff_t>(hop), ola_acc_.end(), ola_acc_.begin());
    std::copy(ola_env_.begin() + static_cast<std::ptrdiff_t>(hop), ola_env_.end(), ola_env_.begin());
    std::fill(ola_acc_.end() - static_cast<std::ptrdiff_t>(hop), ola_acc_.end(), 0.0);
    std::fill(ola_env_.end() - static_cast<std::ptrdiff_t>(hop), ola_env_.end(), 0.0);
    ++frames_pushed_;
    return out;
  }

  // Emits the overlap-add tail (frame_len - hop samples) and ends the stream.
  std::vector<float> flush() {
    if (flushed_) throw InvalidState("stream_flush: stream already flushed");
    flushed_ = true;
    if (frames_pushed_ == 0) return {};
    const auto& sc = model_->config().spectral;
    std::vector<float> out(sc.frame_len - sc.hop);
    for (std::size_t i = 0; i < out.size(); ++i) {
      out[i] = static_cast<float>(ola_acc_[i] / std::max(ola_env_[i], kEnvelopeFloor));
    }
    return out;
  }

  bool operator==(const StreamState& o) const {
    return model_->config() == o.model_->config() && amp_ == o.amp_ && pha_ == o.pha_ &&
           ola_acc_ == o.ola_acc_ && ola_env_ == o.ola_env_ && frames_pushed_ == o.frames_pushed_ &&
           flushed_ == o.flushed_;
  }

 private:
  BranchStreamState& branch(Branch b) { return b == Branch::amplitude ? amp_ : pha_; }

  static void append_row(FrameTensor& t, std::span<const float> row) {
    if (t.frames == 0) t.channels = row.size();
    t.values.insert(t.values.end(), row.begin(), row.end());
    ++t.frames;
  }

  void run_branch(Branch b, std::span<const float> mel_frame, FeatureTrace* trace) {
    const auto& cfg = model_->config();
    const auto& bw = model_->branch(b);
    auto& st = branch(b);
    float* outs[1];

    st.input_history.taps(mel_frame.data(), taps_.data());
    outs[0] = x_.data();
    bw.input_conv.apply<1>(taps_.data(), outs);
    st.input_history.push(mel_frame);
    BranchTrace* bt = trace ? &trace->branch(b) : nullptr;
    if (bt) {
      if (bt->block_outs.size() != cfg.num_blocks) bt->block_outs.resize(cfg.num_blocks);
      append_row(bt->input_conv_out, x_);
    }

    for (std::size_t k = 0; k < cfg.num_blocks; ++k) {
      const auto& w = bw.blocks[k];
      auto& bs = st.blocks[k];
      bs.dw_history.taps(x_.data(), taps_.data());
      w.dwconv.apply(taps_.data(), dw_.data());
      bs.dw_history.push(x_);
      layer_norm_frame(dw_, w.norm_gamma, w.norm_beta, kNormEps, norm_);
      const float* in[1] = {norm_.data()};
      outs[0] = inter_.data();
      w.pwconv1.apply<1>(in, outs);
      gelu_inplace(inter_);
      accumulate_sumsq(inter_, bs.grn_sumsq, g_);
      grn_frame(inter_, g_, w.grn_gamma, w.grn_beta, kNormEps, inter2_);
      const float* in2[1] = {inter2_.data()};
      outs[0] = residual_.data();
      w.pwconv2.apply<1>(in2, outs);
      for (std::size_t c = 0; c < x_.size(); ++c) x_[c] = x_[c] + residual_[c];
      if (bt) append_row(bt->block_outs[k], x_);
    }

    st.head_history.taps(x_.data(), taps_.data());
    if (b == Branch::amplitude) {
      outs[0] = log_amp_.data();
      bw.heads[0].apply<1>(taps_.data(), outs);
    } else {
      outs[0] = real_.data();
      bw.heads[0].apply<1>(taps_.data(), outs);
      outs[0] = imag_.data();
      bw.heads[1].apply<1>(taps_.data(), outs);
    }
    st.head_history.push(x_);
  }

  std::shared_ptr<const Vocoder> model_;
  BranchStreamState amp_, pha_;
  std::vector<double> ola_acc_, ola_env_;
  std::size_t frames_pushed_ = 0;
  bool flushed_ = false;

  // Scratch, not part of the logical state.
  FrameSynthesizer synth_;
  std::vector<float> x_, dw_, norm_, residual_, inter_, inter2_, log_amp_, amp_lin_, real_, imag_, phase_;
  std::vector<double> g_, frame_;
  std::vector<const float*> taps_;
};

// Throws UnsupportedConfiguration naming the first layer that needs future
// frames.
inline void require_streamable(const ModelConfig& cfg) {
  cfg.validate();
  if (cfg.grn_mode == GrnMode::global) {
    throw UnsupportedConfiguration(
        "streaming requires zero lookahead: grn_mode=global uses a sequence-global statistic");
  }
  for (const auto& l : layer_graph(cfg)) {
    if (!l.geometry.causal && zeta(l.geometry.kernel, l.geometry.dilation) > 0) {
      throw UnsupportedConfiguration("streaming requires zero lookahead: layer " + l.name +
                                     " is a non-causal convolution");
    }
  }
}

inline StreamState stream_init(std::shared_ptr<const Vocoder> model) {
  require_streamable(model->config());
  return StreamState(std::move(model));
}

inline StreamState stream_init(const WeightArchive& weights, const ModelConfig& cfg) {
  require_streamable(cfg);
  return StreamState(std::make_shared<const Vocoder>(weights, cfg));
}

inline std::vector<float> stream_push_frame(StreamState& state, std::span<const float> mel_frame,
                                            FeatureTrace* trace = nullptr) {
  return state.push(mel_frame, trace);
}

inline std::vector<float> stream_flush(StreamState& state) { return state.flush(); }

inline void stream_reset(StreamState& state) { state.reset(); }

// Pushes every frame then flushes; output is the uncentred stream of
// T*hop + (frame_len - hop) samples.
inline std::vector<float> stream_synthesize(StreamState& state, const MelSpectrogram& mel,
                                            FeatureTrace* trace = nullptr) {
  std::vector<float> out;
  for (std::size_t t = 0; t < mel.frames(); ++t) {
    auto chunk = state.push(mel.values.frame(t), trace);
    out.insert(out.end(), chunk.begin(), chunk.end());
  }
  auto tail = state.flush();
  out.insert(out.end(), tail.begin(), tail.end());
  return out;
}

// Aligns an uncentred stream with synthesize_batch output for `frames` frames.
inline std::vector<float> align_stream_to_batch(std::span<const float> stream, std::size_t frames,
                                                const SpectralConfig& sc) {
  if (frames == 0) return {};
  const std::size_t start = sc.frame_len / 2;
  const std::size_t len = (frames - 1) * sc.hop;
  if (stream.size() < start + len) throw InvalidArgument("align_stream_to_batch: stream too short");
  std::vector<float> out(len);
  std::copy_n(stream.data() + start, len, out.data());
  return out;
}

}  // namespace dllap
