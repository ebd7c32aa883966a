#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dllap/archive.hpp"
#include "dllap/error.hpp"
#include "dllap/kernels.hpp"
#include "dllap/nn_ops.hpp"
#include "dllap/spectral.hpp"
#include "dllap/tensor.hpp"

namespace dllap {

inline constexpr double kNormEps = 1e-6;

struct ModelConfig {
  SpectralConfig spectral;
  std::size_t hidden = 512;
  std::size_t intermediate = 1536;
  std::size_t num_blocks = 8;
  std::size_t kernel_io = 7;
  std::size_t kernel_dw = 7;
  std::size_t dilation = 1;
  bool causal = true;
  GrnMode grn_mode = GrnMode::causal_cumulative;

  std::size_t n_mels() const { return spectral.n_mels; }
  std::size_t n_bins() const { return spectral.n_bins(); }

  ConvGeometry io_geometry() const { return {kernel_io, dilation, causal}; }
  ConvGeometry dw_geometry() const { return {kernel_dw, dilation, causal}; }

  void validate() const {
    spectral.validate();
    if (hidden == 0) throw InvalidArgument("ModelConfig: hidden must be >= 1");
    if (intermediate < hidden) throw InvalidArgument("ModelConfig: intermediate must be >= hidden");
    if (kernel_io == 0 || kernel_dw == 0 || dilation == 0) {
      throw InvalidArgument("ModelConfig: kernels and dilation must be >= 1");
    }
    if (causal && grn_mode == GrnMode::global) {
      throw InvalidArgument("ModelConfig: causal=true requires grn_mode=causal_cumulative");
    }
  }

  bool operator==(const ModelConfig&) const = default;
};

enum class Branch { amplitude, phase };

inline const char* branch_prefix(Branch b) { return b == Branch::amplitude ? "amp" : "pha"; }

inline std::string block_prefix(Branch b, std::size_t block) {
  return std::string(branch_prefix(b)) + ".blocks." + std::to_string(block);
}

// Output heads of a branch: one log-amplitude head, or the pseudo-real and
// pseudo-imaginary pair of the phase branch.
inline std::vector<std::string> head_names(Branch b) {
  if (b == Branch::amplitude) return {"amp.head"};
  return {"pha.head_real", "pha.head_imag"};
}

struct TensorSpec {
  std::string name;
  std::vector<std::uint32_t> shape;
  std::size_t fan_in;
};

// Every parameter tensor the layer graph reads, in archive order.
inline std::vector<TensorSpec> weight_specs(const ModelConfig& cfg) {
  cfg.validate();
  const auto u = [](std::size_t v) { return static_cast<std::uint32_t>(v); };
  const std::size_t h = cfg.hidden, inter = cfg.intermediate;
  std::vector<TensorSpec> specs;
  for (Branch b : {Branch::amplitude, Branch::phase}) {
    const std::string p = branch_prefix(b);
    const std::size_t in_fan = cfg.n_mels() * cfg.kernel_io;
    specs.push_back({p + ".input_conv.weight", {u(h), u(cfg.n_mels()), u(cfg.kernel_io)}, in_fan});
    specs.push_back({p + ".input_conv.bias", {u(h)}, in_fan});
    for (std::size_t k = 0; k < cfg.num_blocks; ++k) {
      const std::string q = block_prefix(b, k);
      specs.push_back({q + ".dwconv.weight", {u(h), 1, u(cfg.kernel_dw)}, cfg.kernel_dw});
      specs.push_back({q + ".dwconv.bias", {u(h)}, cfg.kernel_dw});
      specs.push_back({q + ".norm.weight", {u(h)}, 1});
      specs.push_back({q + ".norm.bias", {u(h)}, 1});
      specs.push_back({q + ".pwconv1.weight", {u(inter), u(h)}, h});
      specs.push_back({q + ".pwconv1.bias", {u(inter)}, h});
      specs.push_back({q + ".grn.gamma", {u(inter)}, 1});
      specs.push_back({q + ".grn.beta", {u(inter)}, 1});
      specs.push_back({q + ".pwconv2.weight", {u(h), u(inter)}, inter});
      specs.push_back({q + ".pwconv2.bias", {u(h)}, inter});
    }
    for (const auto& head : head_names(b)) {
      specs.push_back({head + ".weight", {u(cfg.n_bins()), u(h), u(cfg.kernel_io)}, h * cfg.kernel_io});
      specs.push_back({head + ".bias", {u(cfg.n_bins())}, h * cfg.kernel_io});
    }
  }
  return specs;
}

// ---------------------------------------------------------------------------
// Layer graph description (shared by the FLOPs counter, the latency analyzer
// and the streaming precondition check).

enum class LayerKind { conv, depthwise, layer_norm, pointwise, gelu, grn, head };

struct LayerInfo {
  std::string name;
  Branch branch;
  LayerKind kind;
  ConvGeometry geometry;       // kernel 1 for frame-local layers
  bool sequence_global = false;  // statistic over the whole sequence
  bool parallel_head = false;  // runs in parallel with sibling heads
  std::size_t macs_per_frame = 0;
};

// Per-frame MAC convention: dense conv in*out*k, depthwise C*k, layer norm 2C
// (variance accumulation + affine), GRN 2C (sum-of-squares + affine), GELU 0.
inline std::vector<LayerInfo> layer_graph(const ModelConfig& cfg) {
  cfg.validate();
  const std::size_t h = cfg.hidden, inter = cfg.intermediate;
  const ConvGeometry local{1, 1, true};
  std::vector<LayerInfo> g;
  for (Branch b : {Branch::amplitude, Branch::phase}) {
    const std::string p = branch_prefix(b);
    g.push_back({p + ".input_conv", b, LayerKind::conv, cfg.io_geometry(), false, false,
                 cfg.n_mels() * h * cfg.kernel_io});
    for (std::size_t k = 0; k < cfg.num_blocks; ++k) {
      const std::string q = block_prefix(b, k);
      g.push_back({q + ".dwconv", b, LayerKind::depthwise, cfg.dw_geometry(), false, false, h * cfg.kernel_dw});
      g.push_back({q + ".norm", b, LayerKind::layer_norm, local, false, false, 2 * h});
      g.push_back({q + ".pwconv1", b, LayerKind::pointwise, local, false, false, h * inter});
      g.push_back({q + ".gelu", b, LayerKind::gelu, local, false, false, 0});
      g.push_back({q + ".grn", b, LayerKind::grn, local, cfg.grn_mode == GrnMode::global, false, 2 * inter});
      g.push_back({q + ".pwconv2", b, LayerKind::pointwise, local, false, false, inter * h});
    }
    const auto heads = head_names(b);
    for (const auto& head : heads) {
      g.push_back({head, b, LayerKind::head, cfg.io_geometry(), false, heads.size() > 1,
                   h * cfg.n_bins() * cfg.kernel_io});
    }
  }
  return g;
}

struct FlopReport {
  std::vector<LayerInfo> layers;
  std::uint64_t macs_per_frame = 0;
  double frames_per_second = 0.0;
  double flops_per_second = 0.0;  // 1 MAC counted as 1 FLOP
};

inline FlopReport count_flops(const ModelConfig& cfg) {
  FlopReport r;
  r.layers = layer_graph(cfg);
  for (const auto& l : r.layers) r.macs_per_frame += l.macs_per_frame;
  r.frames_per_second = cfg.spectral.frames_per_second();
  r.flops_per_second = static_cast<double>(r.macs_per_frame) * r.frames_per_second;
  return r;
}

// ---------------------------------------------------------------------------
// Packed parameters

struct BlockWeights {
  kernels::PackedDepthwise dwconv;
  std::vector<float> norm_gamma, norm_beta;
  kernels::PackedDense pwconv1;
  std::vector<float> grn_gamma, grn_beta;
  kernels::PackedDense pwconv2;
};

struct BranchWeights {
  kernels::PackedDense input_conv;
  std::vector<BlockWeights> blocks;
  std::vector<kernels::PackedDense> heads;
};

namespace detail {

inline std::vector<std::uint32_t> dims(std::initializer_list<std::size_t> d) {
  std::vector<std::uint32_t> out;
  for (auto v : d) out.push_back(static_cast<std::uint32_t>(v));
  return out;
}

inline kernels::PackedDense load_dense(const WeightArchive& a, const std::string& name, std::size_t in,
                                       std::size_t out, std::size_t taps, bool linear) {
  const auto& w = a.get(name + ".weight", linear ? dims({out, in}) : dims({out, in, taps}));
  const auto& b = a.get(name + ".bias", dims({out}));
  return {in, out, taps, w.data, b.data};
}

inline std::vector<float> load_vector(const WeightArchive& a, const std::string& name, std::size_t n) {
  return a.get(name, dims({n})).data;
}

inline BranchWeights load_branch(const WeightArchive& a, const ModelConfig& cfg, Branch b) {
  const std::string p = branch_prefix(b);
  const std::size_t h = cfg.hidden, inter = cfg.intermediate;
  BranchWeights bw;
  bw.input_conv = load_dense(a, p + ".input_conv", cfg.n_mels(), h, cfg.kernel_io, false);
  for (std::size_t k = 0; k < cfg.num_blocks; ++k) {
    const std::string q = block_prefix(b, k);
    BlockWeights blk;
    const auto& dw = a.get(q + ".dwconv.weight", dims({h, 1, cfg.kernel_dw}));
    blk.dwconv = {h, cfg.kernel_dw, dw.data, load_vector(a, q + ".dwconv.bias", h)};
    blk.norm_gamma = load_vector(a, q + ".norm.weight", h);
    blk.norm_beta = load_vector(a, q + ".norm.bias", h);
    blk.pwconv1 = load_dense(a, q + ".pwconv1", h, inter, 1, true);
    blk.grn_gamma = load_vector(a, q + ".grn.gamma", inter);
    blk.grn_beta = load_vector(a, q + ".grn.beta", inter);
    blk.pwconv2 = load_dense(a, q + ".pwconv2", inter, h, 1, true);
    bw.blocks.push_back(std::move(blk));
  }
  for (const auto& head : head_names(b)) {
    bw.heads.push_back(load_dense(a, head, h, cfg.n_bins(), cfg.kernel_io, false));
  }
  return bw;
}

}  // namespace detail

struct SpectralPair {
  FrameTensor log_amplitude;  // [T x n_bins]
  FrameTensor phase;          // [T x n_bins], (-pi, pi]
};

struct BranchTrace {
  FrameTensor input_conv_out;         // [T x hidden]
  std::vector<FrameTensor> block_outs;  // K x [T x hidden]
};

// Intermediate features used for distillation.
struct FeatureTrace {
  BranchTrace amplitude;
  BranchTrace phase;

  const BranchTrace& branch(Branch b) const { return b == Branch::amplitude ? amplitude : phase; }
  BranchTrace& branch(Branch b) { return b == Branch::amplitude ? amplitude : phase; }
};

struct ForwardResult {
  SpectralPair spectra;
  FeatureTrace trace;
};

// y = x + pw2(grn(gelu(pw1(norm(dwconv(x)))))).
inline FrameTensor convnext_v2_block(const FrameTensor& x, const BlockWeights& w, const ModelConfig& cfg) {
  if (x.channels != cfg.hidden) {
    throw InvalidArgument("convnext_v2_block: input has " + std::to_string(x.channels) +
                          " channels, expected hidden = " + std::to_string(cfg.hidden));
  }
  const ConvGeometry local{1, 1, true};
  FrameTensor h = depthwise_sequence(w.dwconv, cfg.dw_geometry(), x);
  h = layer_norm_channels(h, w.norm_gamma, w.norm_beta, kNormEps);
  FrameTensor u = dense_sequence(w.pwconv1, local, h);
  gelu_inplace(u.values);
  u = grn(u, w.grn_gamma, w.grn_beta, cfg.grn_mode, kNormEps);
  FrameTensor y = dense_sequence(w.pwconv2, local, u);
  for (std::size_t i = 0; i < y.values.size(); ++i) y.values[i] = x.values[i] + y.values[i];
  return y;
}

inline float amplitude_from_log(float log_amp) { return static_cast<float>(std::exp(static_cast<double>(log_amp))); }

// Immutable packed model; safe to share across threads.
class Vocoder {
 public:
  Vocoder(const WeightArchive& weights, const ModelConfig& cfg)
      : cfg_(cfg) {
    cfg_.validate();
    amp_ = detail::load_branch(weights, cfg_, Branch::amplitude);
    pha_ = detail::load_branch(weights, cfg_, Branch::phase);
  }

  const ModelConfig& config() const { return cfg_; }
  const BranchWeights& branch(Branch b) const { return b == Branch::amplitude ? amp_ : pha_; }

  std::size_t parameter_bytes() const {
    std::size_t n = 0;
    for (const auto* bw : {&amp_, &pha_}) {
      n += bw->input_conv.bytes();
      for (const auto& blk : bw->blocks) {
        n += blk.dwconv.bytes() + blk.pwconv1.bytes() + blk.pwconv2.bytes() +
             (blk.norm_gamma.size() * 2 + blk.grn_gamma.size() * 2) * sizeof(float);
      }
      for (const auto& hd : bw->heads) n += hd.bytes();
    }
    return n;
  }

  ForwardResult forward(const MelSpectrogram& mel) const {
    if (mel.mels() != cfg_.n_mels()) {
      throw InvalidArgument("forward: mel has " + std::to_string(mel.mels()) + " channels, expected " +
                            std::to_string(cfg_.n_mels()));
    }
    ForwardResult r;
    std::vector<FrameTensor> amp_heads = run_branch(amp_, mel.values, r.trace.amplitude);
    std::vector<FrameTensor> pha_heads = run_branch(pha_, mel.values, r.trace.phase);
    r.spectra.log_amplitude = std::move(amp_heads[0]);
    r.spectra.phase = phase_activate(pha_heads[0], pha_heads[1]);
    return r;
  }

  std::vector<float> synthesize(const MelSpectrogram& mel) const {
    return spectra_to_wave(forward(mel).spectra, cfg_.spectral);
  }

  static std::vector<float> spectra_to_wave(const SpectralPair& s, const SpectralConfig& sc) {
    const std::size_t frames = s.log_amplitude.frames;
    if (frames == 0) return {};
    ComplexSpectrogram spec{FrameTensor(frames, s.log_amplitude.channels), s.phase};
    for (std::size_t i = 0; i < spec.amplitude.values.size(); ++i) {
      spec.amplitude.values[i] = amplitude_from_log(s.log_amplitude.values[i]);
    }
    return istft_batch(spec, sc, (frames - 1) * sc.hop);
  }

 private:
  std::vector<FrameTensor> run_branch(const BranchWeights& bw, const FrameTensor& mel, BranchTrace& trace) const {
    FrameTensor x = dense_sequence(bw.input_conv, cfg_.io_geometry(), mel);
    trace.input_conv_out = x;
    trace.block_outs.clear();
    for (const auto& blk : bw.blocks) {
      x = convnext_v2_block(x, blk, cfg_);
      trace.block_outs.push_back(x);
    }
    std::vector<FrameTensor> outs;
    for (const auto& head : bw.heads) outs.push_back(dense_sequence(head, cfg_.io_geometry(), x));
    return outs;
  }

  ModelConfig cfg_;
  BranchWeights amp_;
  BranchWeights pha_;
};

inline ForwardResult forward_batch(const MelSpectrogram& mel, const WeightArchive& weights, const ModelConfig& cfg) {
  return Vocoder(weights, cfg).forward(mel);
}

// Waveform of (T-1)*hop samples after removing the analysis centre padding.
inline std::vector<float> synthesize_batch(const MelSpectrogram& mel, const WeightArchive& weights,
                                           const ModelConfig& cfg) {
  return Vocoder(weights, cfg).synthesize(mel);
}

}  // namespace dllap
