#pragma once

#include <CLI11.hpp>

#include <cstdint>
#include <cstdio>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "dllap/archive.hpp"
#include "dllap/io.hpp"
#include "dllap/losses.hpp"
#include "dllap/metrics.hpp"
#include "dllap/model.hpp"
#include "dllap/streaming.hpp"
#include "dllap/verify.hpp"

namespace dllap::cli {

enum ExitStatus : int { kSuccess = 0, kVerificationFailed = 1, kUsageError = 2 };

inline std::string fixed(double v, int digits = 3) {
  std::ostringstream o;
  o << std::fixed << std::setprecision(digits) << v;
  return o.str();
}

inline std::string general(double v) {
  std::ostringstream o;
  o << std::setprecision(9) << v;
  return o.str();
}

struct Options {
  std::string config = "default";
  std::string in, out, weights, teacher, student, ref, deg;
  std::string mode = "batch";
  std::uint64_t seed = 0;
  std::size_t frames = 50;
  std::size_t blocks = 0;
  bool blocks_set = false;
  double lkd = 5.0;
  bool pretty = false;
};

inline void cmd_mel(const Options& o, std::ostream& out) {
  const auto cfg = load_config(o.config);
  const auto mel = extract_mel(load_wav(o.in), cfg.spectral);
  save_mel(mel, o.out);
  out << "frames=" << mel.frames() << "\n";
}

inline void cmd_synth(const Options& o, std::ostream& out) {
  const auto cfg = load_config(o.config);
  const auto mel = load_mel(o.in, cfg.n_mels());
  const auto model = std::make_shared<const Vocoder>(load_archive(o.weights), cfg);
  std::vector<float> wave;
  if (o.mode == "streaming") {
    auto st = stream_init(model);
    wave = align_stream_to_batch(stream_synthesize(st, mel), mel.frames(), cfg.spectral);
  } else {
    wave = model->synthesize(mel);
  }
  save_wav(wave, o.out);
  out << "mode=" << o.mode << "\nframes=" << mel.frames() << "\nsamples=" << wave.size() << "\n";
}

inline void cmd_copy_synth(const Options& o, std::ostream& out) {
  const auto cfg = load_config(o.config);
  const auto wave = load_wav(o.in);
  const auto rec = copy_synthesize(wave, cfg.spectral);
  save_wav(rec, o.out);
  out << "samples=" << rec.size() << "\n";
}

inline void cmd_latency(const Options& o, std::ostream& out) {
  const auto r = total_latency(load_config(o.config));
  const auto opt = [](const auto& v, auto fmt) { return v ? fmt(*v) : std::string("unbounded"); };
  out << "lookahead_frames=" << opt(r.lookahead_frames, [](std::size_t v) { return std::to_string(v); }) << "\n"
      << "model_latency_ms=" << opt(r.model_latency_ms, [](double v) { return fixed(v); }) << "\n"
      << "ola_latency_ms=" << fixed(r.ola_latency_ms) << "\n"
      << "total_ms=" << opt(r.total_ms, [](double v) { return fixed(v); }) << "\n";
}

inline void cmd_flops(const Options& o, std::ostream& out) {
  const auto r = count_flops(load_config(o.config));
  if (o.pretty) {
    out << std::left << std::setw(32) << "layer" << std::right << std::setw(14) << "MACs/frame" << "\n";
    for (const auto& l : r.layers) {
      if (l.macs_per_frame) out << std::left << std::setw(32) << l.name << std::right << std::setw(14) << l.macs_per_frame << "\n";
    }
    out << std::left << std::setw(32) << "total" << std::right << std::setw(14) << r.macs_per_frame << "\n"
        << "GFLOPs per second of audio: " << fixed(r.flops_per_second / 1e9) << "\n";
    return;
  }
  for (const auto& l : r.layers) {
    if (l.macs_per_frame) out << "layer." << l.name << "=" << l.macs_per_frame << "\n";
  }
  out << "macs_per_frame=" << r.macs_per_frame << "\n"
      << "frames_per_second=" << general(r.frames_per_second) << "\n"
      << "flops_per_second=" << fixed(r.flops_per_second, 0) << "\n"
      << "gflops=" << fixed(r.flops_per_second / 1e9) << "\n";
}

inline int cmd_verify(const Options& o, std::ostream& out) {
  const auto results = run_property_checks(load_config(o.config), o.seed, o.frames);
  bool all = true;
  for (const auto& r : results) {
    all = all && r.pass;
    out << r.name << "=" << (r.pass ? "pass" : "fail");
    if (!r.detail.empty()) out << " (" << r.detail << ")";
    out << "\n";
  }
  out << "result=" << (all ? "pass" : "fail") << "\n";
  return all ? kSuccess : kVerificationFailed;
}

// The teacher is the non-causal counterpart of the student configuration.
inline ModelConfig teacher_config(ModelConfig cfg) {
  cfg.causal = false;
  cfg.grn_mode = GrnMode::global;
  return cfg;
}

inline void cmd_loss(const Options& o, std::ostream& out) {
  const auto cfg = load_config(o.config);
  const auto& sc = cfg.spectral;
  const auto wave = load_wav(o.in);
  const auto mel = extract_mel(wave, sc);
  const Vocoder student(load_archive(o.student), cfg);
  const Vocoder teacher(load_archive(o.teacher), teacher_config(cfg));
  const auto s = student.forward(mel);
  const auto t = teacher.forward(mel);

  const auto target = stft(wave, sc);
  FrameTensor target_log(target.amplitude.frames, target.amplitude.channels);
  for (std::size_t i = 0; i < target_log.values.size(); ++i) {
    target_log.values[i] = static_cast<float>(std::log(std::max<double>(target.amplitude.values[i], sc.log_floor)));
  }
  const std::size_t blocks = o.blocks_set ? o.blocks : cfg.num_blocks;
  if (blocks > cfg.num_blocks) {
    throw InvalidArgument("--blocks " + std::to_string(blocks) + " exceeds num_blocks = " + std::to_string(cfg.num_blocks));
  }

  LossBreakdown parts;
  parts.L_A = amplitude_loss(s.spectra.log_amplitude, target_log);
  parts.L_P = phase_loss(s.spectra.phase, target.phase);
  parts.L_S = stft_loss(s.spectra, wave, sc);
  parts.L_W = waveform_loss(Vocoder::spectra_to_wave(s.spectra, sc), wave, sc);
  parts.L_KD = kd_loss(t.trace, s.trace, first_blocks(blocks));
  LossWeights w;
  w.lambda_KD = o.lkd;
  const auto r = total_loss(parts, w);
  out << "blocks=" << blocks << "\n"
      << "lambda_KD=" << general(w.lambda_KD) << "\n"
      << "L_A=" << general(r.L_A) << "\n"
      << "L_P=" << general(r.L_P) << "\n"
      << "L_S=" << general(r.L_S) << "\n"
      << "L_W=" << general(r.L_W) << "\n"
      << "L_KD=" << general(r.L_KD) << "\n"
      << "total=" << general(r.total) << "\n";
}

inline void cmd_metrics(const Options& o, std::ostream& out) {
  const auto cfg = load_config(o.config);
  const auto m = evaluate_metrics(load_wav(o.ref), load_wav(o.deg), cfg.spectral);
  out << "snr_db=" << fixed(m.snr_db) << "\n"
      << "las_rmse_db=" << fixed(m.las_rmse_db) << "\n"
      << "mcd_db=" << fixed(m.mcd_db) << "\n"
      << "f0_rmse_cents=" << fixed(m.f0_rmse_cents) << "\n"
      << "vuv_error_pct=" << fixed(m.vuv_error_pct) << "\n";
}

// Entry point shared by the executable and the tests. args excludes argv[0].
inline int run(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Low-latency amplitude/phase vocoder engine", "dllap"};
  app.require_subcommand(1);
  Options o;
  const auto add_config = [&](CLI::App* s, bool required) {
    auto* opt = s->add_option("--config", o.config, "model config file, or 'default'");
    if (required) opt->required();
  };

  auto* mel = app.add_subcommand("mel", "extract a log-mel spectrogram from a WAV file");
  mel->add_option("--in", o.in)->required();
  mel->add_option("--out", o.out)->required();
  add_config(mel, false);

  auto* synth = app.add_subcommand("synth", "synthesize a waveform from a mel file");
  add_config(synth, true);
  synth->add_option("--weights", o.weights)->required();
  synth->add_option("--in", o.in)->required();
  synth->add_option("--out", o.out)->required();
  synth->add_option("--mode", o.mode)->check(CLI::IsMember({"batch", "streaming"}));

  auto* copy = app.add_subcommand("copy-synth", "STFT analysis/resynthesis without a model");
  copy->add_option("--in", o.in)->required();
  copy->add_option("--out", o.out)->required();
  add_config(copy, false);

  auto* latency = app.add_subcommand("latency", "algorithmic latency of a configuration");
  add_config(latency, true);

  auto* flops = app.add_subcommand("flops", "multiply-accumulate count per second of audio");
  add_config(flops, true);
  flops->add_flag("--pretty", o.pretty, "human-readable table");

  auto* verify = app.add_subcommand("verify", "run property checks on randomly initialized weights");
  add_config(verify, false);
  verify->add_option("--seed", o.seed);
  verify->add_option("--frames", o.frames)->check(CLI::Range(std::size_t{2}, std::size_t{100000}));

  auto* loss = app.add_subcommand("loss", "evaluate training criteria for a teacher/student pair");
  add_config(loss, true);
  loss->add_option("--teacher", o.teacher)->required();
  loss->add_option("--student", o.student)->required();
  loss->add_option("--in", o.in)->required();
  loss->add_option("--blocks", o.blocks, "number of distilled blocks (first N)")
      ->check(CLI::IsMember({0, 2, 4, 6, 8}));
  loss->add_option("--lkd", o.lkd, "distillation weight")->check(CLI::NonNegativeNumber);

  auto* metrics = app.add_subcommand("metrics", "objective metrics between two aligned WAV files");
  metrics->add_option("--ref", o.ref)->required();
  metrics->add_option("--deg", o.deg)->required();
  add_config(metrics, false);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kSuccess;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kSuccess;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return kUsageError;
  }

  o.blocks_set = loss->count("--blocks") > 0;

  try {
    if (mel->parsed()) cmd_mel(o, out);
    else if (synth->parsed()) cmd_synth(o, out);
    else if (copy->parsed()) cmd_copy_synth(o, out);
    else if (latency->parsed()) cmd_latency(o, out);
    else if (flops->parsed()) cmd_flops(o, out);
    else if (verify->parsed()) return cmd_verify(o, out);
    else if (loss->parsed()) cmd_loss(o, out);
    else if (metrics->parsed()) cmd_metrics(o, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kUsageError;
  }
  return kSuccess;
}

}  // namespace dllap::cli
