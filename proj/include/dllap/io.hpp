#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "dllap/archive.hpp"
#include "dllap/error.hpp"
#include "dllap/model.hpp"
#include "dllap/spectral.hpp"

namespace dllap {

// ---------------------------------------------------------------------------
// WAV: RIFF/WAVE, 16-bit PCM, mono, 16 kHz.

inline constexpr std::uint32_t kWavSampleRate = 16000;

inline std::vector<unsigned char> encode_wav(std::span<const float> samples) {
  std::vector<unsigned char> out;
  const auto data_bytes = static_cast<std::uint32_t>(samples.size() * 2);
  const auto put4 = [&](const char* s) { out.insert(out.end(), s, s + 4); };
  put4("RIFF");
  detail::put_le(out, 36u + data_bytes);
  put4("WAVE");
  put4("fmt ");
  detail::put_le(out, 16u);
  detail::put_le(out, std::uint16_t{1});  // PCM
  detail::put_le(out, std::uint16_t{1});  // mono
  detail::put_le(out, kWavSampleRate);
  detail::put_le(out, kWavSampleRate * 2u);
  detail::put_le(out, std::uint16_t{2});
  detail::put_le(out, std::uint16_t{16});
  put4("data");
  detail::put_le(out, data_bytes);
  for (float s : samples) {
    const long q = std::lround(static_cast<double>(s) * 32768.0);
    detail::put_le(out, static_cast<std::int16_t>(std::clamp(q, -32768L, 32767L)));
  }
  return out;
}

inline std::vector<float> decode_wav(std::span<const unsigned char> bytes, const std::string& context = "wav") {
  detail::ByteReader rd(bytes, context);
  if (rd.remaining() < 12 || rd.bytes(4) != "RIFF") throw FormatError(context + ": not a RIFF file");
  rd.get<std::uint32_t>();
  if (rd.bytes(4) != "WAVE") throw FormatError(context + ": RIFF type is not WAVE");

  bool have_fmt = false;
  while (rd.remaining() >= 8) {
    const std::string id(rd.bytes(4));
    const auto size = rd.get<std::uint32_t>();
    if (id == "fmt ") {
      if (size < 16) throw FormatError(context + ": fmt chunk too short");
      const auto format = rd.get<std::uint16_t>();
      const auto channels = rd.get<std::uint16_t>();
      const auto rate = rd.get<std::uint32_t>();
      rd.get<std::uint32_t>();
      rd.get<std::uint16_t>();
      const auto bits = rd.get<std::uint16_t>();
      rd.bytes(size - 16 + (size & 1));
      if (format != 1) throw FormatError(context + ": unsupported format: found format tag " + std::to_string(format) + ", need PCM (1)");
      if (channels != 1) throw FormatError(context + ": unsupported format: found " + std::to_string(channels) + " channels, need mono");
      if (bits != 16) throw FormatError(context + ": unsupported format: found " + std::to_string(bits) + "-bit samples, need 16-bit");
      if (rate != kWavSampleRate) {
        throw FormatError(context + ": unsupported format: found sample rate " + std::to_string(rate) + " Hz, need 16000 Hz");
      }
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) throw FormatError(context + ": data chunk before fmt chunk");
      rd.need(size);
      std::vector<float> out(size / 2);
      for (auto& s : out) s = static_cast<float>(rd.get<std::int16_t>()) / 32768.0f;
      return out;
    } else {
      rd.bytes(size + (size & 1));
    }
  }
  throw FormatError(context + ": no data chunk");
}

inline std::vector<float> load_wav(const std::filesystem::path& path) {
  return decode_wav(detail::read_file(path), path.string());
}

inline void save_wav(std::span<const float> samples, const std::filesystem::path& path) {
  detail::write_file(path, encode_wav(samples));
}

// ---------------------------------------------------------------------------
// Mel files: a DLAP archive holding one [T, n_mels] record named "mel".

inline WeightArchive mel_to_archive(const MelSpectrogram& mel) {
  WeightArchive a;
  a.add("mel", {static_cast<std::uint32_t>(mel.frames()), static_cast<std::uint32_t>(mel.mels())},
        mel.values.values);
  return a;
}

inline MelSpectrogram mel_from_archive(const WeightArchive& a, std::size_t expected_mels = 80) {
  if (a.size() != 1 || a.records()[0].name != "mel") {
    throw FormatError("mel file must contain exactly one record named \"mel\"");
  }
  const auto& r = a.records()[0];
  if (r.shape.size() != 2) throw InvalidArgument("mel record must be rank 2 [T, " + std::to_string(expected_mels) + "]");
  if (r.shape[1] != expected_mels) {
    throw InvalidArgument("mel record has " + std::to_string(r.shape[1]) + " mel channels, expected " +
                          std::to_string(expected_mels));
  }
  return MelSpectrogram{FrameTensor(r.shape[0], r.shape[1], r.data)};
}

inline void save_mel(const MelSpectrogram& mel, const std::filesystem::path& path) {
  save_archive(mel_to_archive(mel), path);
}

inline MelSpectrogram load_mel(const std::filesystem::path& path, std::size_t expected_mels = 80) {
  return mel_from_archive(load_archive(path), expected_mels);
}

// ---------------------------------------------------------------------------
// Config files: one "key: value" per line, '#' starts a comment. Absent keys
// keep their defaults; unknown keys are rejected.

namespace detail {

inline std::string trim(std::string s) {
  const auto ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(ws) - b + 1);
}

inline std::size_t parse_count(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  unsigned long long n = 0;
  try {
    if (!v.empty() && v[0] == '-') throw std::invalid_argument("negative");
    n = std::stoull(v, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != v.size()) throw InvalidArgument("config: '" + key + "' expects a non-negative integer, got '" + v + "'");
  return static_cast<std::size_t>(n);
}

inline double parse_real(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  double d = 0;
  try {
    d = std::stod(v, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != v.size()) throw InvalidArgument("config: '" + key + "' expects a number, got '" + v + "'");
  return d;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true") return true;
  if (v == "false") return false;
  throw InvalidArgument("config: '" + key + "' expects true or false, got '" + v + "'");
}

}  // namespace detail

inline ModelConfig parse_config(const std::string& text) {
  ModelConfig cfg;
  auto& sc = cfg.spectral;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  std::map<std::string, std::size_t> seen;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto colon = line.find(':');
    if (colon == std::string::npos) {
      throw InvalidArgument("config line " + std::to_string(lineno) + ": expected 'key: value'");
    }
    const std::string key = detail::trim(line.substr(0, colon));
    const std::string v = detail::trim(line.substr(colon + 1));
    if (!seen.emplace(key, lineno).second) throw InvalidArgument("config: duplicate key '" + key + "'");

    if (key == "sample_rate") sc.sample_rate = detail::parse_count(key, v);
    else if (key == "n_fft") sc.n_fft = detail::parse_count(key, v);
    else if (key == "frame_len") sc.frame_len = detail::parse_count(key, v);
    else if (key == "hop") sc.hop = detail::parse_count(key, v);
    else if (key == "n_mels") sc.n_mels = detail::parse_count(key, v);
    else if (key == "fmin") sc.fmin = detail::parse_real(key, v);
    else if (key == "fmax") sc.fmax = detail::parse_real(key, v);
    else if (key == "log_floor") sc.log_floor = detail::parse_real(key, v);
    else if (key == "hidden") cfg.hidden = detail::parse_count(key, v);
    else if (key == "intermediate") cfg.intermediate = detail::parse_count(key, v);
    else if (key == "num_blocks") cfg.num_blocks = detail::parse_count(key, v);
    else if (key == "kernel_io") cfg.kernel_io = detail::parse_count(key, v);
    else if (key == "kernel_dw") cfg.kernel_dw = detail::parse_count(key, v);
    else if (key == "dilation") cfg.dilation = detail::parse_count(key, v);
    else if (key == "causal") cfg.causal = detail::parse_bool(key, v);
    else if (key == "grn_mode") {
      if (v == "global") cfg.grn_mode = GrnMode::global;
      else if (v == "causal_cumulative") cfg.grn_mode = GrnMode::causal_cumulative;
      else throw InvalidArgument("config: grn_mode must be global or causal_cumulative, got '" + v + "'");
    } else {
      throw InvalidArgument("config: unknown key '" + key + "' on line " + std::to_string(lineno));
    }
  }
  cfg.validate();
  return cfg;
}

inline std::string format_config(const ModelConfig& cfg) {
  const auto& sc = cfg.spectral;
  std::ostringstream o;
  o << "sample_rate: " << sc.sample_rate << "\n"
    << "n_fft: " << sc.n_fft << "\n"
    << "frame_len: " << sc.frame_len << "\n"
    << "hop: " << sc.hop << "\n"
    << "n_mels: " << sc.n_mels << "\n"
    << "fmin: " << sc.fmin << "\n"
    << "fmax: " << sc.fmax << "\n"
    << "log_floor: " << sc.log_floor << "\n"
    << "hidden: " << cfg.hidden << "\n"
    << "intermediate: " << cfg.intermediate << "\n"
    << "num_blocks: " << cfg.num_blocks << "\n"
    << "kernel_io: " << cfg.kernel_io << "\n"
    << "kernel_dw: " << cfg.kernel_dw << "\n"
    << "dilation: " << cfg.dilation << "\n"
    << "causal: " << (cfg.causal ? "true" : "false") << "\n"
    << "grn_mode: " << to_string(cfg.grn_mode) << "\n";
  return o.str();
}

// "default" (or an empty path) selects the built-in configuration.
inline ModelConfig load_config(const std::filesystem::path& path) {
  if (path.empty() || path == "default") return parse_config("");
  const auto bytes = detail::read_file(path);
  try {
    return parse_config(std::string(bytes.begin(), bytes.end()));
  } catch (const InvalidArgument& e) {
    throw InvalidArgument(path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Deterministic initialization.
//
// Element n of the whole archive (counting across tensors in weight_specs
// order) is drawn from splitmix64(seed + (n + 1) * 0x9E3779B97F4A7C15): the top
// 24 bits form u in [0, 1), and the value is (2u - 1) / sqrt(fan_in), computed
// in double and rounded once to float.

inline std::uint64_t splitmix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline float counter_uniform(std::uint64_t seed, std::uint64_t counter, double bound) {
  const std::uint64_t x = splitmix64(seed + (counter + 1) * 0x9E3779B97F4A7C15ULL);
  const double u = static_cast<double>(x >> 40) * 0x1.0p-24;
  return static_cast<float>((2.0 * u - 1.0) * bound);
}

inline WeightArchive random_init(const ModelConfig& cfg, std::uint64_t seed) {
  WeightArchive a;
  std::uint64_t counter = 0;
  for (const auto& s : weight_specs(cfg)) {
    std::size_t n = 1;
    for (auto d : s.shape) n *= d;
    const double bound = 1.0 / std::sqrt(static_cast<double>(s.fan_in));
    std::vector<float> data(n);
    for (auto& v : data) v = counter_uniform(seed, counter++, bound);
    a.add(s.name, s.shape, std::move(data));
  }
  return a;
}

}  // namespace dllap
