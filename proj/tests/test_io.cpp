#include <catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <string>
#include <unistd.h>
#include <vector>

#include "dllap/io.hpp"

using namespace dllap;
using Catch::Approx;

namespace {

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("dllap_io_" + std::to_string(::getpid()) + "_" + name);
}

template <class E>
std::string message_of(auto&& f) {
  try {
    f();
  } catch (const E& e) {
    return e.what();
  }
  return {};
}

void set_u32(std::vector<unsigned char>& b, std::size_t at, std::uint32_t v) {
  for (std::size_t i = 0; i < 4; ++i) b[at + i] = static_cast<unsigned char>(v >> (8 * i));
}

}  // namespace

TEST_CASE("empty archive layout") {
  const auto bytes = encode_archive(WeightArchive{});
  REQUIRE(bytes.size() == 12);
  CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "DLAP");
  CHECK(bytes[4] == 1);
  CHECK(bytes[8] == 0);
  CHECK(decode_archive(bytes).size() == 0);
}

TEST_CASE("archive record layout") {
  WeightArchive a;
  a.add("w", {2, 1}, {1.0f, -2.0f});
  const auto b = encode_archive(a);
  // header 12 + name len 2 + name 1 + rank 1 + dims 8 + data 8
  REQUIRE(b.size() == 32);
  CHECK(b[12] == 1);
  CHECK(b[14] == 'w');
  CHECK(b[15] == 2);
  CHECK(b[16] == 2);
  CHECK(b[20] == 1);
  // 1.0f little-endian: 00 00 80 3f
  CHECK(b[24] == 0x00);
  CHECK(b[26] == 0x80);
  CHECK(b[27] == 0x3f);
  CHECK(decode_archive(b) == a);
}

TEST_CASE("archive round trip and malformed input") {
  WeightArchive a;
  a.add("x.weight", {3, 2, 1}, {1, 2, 3, 4, 5, 6});
  a.add("x.bias", {3}, {-0.5f, 0.0f, 0.25f});
  a.add("scalar", {}, {7.0f});
  const auto path = temp_path("a.dlap");
  save_archive(a, path);
  CHECK(load_archive(path) == a);
  std::filesystem::remove(path);

  auto bytes = encode_archive(a);
  auto bad = bytes;
  bad[0] = 'X';
  CHECK(message_of<FormatError>([&] { decode_archive(bad); }).find("DLAP") != std::string::npos);

  auto version = bytes;
  set_u32(version, 4, 2);
  CHECK_THROWS_AS(decode_archive(version), FormatError);

  for (std::size_t cut : {3u, 11u, 20u}) {
    const std::vector<unsigned char> part(bytes.begin(), bytes.end() - static_cast<std::ptrdiff_t>(cut));
    CHECK_THROWS_AS(decode_archive(part), FormatError);
  }
  auto trailing = bytes;
  trailing.push_back(0);
  CHECK_THROWS_AS(decode_archive(trailing), FormatError);

  CHECK_THROWS_AS(a.add("x.bias", {1}, {0.0f}), InvalidArgument);
  CHECK_THROWS_AS(a.add("y", {2, 2}, {0.0f}), InvalidArgument);
  CHECK_THROWS_AS(a.get("missing", {1}), NotFound);
  CHECK_THROWS_AS(a.get("x.bias", {2}), InvalidArgument);
  CHECK_THROWS_AS(load_archive(temp_path("does_not_exist")), FormatError);
}

TEST_CASE("wav round trip") {
  const std::vector<float> s{0.0f, 0.5f, -0.5f, 0.25f, -1.0f, 1.0f, 1e-5f};
  const auto bytes = encode_wav(s);
  CHECK(bytes.size() == 44 + 2 * s.size());
  const auto back = decode_wav(bytes);
  REQUIRE(back.size() == s.size());
  CHECK(back[1] == 0.5f);
  CHECK(back[2] == -0.5f);
  CHECK(back[4] == -1.0f);
  CHECK(back[5] == Approx(32767.0 / 32768.0));
  for (std::size_t i = 0; i < s.size(); ++i) CHECK(std::abs(back[i] - s[i]) <= 1.0 / 32768.0);

  const auto path = temp_path("t.wav");
  save_wav(s, path);
  CHECK(load_wav(path) == back);
  std::filesystem::remove(path);
}

TEST_CASE("wav format errors") {
  const auto good = encode_wav(std::vector<float>(10, 0.1f));
  auto rate = good;
  set_u32(rate, 24, 44100);
  const auto msg = message_of<FormatError>([&] { decode_wav(rate); });
  CHECK(msg.find("44100") != std::string::npos);
  CHECK(msg.find("16000") != std::string::npos);

  auto stereo = good;
  stereo[22] = 2;
  CHECK_THROWS_AS(decode_wav(stereo), FormatError);
  auto riff = good;
  riff[0] = 'X';
  CHECK_THROWS_AS(decode_wav(riff), FormatError);
  const std::vector<unsigned char> tiny(good.begin(), good.begin() + 30);
  CHECK_THROWS_AS(decode_wav(tiny), FormatError);
}

TEST_CASE("mel files") {
  MelSpectrogram mel{FrameTensor(3, 80)};
  for (std::size_t i = 0; i < mel.values.values.size(); ++i) mel.values.values[i] = 0.01f * static_cast<float>(i);
  const auto path = temp_path("m.dlap");
  save_mel(mel, path);
  const auto back = load_mel(path);
  CHECK(back.frames() == 3);
  CHECK(back.values.values == mel.values.values);
  std::filesystem::remove(path);

  WeightArchive wrong_name;
  wrong_name.add("spec", {3, 80}, mel.values.values);
  CHECK_THROWS_AS(mel_from_archive(wrong_name), FormatError);
  WeightArchive wrong_width;
  wrong_width.add("mel", {3, 40}, std::vector<float>(120));
  CHECK(message_of<InvalidArgument>([&] { mel_from_archive(wrong_width); }).find("40") != std::string::npos);
  WeightArchive wrong_rank;
  wrong_rank.add("mel", {240}, std::vector<float>(240));
  CHECK_THROWS_AS(mel_from_archive(wrong_rank), InvalidArgument);
}

TEST_CASE("config parsing") {
  const auto d = parse_config("");
  CHECK(d.hidden == 512);
  CHECK(d.intermediate == 1536);
  CHECK(d.num_blocks == 8);
  CHECK(d.kernel_io == 7);
  CHECK(d.causal);
  CHECK(d.grn_mode == GrnMode::causal_cumulative);
  CHECK(d.spectral.n_fft == 1024);
  CHECK(d.spectral.frame_len == 320);
  CHECK(d.spectral.hop == 80);
  CHECK(d.spectral.n_mels == 80);

  const auto c = parse_config("# tiny\nhidden: 16  # comment\n\nnum_blocks:2\ncausal: false\ngrn_mode: global\n");
  CHECK(c.hidden == 16);
  CHECK(c.num_blocks == 2);
  CHECK_FALSE(c.causal);
  CHECK(c.grn_mode == GrnMode::global);
  CHECK(c.intermediate == 1536);

  CHECK(parse_config(format_config(c)) == c);
  CHECK(load_config("default") == d);

  CHECK(message_of<InvalidArgument>([] { parse_config("hiden: 4"); }).find("hiden") != std::string::npos);
  CHECK(message_of<InvalidArgument>([] { parse_config("hidden: 4\nhidden: 8"); }).find("duplicate") != std::string::npos);
  CHECK_THROWS_AS(parse_config("hidden 4"), InvalidArgument);
  CHECK_THROWS_AS(parse_config("hidden: -4"), InvalidArgument);
  CHECK_THROWS_AS(parse_config("hidden: 4x"), InvalidArgument);
  CHECK_THROWS_AS(parse_config("causal: maybe"), InvalidArgument);
  CHECK_THROWS_AS(parse_config("grn_mode: local"), InvalidArgument);
  CHECK_THROWS_AS(parse_config("kernel_dw: 0"), InvalidArgument);

  const auto path = temp_path("c.cfg");
  {
    const std::string text = "hidden: 0\n";
    detail::write_file(path, std::span(reinterpret_cast<const unsigned char*>(text.data()), text.size()));
  }
  CHECK(message_of<InvalidArgument>([&] { load_config(path); }).find(path.string()) != std::string::npos);
  std::filesystem::remove(path);
}

TEST_CASE("deterministic initialization") {
  // Reference value of the splitmix64 generator seeded with 0.
  CHECK(splitmix64(0x9E3779B97F4A7C15ULL) == 0xE220A8397B1DCDAFULL);
  const double u = static_cast<double>(0xE220A8397B1DCDAFULL >> 40) * 0x1.0p-24;
  CHECK(counter_uniform(0, 0, 1.0) == static_cast<float>(2.0 * u - 1.0));

  ModelConfig cfg;
  cfg.hidden = 4;
  cfg.intermediate = 12;
  cfg.num_blocks = 2;
  const auto a = random_init(cfg, 42);
  CHECK(a == random_init(cfg, 42));
  CHECK_FALSE(a == random_init(cfg, 43));
  const auto specs = weight_specs(cfg);
  REQUIRE(a.size() == specs.size());
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const auto& r = a.records()[i];
    CHECK(r.name == specs[i].name);
    CHECK(r.shape == specs[i].shape);
    const double bound = 1.0 / std::sqrt(static_cast<double>(specs[i].fan_in));
    for (float v : r.data) REQUIRE(std::abs(v) <= bound);
  }
}
