#include <catch_amalgamated.hpp>

#include <memory>
#include <string>
#include <vector>

#include "dllap/io.hpp"
#include "dllap/streaming.hpp"
#include "dllap/verify.hpp"

using namespace dllap;
using Catch::Approx;

namespace {

ModelConfig small(bool causal = true, GrnMode mode = GrnMode::causal_cumulative) {
  ModelConfig cfg;
  cfg.hidden = 8;
  cfg.intermediate = 24;
  cfg.num_blocks = 2;
  cfg.causal = causal;
  cfg.grn_mode = mode;
  return cfg;
}

std::shared_ptr<const Vocoder> model_for(const ModelConfig& cfg, std::uint64_t seed) {
  return std::make_shared<const Vocoder>(random_init(cfg, seed), cfg);
}

}  // namespace

TEST_CASE("zeta values") {
  CHECK(zeta(1, 1) == 0);
  CHECK(zeta(1, 4) == 0);
  CHECK(zeta(3, 1) == 1);
  CHECK(zeta(4, 1) == 1);
  CHECK(zeta(7, 3) == 9);
  for (std::size_t k = 1; k <= 8; ++k) {
    for (std::size_t d = 1; d <= 4; ++d) CHECK(zeta(k, d) == ((k - 1) * d) / 2);
  }
}

TEST_CASE("latency accounting") {
  ModelConfig cfg;
  const auto causal = total_latency(cfg);
  REQUIRE(causal.lookahead_frames);
  CHECK(*causal.lookahead_frames == 0);
  CHECK(*causal.model_latency_ms == 0.0);
  CHECK(causal.ola_latency_ms == 15.0);
  CHECK(*causal.total_ms == 15.0);

  cfg.causal = false;
  const auto nc = total_latency(cfg);
  CHECK(*nc.lookahead_frames == 30);
  CHECK(*nc.model_latency_ms == 150.0);
  CHECK(*nc.total_ms == 165.0);
  CHECK(*nc.total_ms == *nc.model_latency_ms + nc.ola_latency_ms);

  cfg.grn_mode = GrnMode::global;
  const auto g = total_latency(cfg);
  CHECK_FALSE(g.lookahead_frames);
  CHECK_FALSE(g.total_ms);

  ModelConfig dil;
  dil.causal = false;
  dil.num_blocks = 2;
  dil.kernel_io = 4;
  dil.kernel_dw = 5;
  dil.dilation = 2;
  // serial: input zeta(4,2)=3, two blocks zeta(5,2)=4, one head zeta(4,2)=3
  CHECK(*lookahead_frames(dil) == 3 + 2 * 4 + 3);
}

TEST_CASE("streaming equals batch") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto cfg = small();
    const auto model = model_for(cfg, seed);
    const auto mel = random_mel(37, 80, seed + 10);
    FeatureTrace trace;
    auto st = stream_init(model);
    const auto raw = stream_synthesize(st, mel, &trace);
    CHECK(raw.size() == 37 * 80 + 240);
    const auto streamed = align_stream_to_batch(raw, mel.frames(), cfg.spectral);
    const auto batch = model->forward(mel);
    const auto wave = Vocoder::spectra_to_wave(batch.spectra, cfg.spectral);
    CHECK(max_abs_diff(streamed, wave) <= 1e-4);
    CHECK(max_trace_diff(trace, batch.trace) <= 1e-5);
  }
}

TEST_CASE("emission sizes") {
  const auto model = model_for(small(), 4);
  const auto mel = random_mel(6, 80, 1);

  auto st = stream_init(model);
  CHECK(st.push(mel.values.frame(0)).size() == 80);
  for (std::size_t t = 1; t < 6; ++t) CHECK(stream_push_frame(st, mel.values.frame(t)).size() == 80);
  CHECK(st.frames_pushed() == 6);
  CHECK(stream_flush(st).size() == 240);
  CHECK_THROWS_AS(stream_push_frame(st, mel.values.frame(0)), InvalidState);
  CHECK_THROWS_AS(stream_flush(st), InvalidState);

  auto empty = stream_init(model);
  CHECK(stream_flush(empty).empty());

  auto bad = stream_init(model);
  CHECK_THROWS_AS(stream_push_frame(bad, std::vector<float>(79, 0.0f)), InvalidArgument);
}

TEST_CASE("emitted samples are a prefix of any extended stream") {
  const auto model = model_for(small(), 5);
  const auto mel = random_mel(30, 80, 2);
  auto st = stream_init(model);
  std::vector<float> emitted;
  for (std::size_t t = 0; t < 12; ++t) {
    auto chunk = st.push(mel.values.frame(t));
    emitted.insert(emitted.end(), chunk.begin(), chunk.end());
  }
  for (std::uint64_t s : {7u, 8u}) {
    auto other = stream_init(model);
    const auto full = stream_synthesize(other, perturb_after(mel, 11, s));
    REQUIRE(full.size() >= emitted.size());
    for (std::size_t i = 0; i < emitted.size(); ++i) REQUIRE(full[i] == emitted[i]);
  }
}

TEST_CASE("init precondition names the offending piece") {
  try {
    stream_init(model_for(small(false, GrnMode::global), 1));
    FAIL("expected UnsupportedConfiguration");
  } catch (const UnsupportedConfiguration& e) {
    CHECK(std::string(e.what()).find("grn_mode=global") != std::string::npos);
  }
  try {
    stream_init(model_for(small(false), 1));
    FAIL("expected UnsupportedConfiguration");
  } catch (const UnsupportedConfiguration& e) {
    CHECK(std::string(e.what()).find("amp.input_conv") != std::string::npos);
  }
}

TEST_CASE("state size is constant and reset restores the initial state") {
  const auto model = model_for(small(), 6);
  auto a = stream_init(model);
  const auto b = stream_init(model);
  CHECK(a == b);
  const std::size_t bytes = a.state_bytes();
  const auto mel = random_mel(50, 80, 3);
  for (std::size_t t = 0; t < 50; ++t) {
    a.push(mel.values.frame(t));
    REQUIRE(a.state_bytes() == bytes);
  }
  CHECK_FALSE(a == b);
  stream_reset(a);
  CHECK(a == b);

  // A reset stream replays identically.
  auto fresh = stream_init(model);
  const auto first = stream_synthesize(fresh, mel);
  stream_reset(fresh);
  CHECK(stream_synthesize(fresh, mel) == first);
}

TEST_CASE("ring buffers hold exactly (k-1)d frames") {
  FrameHistory h(ConvGeometry{5, 3, true}, 4);
  CHECK(h.length() == 12);
  CHECK(h.bytes() == 12 * 4 * sizeof(float));
  FrameHistory pointwise(ConvGeometry{1, 1, true}, 4);
  CHECK(pointwise.length() == 0);
}

TEST_CASE("stream alignment helper") {
  const SpectralConfig sc;
  const auto s = random_wave(10 * 80 + 240, 1);
  const auto a = align_stream_to_batch(s, 10, sc);
  REQUIRE(a.size() == 9 * 80);
  CHECK(a.front() == s[160]);
  CHECK(a.back() == s[160 + 9 * 80 - 1]);
  CHECK(align_stream_to_batch(s, 0, sc).empty());
  CHECK_THROWS_AS(align_stream_to_batch(s, s.size(), sc), InvalidArgument);
}
