#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <string>

#include "dllap/losses.hpp"
#include "dllap/verify.hpp"

using namespace dllap;
using Catch::Approx;

namespace {

constexpr double kPi = std::numbers::pi;

FrameTensor filled(std::size_t frames, std::size_t channels, float v) {
  FrameTensor t(frames, channels);
  std::fill(t.values.begin(), t.values.end(), v);
  return t;
}

FrameTensor ramp(std::size_t frames, std::size_t channels) {
  FrameTensor t(frames, channels);
  for (std::size_t i = 0; i < t.values.size(); ++i) t.values[i] = std::sin(0.37f * static_cast<float>(i));
  return t;
}

FeatureTrace trace_of(std::size_t blocks, float base) {
  FeatureTrace tr;
  for (Branch b : {Branch::amplitude, Branch::phase}) {
    auto& br = tr.branch(b);
    br.input_conv_out = filled(5, 3, base);
    for (std::size_t k = 0; k < blocks; ++k) br.block_outs.push_back(filled(5, 3, base + static_cast<float>(k)));
  }
  return tr;
}

}  // namespace

TEST_CASE("anti-wrapping") {
  CHECK(anti_wrap(0.0) == 0.0);
  CHECK(anti_wrap(3 * kPi) == Approx(kPi));
  CHECK(anti_wrap(-kPi / 3) == Approx(kPi / 3));
  CHECK(anti_wrap(2 * kPi) == Approx(0.0).margin(1e-12));
  for (double x : {-5.0, -0.4, 0.9, 2.5, 7.1}) {
    CHECK(anti_wrap(x + 2 * kPi) == Approx(anti_wrap(x)).margin(1e-12));
    CHECK(anti_wrap(-x) == Approx(anti_wrap(x)).margin(1e-12));
    CHECK(anti_wrap(x) >= 0.0);
    CHECK(anti_wrap(x) <= kPi);
  }
}

TEST_CASE("phase loss parts") {
  const auto target = ramp(6, 9);
  CHECK(phase_loss(target, target) == 0.0);

  FrameTensor shifted = target;
  for (float& v : shifted.values) v += static_cast<float>(kPi / 2);
  const auto p = phase_loss_parts(shifted, target);
  CHECK(p.instantaneous == Approx(kPi / 2).margin(1e-6));
  CHECK(p.group_delay == Approx(0.0).margin(1e-6));
  CHECK(p.inst_frequency == Approx(0.0).margin(1e-6));

  FrameTensor wrapped = target;
  for (float& v : wrapped.values) v += static_cast<float>(2 * kPi);
  CHECK(phase_loss(wrapped, target) == Approx(0.0).margin(1e-5));

  // A linear-in-frequency offset only shows up in IP and GD.
  FrameTensor tilt = target;
  for (std::size_t t = 0; t < 6; ++t) {
    for (std::size_t f = 0; f < 9; ++f) tilt.at(t, f) += 0.1f * static_cast<float>(f);
  }
  const auto q = phase_loss_parts(tilt, target);
  CHECK(q.group_delay == Approx(0.1).margin(1e-5));
  CHECK(q.inst_frequency == Approx(0.0).margin(1e-6));

  CHECK_THROWS_AS(phase_loss(ramp(6, 9), ramp(6, 8)), InvalidArgument);
}

TEST_CASE("amplitude loss is a mean squared error") {
  const auto a = ramp(4, 7);
  CHECK(amplitude_loss(a, a) == 0.0);
  FrameTensor b = a;
  for (float& v : b.values) v += 1.0f;
  CHECK(amplitude_loss(b, a) == Approx(1.0).margin(1e-6));
  for (float& v : b.values) v += 1.0f;
  CHECK(amplitude_loss(b, a) == Approx(4.0).margin(1e-5));
  CHECK_THROWS_AS(amplitude_loss(a, ramp(3, 7)), InvalidArgument);
}

TEST_CASE("stft consistency loss") {
  const SpectralConfig cfg;
  const auto wave = random_wave(2400, 3);
  const auto s = stft(wave, cfg);
  SpectralPair pred{s.amplitude, s.phase};
  for (float& v : pred.log_amplitude.values) v = std::log(v);
  CHECK(stft_loss(pred, wave, cfg) <= 1e-10);

  // Scaling the amplitude by 2 leaves residual a; by 3 leaves 2a.
  SpectralPair twice = pred, thrice = pred;
  for (float& v : twice.log_amplitude.values) v += static_cast<float>(std::log(2.0));
  for (float& v : thrice.log_amplitude.values) v += static_cast<float>(std::log(3.0));
  const double l2 = stft_loss(twice, wave, cfg);
  CHECK(l2 > 0.0);
  CHECK(stft_loss(thrice, wave, cfg) == Approx(4.0 * l2).epsilon(1e-4));

  SpectralPair short_pred{s.amplitude.head(3), s.phase.head(3)};
  CHECK_THROWS_AS(stft_loss(short_pred, wave, cfg), InvalidArgument);
}

TEST_CASE("waveform loss on mel spectra") {
  const SpectralConfig cfg;
  const auto wave = random_wave(3200, 5);
  CHECK(waveform_loss(wave, wave, cfg) == 0.0);
  const std::vector<float> silent(wave.size(), 0.0f);
  CHECK(waveform_loss(silent, wave, cfg) > 1.0);
  // Compared over the common length.
  std::vector<float> longer = wave;
  longer.resize(wave.size() + 500, 0.3f);
  CHECK(waveform_loss(longer, wave, cfg) == 0.0);
}

TEST_CASE("distillation loss") {
  const auto teacher = trace_of(4, 0.0f);
  CHECK(kd_loss(teacher, teacher, first_blocks(4)) == 0.0);

  const auto student = trace_of(4, 0.375f);
  // Per branch: input conv plus active blocks, each contributing 0.375.
  CHECK(kd_loss(teacher, student, {}) == Approx(2 * 0.375));
  CHECK(kd_loss(teacher, student, first_blocks(2)) == Approx(2 * 3 * 0.375));
  CHECK(kd_loss(teacher, student, first_blocks(4)) == Approx(2 * 5 * 0.375));
  CHECK(kd_loss(student, teacher, first_blocks(4)) == kd_loss(teacher, student, first_blocks(4)));
  CHECK(first_blocks(0).empty());
  CHECK(first_blocks(3) == BlockSet{1, 2, 3});

  CHECK_THROWS_AS(kd_loss(teacher, student, BlockSet{5}), InvalidArgument);
  CHECK_THROWS_AS(kd_loss(teacher, student, BlockSet{0}), InvalidArgument);
  CHECK_THROWS_AS(kd_loss(teacher, trace_of(3, 0.0f), {}), InvalidArgument);

  auto odd = student;
  odd.phase.block_outs[1] = filled(5, 4, 0.0f);
  try {
    kd_loss(teacher, odd, first_blocks(2));
    FAIL("expected InvalidArgument");
  } catch (const InvalidArgument& e) {
    CHECK(std::string(e.what()).find("pha.blocks.1") != std::string::npos);
  }
}

TEST_CASE("weighted total") {
  LossBreakdown parts;
  parts.L_A = parts.L_P = parts.L_S = parts.L_W = parts.L_KD = 1.0;
  const auto r = total_loss(parts, LossWeights{});
  CHECK(r.total == Approx(152.0));
  CHECK(r.L_A == 1.0);

  LossBreakdown zero;
  CHECK(total_loss(zero, LossWeights{}).total == 0.0);

  LossBreakdown neg = parts;
  neg.L_W = -0.1;
  CHECK_THROWS_AS(total_loss(neg, LossWeights{}), InvalidArgument);
  LossWeights w;
  w.lambda_KD = -1.0;
  CHECK_THROWS_AS(total_loss(parts, w), InvalidArgument);
}
