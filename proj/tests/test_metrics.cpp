#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <vector>

#include "dllap/metrics.hpp"
#include "dllap/verify.hpp"

using namespace dllap;
using Catch::Approx;

namespace {

std::vector<float> pulse_train(double hz, std::size_t n, double amp = 0.5) {
  std::vector<float> w(n, 0.0f);
  const double period = 16000.0 / hz;
  for (double p = 0.0; p < static_cast<double>(n); p += period) w[static_cast<std::size_t>(std::lround(p)) % n] = static_cast<float>(amp);
  return w;
}

std::vector<float> sine(double hz, std::size_t n, double amp = 0.5) {
  std::vector<float> w(n);
  for (std::size_t i = 0; i < n; ++i) w[i] = static_cast<float>(amp * std::sin(2 * std::numbers::pi * hz * i / 16000.0));
  return w;
}

std::vector<float> harmonic(double hz, std::size_t n) {
  std::vector<float> w(n, 0.0f);
  for (int h = 1; h <= 5; ++h) {
    const auto s = sine(hz * h, n, 0.3 / h);
    for (std::size_t i = 0; i < n; ++i) w[i] += s[i];
  }
  return w;
}

std::size_t voiced_count(const std::vector<F0Frame>& f) {
  std::size_t v = 0;
  for (const auto& x : f) v += x.f0_hz.has_value();
  return v;
}

}  // namespace

TEST_CASE("snr") {
  CHECK(snr_db(std::vector<float>{1, 0}, std::vector<float>{1, 0.1f}) == Approx(20.0).margin(1e-5));
  const auto x = random_wave(1000, 1);
  CHECK(snr_db(x, x) == kSnrCapDb);
  CHECK_THROWS_AS(snr_db(std::vector<float>(4, 0.0f), std::vector<float>(4, 1.0f)), InvalidArgument);
  CHECK_THROWS_AS(snr_db(x, std::vector<float>(999)), InvalidArgument);

  double prev = kSnrCapDb + 1.0;
  for (double level : {0.001, 0.01, 0.1, 1.0}) {
    auto y = x;
    const auto n = random_wave(x.size(), 9, level);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += n[i];
    const double s = snr_db(x, y);
    CHECK(s < prev);
    prev = s;
  }
}

TEST_CASE("log-amplitude and cepstral distances") {
  const SpectralConfig cfg;
  const auto x = random_wave(4000, 2);
  CHECK(las_rmse_db(x, x, cfg) == 0.0);
  CHECK(mcd_db(x, x, cfg) == 0.0);

  // Doubling the gain adds 20 log10 2 to every non-negligible bin; the mel
  // offset is constant so only c0 changes.
  auto loud = x;
  for (float& v : loud) v *= 2.0f;
  CHECK(las_rmse_db(x, loud, cfg) == Approx(20.0 * std::log10(2.0)).margin(1e-2));
  CHECK(mcd_db(x, loud, cfg) == Approx(0.0).margin(1e-3));
  CHECK(mcd_db(x, sine(700.0, 4000), cfg) > 1.0);
}

TEST_CASE("orthonormal DCT-II") {
  const std::vector<float> x{1.0f, 2.0f, -1.0f, 0.5f};
  const auto c = dct2_orthonormal(x, 4);
  // Hand-evaluated sums.
  CHECK(c[0] == Approx(2.5 / 2.0));
  double energy = 0.0;
  for (double v : c) energy += v * v;
  CHECK(energy == Approx(1.0 + 4.0 + 1.0 + 0.25));
  const std::vector<float> flat(6, 3.0f);
  const auto cf = dct2_orthonormal(flat, 6);
  CHECK(cf[0] == Approx(3.0 * std::sqrt(6.0)));
  for (std::size_t k = 1; k < 6; ++k) CHECK(cf[k] == Approx(0.0).margin(1e-12));
}

TEST_CASE("pitch tracking") {
  const SpectralConfig cfg;
  const auto pulses = pulse_train(100.0, 16000);
  const auto f = f0_track(pulses, cfg);
  REQUIRE(f.size() > 80);
  std::size_t good = 0;
  for (const auto& fr : f) good += fr.f0_hz && std::abs(*fr.f0_hz - 100.0) <= 1.0;
  CHECK(good >= f.size() * 9 / 10);

  const auto h = f0_track(harmonic(220.0, 16000), cfg);
  for (const auto& fr : h) {
    REQUIRE(fr.f0_hz);
    CHECK(*fr.f0_hz == Approx(220.0).margin(2.0));
  }

  const auto noise = f0_track(random_wave(16000, 4), cfg);
  CHECK(voiced_count(noise) * 10 <= noise.size());
  CHECK(voiced_count(f0_track(std::vector<float>(16000, 0.0f), cfg)) == 0);
  CHECK(f0_track(std::vector<float>(100, 0.1f), cfg).empty());
}

TEST_CASE("pitch error metrics") {
  const SpectralConfig cfg;
  const auto a = harmonic(100.0, 16000), b = harmonic(101.0, 16000);
  CHECK(f0_rmse_cents(a, a, cfg) == 0.0);
  CHECK(f0_rmse_cents(a, b, cfg) == Approx(1200.0 * std::log2(101.0 / 100.0)).margin(3.0));
  CHECK(vuv_error_pct(a, b, cfg) == 0.0);
  CHECK(vuv_error_pct(a, std::vector<float>(16000, 0.0f), cfg) == Approx(100.0));
  CHECK(f0_rmse_cents(a, std::vector<float>(16000, 0.0f), cfg) == 0.0);
}

TEST_CASE("metric report") {
  const SpectralConfig cfg;
  const auto a = harmonic(150.0, 8000);
  auto b = a;
  b.resize(7000);
  const auto m = evaluate_metrics(a, b, cfg);
  CHECK(m.snr_db == kSnrCapDb);
  CHECK(m.las_rmse_db == 0.0);
  CHECK(m.mcd_db == 0.0);
  CHECK(m.f0_rmse_cents == 0.0);
  CHECK(m.vuv_error_pct == 0.0);
}
