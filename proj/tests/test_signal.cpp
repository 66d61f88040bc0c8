#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "pulsemae/losses.hpp"
#include "pulsemae/rng.hpp"
#include "pulsemae/signal.hpp"

using namespace pmae;

namespace {

std::vector<double> sine(double hz, double fs, size_t n, double amp = 1.0,
                         double phase = 0.0) {
  std::vector<double> x(n);
  for (size_t t = 0; t < n; ++t)
    x[t] = amp * std::sin(2 * M_PI * hz * double(t) / fs + phase);
  return x;
}

}  // namespace

TEST_CASE("power spectrum peaks at the tone frequency") {
  auto x = sine(1.5, 30, 128);
  auto s = power_spectrum(x, 30);
  size_t peak = 0;
  for (size_t k = 1; k < s.power.size(); ++k)
    if (s.power[k] > s.power[peak]) peak = k;
  double df = s.freqs[1] - s.freqs[0];
  CHECK(std::abs(s.freqs[peak] - 1.5) <= df);
}

// Monte-Carlo calibration: in-band power bins of Hann-windowed white noise
// are near-exponential with ~10 independent looks, so a 10x-median peak
// shows up in a few percent of realizations. Frozen at the calibrated rate
// for these seeds.
TEST_CASE("white noise rarely shows a dominant in-band bin") {
  int dominated = 0;
  for (uint64_t seed = 0; seed < 100; ++seed) {
    RngStream rng(seed, streams::kTest);
    std::vector<double> x(128);
    for (auto& v : x) v = rng.gaussian();
    auto s = power_spectrum(x, 30);
    std::vector<double> vals;
    for (size_t k = 1; k < s.power.size(); ++k) {
      if (s.freqs[k] < 0.7 || s.freqs[k] > 3.0) continue;
      vals.push_back(s.power[k]);
    }
    std::nth_element(vals.begin(), vals.begin() + vals.size() / 2,
                     vals.end());
    double median = vals[vals.size() / 2];
    double mx = *std::max_element(vals.begin(), vals.end());
    if (mx > 10 * median) ++dominated;
  }
  CHECK(dominated <= 8);
}

TEST_CASE("constant input gives an all-zero spectrum") {
  std::vector<double> x(64, 3.25);
  auto s = power_spectrum(x, 30);
  for (double p : s.power) CHECK(p == doctest::Approx(0.0).epsilon(1e-18));
}

TEST_CASE("too-short input is a structured error") {
  std::vector<double> x(15, 0.0);
  CHECK_THROWS_AS(power_spectrum(x, 30), ValidationError);
}

TEST_CASE("hr estimates for pure tones") {
  CHECK(estimate_hr(sine(1.0, 30, 128), 30).bpm ==
        doctest::Approx(60).epsilon(1.0 / 60));
  CHECK(estimate_hr(sine(1.5, 30, 128), 30).bpm ==
        doctest::Approx(90).epsilon(1.0 / 90));
  CHECK(estimate_hr(sine(2.5, 30, 128), 30).bpm ==
        doctest::Approx(150).epsilon(1.0 / 150));
}

TEST_CASE("hr estimate is invariant to positive scale and offset") {
  auto x = sine(1.7, 30, 128);
  double base = estimate_hr(x, 30).bpm;
  std::vector<double> scaled(x), shifted(x);
  for (auto& v : scaled) v *= 37.5;
  for (auto& v : shifted) v += 4.2;
  CHECK(estimate_hr(scaled, 30).bpm == doctest::Approx(base).epsilon(1e-9));
  CHECK(estimate_hr(shifted, 30).bpm == doctest::Approx(base).epsilon(1e-9));
}

TEST_CASE("parabolic interpolation stays within one bin") {
  for (uint64_t seed = 1; seed <= 20; ++seed) {
    RngStream rng(seed, streams::kTest);
    double hz = rng.uniform(0.8, 2.9);
    auto x = sine(hz, 30, 128, 1.0, rng.uniform(0, 6.28));
    for (auto& v : x) v += 0.1 * rng.gaussian();
    auto s = power_spectrum(x, 30);
    size_t peak = 0;
    double df = s.freqs[1] - s.freqs[0];
    for (size_t k = 0; k < s.power.size(); ++k) {
      if (s.freqs[k] < 0.7 || s.freqs[k] > 3.0) continue;
      if (s.power[k] > s.power[peak]) peak = k;
    }
    double f = estimate_hr(x, 30).bpm / 60.0;
    CHECK(std::abs(f - s.freqs[peak]) <= df);
  }
}

TEST_CASE("sliding estimate matches the single window on stationary input") {
  auto x = sine(1.8, 30, 256);
  double single = estimate_hr(std::vector<double>(x.begin(), x.begin() + 128),
                              30)
                      .bpm;
  CHECK(std::abs(sliding_hr(x, 30) - single) <= 0.5);
}

TEST_CASE("median filter suppresses one corrupted window") {
  auto clean = sine(1.5, 30, 256);
  double ref = sliding_hr(clean, 30);
  auto noisy = clean;
  RngStream rng(5, streams::kTest);
  // burst confined to the first window's exclusive samples
  for (size_t t = 0; t < 24; ++t)
    noisy[t] += 5.0 * std::sin(2 * M_PI * 2.8 * double(t) / 30.0) +
                rng.gaussian();
  CHECK(std::abs(sliding_hr(noisy, 30) - ref) <= 1.5);
}

TEST_CASE("median filter degrades gracefully below five windows") {
  auto x = sine(2.0, 30, 160);  // two windows
  double hr = sliding_hr(x, 30);
  CHECK(hr == doctest::Approx(120).epsilon(0.02));

  std::vector<double> series{100};
  CHECK(median_filter(series, 5) == series);
}

TEST_CASE("metric closed forms") {
  std::vector<std::vector<double>> sig{{1, 2, 3, 4}};
  auto ident = metrics({90}, {90}, sig, sig);
  CHECK(ident.mae == 0);
  CHECK(ident.rmse == 0);
  CHECK(ident.r == doctest::Approx(1.0).epsilon(1e-6));

  auto off = metrics({92, 82}, {90, 80}, {}, {});
  CHECK(off.mae == doctest::Approx(2));
  CHECK(off.rmse == doctest::Approx(2));

  auto m = metrics({80, 100}, {90, 90}, {}, {});
  CHECK(m.mae == doctest::Approx(10));
  CHECK(m.rmse == doctest::Approx(10));
  CHECK(m.rmse >= m.mae);

  CHECK_THROWS_AS(metrics({1, 2}, {1}, {}, {}), ValidationError);
}

TEST_CASE("soft spectral estimate tracks the hard estimator") {
  for (double hz : {1.0, 1.5, 2.5}) {
    auto x = sine(hz, 30, 128);
    Tensor<double> wave({1, 128});
    for (size_t t = 0; t < 128; ++t) wave[t] = x[t];
    auto soft = hr_soft(constant(wave), 30.0);
    double hard = estimate_hr(x, 30).bpm;
    CHECK(std::abs(soft->value[0] - hard) < 1.0);
  }
}

TEST_CASE("soft estimate is differentiable") {
  RngStream rng(7, streams::kTest);
  Tensor<double> wave({1, 32});
  for (size_t t = 0; t < 32; ++t)
    wave[t] = std::sin(2 * M_PI * 1.5 * double(t) / 30.0) +
              0.1 * rng.gaussian();
  auto w = parameter(wave);
  auto soft = hr_soft(w, 30.0);
  backward(soft);
  CHECK(w->grad_or_zero().all_finite());
}
