#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "pulsemae/signal.hpp"
#include "pulsemae/synthdata.hpp"
#include "pulsemae/teacher.hpp"

using namespace pmae;

namespace {

RgbTrace synthetic_trace(size_t T, double hz, double fs, double green_amp,
                         double noise, uint64_t seed) {
  RngStream rng(seed, streams::kTest);
  RgbTrace tr;
  tr.r.resize(T);
  tr.g.resize(T);
  tr.b.resize(T);
  for (size_t t = 0; t < T; ++t) {
    double m = std::sin(2 * M_PI * hz * double(t) / fs);
    tr.r[t] = 0.65 + 0.5 * green_amp * m + noise * rng.gaussian();
    tr.g[t] = 0.55 + green_amp * m + noise * rng.gaussian();
    tr.b[t] = 0.45 + 0.3 * green_amp * m + noise * rng.gaussian();
  }
  return tr;
}

SceneSpec clean_scene(size_t T) {
  SceneSpec s;
  s.T = T;
  s.noise_sigma = 0;
  s.drift_amp = 0;
  s.jitter_amp = 0;
  return s;
}

}  // namespace

TEST_CASE("diff normalization: constant clip maps to zeros") {
  Tensor<float> clip = Tensor<float>::full({3, 5, 4, 4}, 0.5f);
  auto d = diff_normalize(clip);
  CHECK(d.shape() == Shape{3, 4, 4, 4});
  for (size_t i = 0; i < d.numel(); ++i) CHECK(d[i] == 0.0f);
}

TEST_CASE("diff normalization ratio and length contract") {
  Tensor<float> clip({1, 2, 1, 2});
  clip[0] = 1.0f;   // pixel A, frame 0
  clip[1] = 1.0f;   // pixel B, frame 0
  clip[2] = 1.02f;  // pixel A, frame 1
  clip[3] = 0.98f;  // pixel B, frame 1
  // pre-standardization d = [+0.0099, -0.0099]; standardized to [+1, -1]
  auto d = diff_normalize(clip);
  CHECK(d.shape() == Shape{1, 1, 1, 2});
  CHECK(d[0] == doctest::Approx(1.0).epsilon(1e-4));
  CHECK(d[1] == doctest::Approx(-1.0).epsilon(1e-4));

  Tensor<float> single({3, 1, 4, 4});
  CHECK_THROWS_AS(diff_normalize(single), ValidationError);
}

TEST_CASE("chrom recovers a green-channel tone") {
  auto tr = synthetic_trace(192, 1.5, 30, 0.01, 0, 1);
  // constant R and B for the stated example
  std::fill(tr.r.begin(), tr.r.end(), 0.65);
  std::fill(tr.b.begin(), tr.b.end(), 0.45);
  auto s = chrom(tr);
  CHECK(s.size() == 192);
  double bpm = estimate_hr(s, 30).bpm;
  CHECK(std::abs(bpm - 90.0) < 3.0);
}

TEST_CASE("chrom and pos are zero on a constant trace") {
  RgbTrace tr;
  tr.r.assign(96, 0.6);
  tr.g.assign(96, 0.5);
  tr.b.assign(96, 0.4);
  for (double v : chrom(tr)) CHECK(v == 0.0);
  for (double v : pos(tr)) CHECK(v == 0.0);
}

TEST_CASE("single-window translation invariance") {
  auto tr32 = synthetic_trace(32, 1.5, 30, 0.01, 0, 2);
  auto base = chrom(tr32);
  RgbTrace shifted = tr32;
  for (auto* ch : {&shifted.r, &shifted.g, &shifted.b})
    for (auto& v : *ch) v += 0.07;
  auto moved = chrom(shifted);
  for (size_t i = 0; i < base.size(); ++i)
    CHECK(std::abs(base[i] - moved[i]) < 1e-6);

  auto tr48 = synthetic_trace(48, 1.5, 30, 0.01, 0, 3);
  auto pbase = pos(tr48);
  RgbTrace pshift = tr48;
  for (auto* ch : {&pshift.r, &pshift.g, &pshift.b})
    for (auto& v : *ch) v += 0.07;
  auto pmoved = pos(pshift);
  for (size_t i = 0; i < pbase.size(); ++i)
    CHECK(std::abs(pbase[i] - pmoved[i]) < 1e-6);
}

TEST_CASE("pos recovers the pulse from a generated clip") {
  auto spec = clean_scene(192);
  spec.hr_lo = spec.hr_hi = 120;  // pin the rate
  auto [clip, meta] = gen_clip(42, spec);
  auto y = teacher_forward(clip, &meta, TeacherKind::pos);
  CHECK(y.size() == 192);
  CHECK(std::abs(estimate_hr(y, 30).bpm - 120.0) < 3.0);
}

TEST_CASE("chrom recovers the pulse from a generated clip") {
  auto spec = clean_scene(192);
  spec.hr_lo = spec.hr_hi = 90;
  auto [clip, meta] = gen_clip(43, spec);
  auto y = teacher_forward(clip, &meta, TeacherKind::chrom);
  CHECK(std::abs(estimate_hr(y, 30).bpm - 90.0) < 3.0);
}

TEST_CASE("pos and chrom agree on clean clips") {
  auto spec = clean_scene(192);
  for (uint64_t seed : {7, 8, 9}) {
    auto [clip, meta] = gen_clip(seed, spec);
    auto yp = teacher_forward(clip, &meta, TeacherKind::pos);
    auto yc = teacher_forward(clip, &meta, TeacherKind::chrom);
    double hp = estimate_hr(yp, 30).bpm;
    double hc = estimate_hr(yc, 30).bpm;
    CHECK(std::abs(hp - hc) < 2.0);
  }
}

TEST_CASE("oracle teacher returns the generator waveform") {
  auto spec = clean_scene(64);
  auto [clip, meta] = gen_clip(5, spec);
  auto y = teacher_forward(clip, &meta, TeacherKind::oracle);
  CHECK(y.size() == 64);
  for (size_t t = 0; t < y.size(); ++t)
    CHECK(y[t] == doctest::Approx(meta.bvp[t]).epsilon(1e-6));
}

TEST_CASE("oracle without metadata is a structured error") {
  auto spec = clean_scene(64);
  auto [clip, meta] = gen_clip(6, spec);
  CHECK_THROWS_AS(teacher_forward(clip, nullptr, TeacherKind::oracle),
                  ValidationError);
}

TEST_CASE("pos teacher stays total on occluded clips") {
  SceneSpec spec = clean_scene(96);
  spec.noise_sigma = 0.01;
  auto [clip, meta] = gen_clip(11, spec);
  CurriculumSchedule sched;
  sched.ramp_start = 0;
  sched.ramp_end = 1;
  sched.prob_lo = sched.prob_hi = 1.0;
  sched.cov_lo = sched.cov_hi = 0.35;
  RngStream rng(11, streams::kOcclusion);
  apply_occlusions(clip, meta, 1.0, sched, rng);
  auto y = teacher_forward(clip, &meta, TeacherKind::pos);
  CHECK(y.size() == 96);
  for (double v : y) CHECK(std::isfinite(v));
}

TEST_CASE("teacher outputs are standardized") {
  auto spec = clean_scene(128);
  spec.noise_sigma = 0.01;
  auto [clip, meta] = gen_clip(13, spec);
  for (auto kind : {TeacherKind::oracle, TeacherKind::pos,
                    TeacherKind::chrom}) {
    auto y = teacher_forward(clip, &meta, kind);
    double mean = 0;
    for (double v : y) mean += v;
    mean /= double(y.size());
    double var = 0;
    for (double v : y) var += (v - mean) * (v - mean);
    double sd = std::sqrt(var / double(y.size()));
    CHECK(std::abs(mean) < 1e-6);
    CHECK(sd == doctest::Approx(1.0).epsilon(1e-4));
  }
}

TEST_CASE("centered crop fallback when no metadata rectangle exists") {
  auto spec = clean_scene(96);
  auto [clip, meta] = gen_clip(17, spec);
  auto region = centered_region(32, 32, 0.6);
  CHECK(region.x1 - region.x0 == 20);
  auto y = teacher_forward(clip, nullptr, TeacherKind::pos);
  CHECK(y.size() == 96);
}
