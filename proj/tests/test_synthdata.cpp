#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "pulsemae/signal.hpp"
#include "pulsemae/synthdata.hpp"
#include "pulsemae/teacher.hpp"

using namespace pmae;

namespace {

CurriculumSchedule always_occlude(double coverage) {
  CurriculumSchedule s;
  s.ramp_start = 0;
  s.ramp_end = 1;
  s.prob_lo = s.prob_hi = 1.0;
  s.cov_lo = s.cov_hi = coverage;
  return s;
}

size_t face_area(const ClipMeta& m) {
  return (m.face_x1 - m.face_x0) * (m.face_y1 - m.face_y0);
}

size_t face_overlap(const ClipMeta& m, const std::vector<uint8_t>& mask,
                    size_t W) {
  size_t n = 0;
  for (size_t y = m.face_y0; y < m.face_y1; ++y)
    for (size_t x = m.face_x0; x < m.face_x1; ++x)
      if (mask[y * W + x]) ++n;
  return n;
}

}  // namespace

TEST_CASE("all modulation off yields a perfectly static clip") {
  SceneSpec spec;
  spec.pulse_amp = 0;
  spec.noise_sigma = 0;
  spec.drift_amp = 0;
  spec.jitter_amp = 0;
  auto [clip, meta] = gen_clip(1, spec);
  size_t T = spec.T, HW = spec.H * spec.W;
  for (size_t c = 0; c < 3; ++c)
    for (size_t t = 1; t < T; ++t)
      for (size_t i = 0; i < HW; ++i)
        CHECK(clip.data[(c * T + t) * HW + i] ==
              clip.data[(c * T + 0) * HW + i]);
}

TEST_CASE("same seed reproduces the clip and meta bit for bit") {
  SceneSpec spec;
  auto [c1, m1] = gen_clip(77, spec);
  auto [c2, m2] = gen_clip(77, spec);
  CHECK(c1.data.raw() == c2.data.raw());
  CHECK(m1.hr_bpm == m2.hr_bpm);
  CHECK(m1.bvp == m2.bvp);
  CHECK(m1.face_x0 == m2.face_x0);
}

TEST_CASE("bvp fundamental matches the drawn heart rate") {
  SceneSpec spec;
  spec.T = 256;
  for (uint64_t seed : {1, 2, 3}) {
    auto [clip, meta] = gen_clip(seed, spec);
    double f = meta.hr_bpm / 60.0;
    // exact generator contract: first harmonic at f, sampled at fs
    std::vector<double> ref(meta.bvp.size());
    CHECK(meta.bvp.size() == 256);
    double peak = estimate_hr(meta.bvp, spec.fs).bpm;
    CHECK(std::abs(peak - meta.hr_bpm) < 1.0);
    (void)f;
    (void)ref;
  }
}

TEST_CASE("green face trace peaks at the pulse frequency") {
  SceneSpec spec;
  spec.T = 256;
  spec.noise_sigma = 0;
  spec.drift_amp = 0;  // sub-band nuisance, excluded from this oracle
  spec.hr_lo = spec.hr_hi = 90;
  auto [clip, meta] = gen_clip(5, spec);
  FaceRegion region{meta.face_x0, meta.face_y0, meta.face_x1, meta.face_y1};
  auto tr = extract_trace(clip, region);
  auto s = power_spectrum(tr.g, spec.fs);
  size_t peak = 0;
  for (size_t k = 0; k < s.power.size(); ++k)
    if (s.power[k] > s.power[peak]) peak = k;
  CHECK(s.freqs[peak] == doctest::Approx(1.5).epsilon(0.02));
}

TEST_CASE("schedule endpoints and midpoint") {
  CurriculumSchedule sched;
  auto [p0, c0] = schedule_at(50, sched);
  CHECK(p0 == doctest::Approx(0.0));
  CHECK(c0 == doctest::Approx(0.10));
  auto [p1, c1] = schedule_at(150, sched);
  CHECK(p1 == doctest::Approx(0.5));
  CHECK(c1 == doctest::Approx(0.40));
  auto [pm, cm] = schedule_at(100, sched);
  CHECK(pm == doctest::Approx(0.25));
  CHECK(cm == doctest::Approx(0.25));
  auto [pe, ce] = schedule_at(1000, sched);
  CHECK(pe == doctest::Approx(0.5));
  CHECK(ce == doctest::Approx(0.40));
  CHECK_THROWS_AS(schedule_at(-1, sched), ValidationError);
}

TEST_CASE("zero probability leaves the clip untouched") {
  SceneSpec spec;
  auto [clip, meta] = gen_clip(9, spec);
  auto before = clip.data.raw();
  CurriculumSchedule sched;  // epoch below ramp start -> prob 0
  RngStream rng(9, streams::kOcclusion);
  apply_occlusions(clip, meta, 10, sched, rng);
  CHECK(clip.data.raw() == before);
  CHECK(meta.occlusions.empty());
}

TEST_CASE("occlusion determinism and bvp integrity") {
  SceneSpec spec;
  auto [c1, m1] = gen_clip(21, spec);
  auto [c2, m2] = gen_clip(21, spec);
  auto sched = always_occlude(0.3);
  RngStream r1(21, streams::kOcclusion, 5);
  RngStream r2(21, streams::kOcclusion, 5);
  auto bvp_before = m1.bvp;
  apply_occlusions(c1, m1, 3, sched, r1);
  apply_occlusions(c2, m2, 3, sched, r2);
  CHECK(c1.data.raw() == c2.data.raw());
  CHECK(m1.occlusions.size() == m2.occlusions.size());
  CHECK(m1.bvp == bvp_before);
}

TEST_CASE("coverage oracle over 100 seeded clips") {
  SceneSpec spec;
  double target = 0.30;
  auto sched = always_occlude(target);
  size_t with_occluders = 0;
  for (uint64_t seed = 0; seed < 100; ++seed) {
    auto [clip, meta] = gen_clip(seed, spec);
    RngStream rng(seed, streams::kOcclusion);
    apply_occlusions(clip, meta, 1, sched, rng);
    if (meta.coverage_warning || meta.occlusions.empty()) continue;
    ++with_occluders;
    std::vector<uint8_t> unionmask(spec.H * spec.W, 0);
    for (const auto& sp : meta.occlusions) {
      auto fp = rasterize_footprint(sp, spec.H, spec.W);
      for (size_t i = 0; i < unionmask.size(); ++i)
        if (fp.mask[i]) unionmask[i] = 1;
    }
    double frac = double(face_overlap(meta, unionmask, spec.W)) /
                  double(face_area(meta));
    CHECK(frac >= target - 0.05);
    CHECK(frac <= target + 0.05);
  }
  CHECK(with_occluders >= 80);  // placement succeeds almost always
}

TEST_CASE("per-frame coverage never exceeds target plus headroom") {
  SceneSpec spec;
  double target = 0.35;
  auto sched = always_occlude(target);
  for (uint64_t seed = 100; seed < 120; ++seed) {
    auto [clip, meta] = gen_clip(seed, spec);
    RngStream rng(seed, streams::kOcclusion);
    apply_occlusions(clip, meta, 1, sched, rng);
    std::vector<Footprint> fps;
    for (const auto& sp : meta.occlusions)
      fps.push_back(rasterize_footprint(sp, spec.H, spec.W));
    for (size_t t = 0; t < spec.T; ++t) {
      std::vector<uint8_t> active(spec.H * spec.W, 0);
      for (size_t i = 0; i < fps.size(); ++i) {
        if (!occluder_active(meta.occlusions[i], t)) continue;
        for (size_t j = 0; j < active.size(); ++j)
          if (fps[i].mask[j]) active[j] = 1;
      }
      double frac = double(face_overlap(meta, active, spec.W)) /
                    double(face_area(meta));
      CHECK(frac <= target + 0.15);
    }
  }
}

TEST_CASE("occluder colors stay in their declared ranges") {
  SceneSpec spec;
  auto sched = always_occlude(0.35);
  size_t checked_pixels = 0;
  for (uint64_t seed = 200; seed < 240; ++seed) {
    auto [clip, meta] = gen_clip(seed, spec);
    RngStream rng(seed, streams::kOcclusion);
    apply_occlusions(clip, meta, 1, sched, rng);
    std::vector<Footprint> fps;
    for (const auto& sp : meta.occlusions)
      fps.push_back(rasterize_footprint(sp, spec.H, spec.W));
    for (size_t i = 0; i < meta.occlusions.size(); ++i) {
      const auto& sp = meta.occlusions[i];
      if (sp.kind == OccluderKind::shadow) continue;
      auto range = occluder_color_range(sp.kind);
      for (int c = 0; c < 3; ++c) {
        CHECK(sp.color[c] >= range.lo[c] - 1e-9);
        CHECK(sp.color[c] <= range.hi[c] + 1e-9);
      }
      if (sp.kind == OccluderKind::tube ||
          sp.kind == OccluderKind::equipment) {
        CHECK(sp.color[0] == sp.color[1]);
        CHECK(sp.color[1] == sp.color[2]);
      }
      // pixels covered by this occluder alone must equal its color exactly
      for (size_t t = sp.onset; t < sp.onset + sp.duration; ++t) {
        if (!occluder_active(sp, t)) continue;
        for (size_t px = 0; px < spec.H * spec.W; ++px) {
          if (!fps[i].mask[px]) continue;
          bool solo = true;
          for (size_t j = 0; j < meta.occlusions.size(); ++j) {
            if (j == i) continue;
            if (fps[j].mask[px] && j > i &&
                occluder_active(meta.occlusions[j], t))
              solo = false;
          }
          if (!solo) continue;
          ++checked_pixels;
          for (int c = 0; c < 3; ++c)
            CHECK(clip.data[(size_t(c) * spec.T + t) * spec.H * spec.W +
                            px] == doctest::Approx(sp.color[c]));
          if (checked_pixels > 20000) return;  // plenty of evidence
        }
      }
    }
  }
  CHECK(checked_pixels > 1000);
}

TEST_CASE("shadows only attenuate") {
  SceneSpec spec;
  spec.noise_sigma = 0;
  auto [clip, meta] = gen_clip(31, spec);
  auto before = clip.data;
  OcclusionSpec sp;
  sp.kind = OccluderKind::shadow;
  sp.geometry = {16, 16, 1, 0, 10, 0.4};
  sp.onset = 0;
  sp.duration = spec.T;
  sp.retention = 1.1;  // always retained for this check
  auto fp = rasterize_footprint(sp, spec.H, spec.W);
  size_t HW = spec.H * spec.W;
  for (size_t t = 0; t < spec.T; ++t)
    for (size_t px = 0; px < HW; ++px)
      if (fp.mask[px])
        for (int c = 0; c < 3; ++c) {
          auto idx = (size_t(c) * spec.T + t) * HW + px;
          clip.data[idx] *= fp.factor[px];
          CHECK(clip.data[idx] <= before[idx] + 1e-7);
        }
}

TEST_CASE("durations stay inside the allowed fraction band") {
  SceneSpec spec;
  auto sched = always_occlude(0.4);
  for (uint64_t seed = 300; seed < 330; ++seed) {
    auto [clip, meta] = gen_clip(seed, spec);
    RngStream rng(seed, streams::kOcclusion);
    apply_occlusions(clip, meta, 1, sched, rng);
    for (const auto& sp : meta.occlusions) {
      double frac = double(sp.duration) / double(spec.T);
      CHECK(frac >= 0.2 - 1e-9);
      CHECK(frac <= 0.8 + 1e-9);
      CHECK(sp.onset + sp.duration <= spec.T);
    }
  }
}

TEST_CASE("occluder kind names round trip") {
  for (int i = 0; i < kOccluderKinds; ++i) {
    auto k = static_cast<OccluderKind>(i);
    CHECK(occluder_kind_parse(occluder_kind_name(k)) == k);
  }
  CHECK_THROWS_AS(occluder_kind_parse("pillow"), ValidationError);
}

TEST_CASE("invalid scene specs are rejected") {
  SceneSpec bad;
  bad.face_ax = 0.7;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  SceneSpec bad2;
  bad2.T = 1;
  CHECK_THROWS_AS(gen_clip(1, bad2), ValidationError);
}
