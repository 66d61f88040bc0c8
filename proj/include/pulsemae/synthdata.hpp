#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "pulsemae/rng.hpp"
#include "pulsemae/student.hpp"

namespace pmae {

struct SceneSpec {
  size_t H = 32, W = 32, T = 32;
  double fs = 30.0;
  double face_cx = 0.5, face_cy = 0.5;    // ellipse center, frame fractions
  double face_ax = 0.32, face_ay = 0.40;  // ellipse semi-axes, fractions
  double skin_r = 0.80, skin_g = 0.55, skin_b = 0.45;
  double perf_forehead = 1.5, perf_cheek = 1.3;  // pulse multipliers
  double pulse_amp = 0.01;   // peak-to-peak fraction of base green
  double noise_sigma = 0.01;
  double drift_amp = 0.02;
  double drift_period_s = 8.0;
  double jitter_amp = 0.7;   // pixels
  double hr_lo = 60.0, hr_hi = 200.0;  // pediatric band

  void validate() const;
};

enum class OccluderKind : int {
  tube = 0,
  oxygen_mask,
  tape,
  hand,
  shadow,
  equipment,
  blanket
};
constexpr int kOccluderKinds = 7;

const char* occluder_kind_name(OccluderKind k);
OccluderKind occluder_kind_parse(const std::string& s);

struct OcclusionSpec {
  OccluderKind kind = OccluderKind::tube;
  std::vector<double> geometry;  // per-kind parameters, pixel units
  double color[3] = {0, 0, 0};   // shadow stores intensity in color[0]
  size_t onset = 0;
  size_t duration = 0;           // frames; duration/T in [0.2, 0.8]
  double retention = 0.7;        // per-frame retention probability
  uint64_t retention_key = 0;
};

// Static pixel footprint (frame-sized mask); shadows also carry a per-pixel
// attenuation factor.
struct Footprint {
  std::vector<uint8_t> mask;     // H*W
  std::vector<float> factor;     // shadows only; else empty
};

Footprint rasterize_footprint(const OcclusionSpec& spec, size_t H, size_t W);

// Whether the occluder is drawn on this frame (inside its window and
// retained by the per-frame 70%-consistency draw).
bool occluder_active(const OcclusionSpec& spec, size_t frame);

struct ClipMeta {
  std::vector<double> bvp;  // standardized ground truth, length T
  double hr_bpm = 0;
  double fs = 30.0;
  size_t face_x0 = 0, face_y0 = 0, face_x1 = 0, face_y1 = 0;  // half-open
  uint64_t seed = 0;
  std::vector<OcclusionSpec> occlusions;
  bool coverage_warning = false;
};

struct CurriculumSchedule {
  double ramp_start = 50, ramp_end = 150;  // epochs
  double prob_lo = 0.0, prob_hi = 0.5;
  double cov_lo = 0.10, cov_hi = 0.40;
};

// (occlusion probability, target face coverage) for an epoch; linear ramp
// clamped outside [ramp_start, ramp_end].
std::pair<double, double> schedule_at(double epoch,
                                      const CurriculumSchedule& sched);

std::pair<VideoClip, ClipMeta> gen_clip(uint64_t seed, const SceneSpec& spec);

// Samples and rasterizes occluders onto the clip in place. Ground-truth BVP
// in meta is never touched. rng should be keyed by (clip seed, epoch).
void apply_occlusions(VideoClip& clip, ClipMeta& meta, double epoch,
                      const CurriculumSchedule& sched, RngStream& rng);

// Allowed fill-color range per kind, the same table the rasterizer samples
// from. Shadows attenuate instead of filling and have no entry.
struct ColorRange {
  double lo[3], hi[3];
};
ColorRange occluder_color_range(OccluderKind k);

}  // namespace pmae
