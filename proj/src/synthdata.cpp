#include "pulsemae/synthdata.hpp"

#include <algorithm>
#include <cmath>

#include "pulsemae/errors.hpp"
#include "pulsemae/signal.hpp"

namespace pmae {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kRefResolution = 224.0;  // absolute pixel sizes scale by
                                          // min(H,W)/224
constexpr double kBackground = 0.35;
constexpr double kCoverageHeadroom = 0.04;  // accept-time overshoot bound
constexpr int kMaxAttempts = 50;
constexpr uint64_t kRetentionStream = 77;

double px_scale(size_t H, size_t W) {
  return double(std::min(H, W)) / kRefResolution;
}

}  // namespace

void SceneSpec::validate() const {
  require(H >= 8 && W >= 8, "frame must be at least 8x8, got ", H, "x", W);
  require(T >= 2, "clip length must be >= 2, got ", T);
  require(fs > 0, "frame rate must be positive");
  require(face_ax > 0 && face_ay > 0 && face_ax < 0.5 && face_ay < 0.5,
          "face semi-axes must lie in (0, 0.5) of the frame");
  require(pulse_amp >= 0 && pulse_amp < 0.5, "pulse amplitude out of range");
  require(noise_sigma >= 0, "noise sigma must be >= 0");
  require(hr_lo >= 30 && hr_hi <= 240 && hr_lo <= hr_hi,
          "heart-rate range invalid: [", hr_lo, ",", hr_hi, "]");
}

const char* occluder_kind_name(OccluderKind k) {
  switch (k) {
    case OccluderKind::tube: return "tube";
    case OccluderKind::oxygen_mask: return "oxygen-mask";
    case OccluderKind::tape: return "tape";
    case OccluderKind::hand: return "hand";
    case OccluderKind::shadow: return "shadow";
    case OccluderKind::equipment: return "equipment";
    case OccluderKind::blanket: return "blanket";
  }
  return "?";
}

OccluderKind occluder_kind_parse(const std::string& s) {
  for (int i = 0; i < kOccluderKinds; ++i)
    if (s == occluder_kind_name(static_cast<OccluderKind>(i)))
      return static_cast<OccluderKind>(i);
  fail("unknown occluder kind: ", s);
}

ColorRange occluder_color_range(OccluderKind k) {
  switch (k) {
    case OccluderKind::tube:  // high-intensity white
      return {{200.0 / 255, 200.0 / 255, 200.0 / 255}, {1.0, 1.0, 1.0}};
    case OccluderKind::oxygen_mask:  // pale green-gray
      return {{0.60, 0.70, 0.70}, {0.90, 0.95, 0.95}};
    case OccluderKind::tape:  // beige
      return {{0.78, 0.74, 0.66}, {0.96, 0.94, 0.90}};
    case OccluderKind::hand:  // skin tone or blue glove
      return {{0.12, 0.20, 0.28}, {0.90, 0.75, 0.85}};
    case OccluderKind::shadow:  // multiplicative, no fill color
      return {{0, 0, 0}, {1, 1, 1}};
    case OccluderKind::equipment:  // grayscale
      return {{100.0 / 255, 100.0 / 255, 100.0 / 255},
              {180.0 / 255, 180.0 / 255, 180.0 / 255}};
    case OccluderKind::blanket:  // pastel
      return {{0.45, 0.45, 0.55}, {0.85, 0.85, 0.95}};
  }
  return {{0, 0, 0}, {1, 1, 1}};
}

std::pair<double, double> schedule_at(double epoch,
                                      const CurriculumSchedule& sched) {
  require(epoch >= 0, "epoch must be >= 0, got ", epoch);
  double span = std::max(sched.ramp_end - sched.ramp_start, 1e-9);
  double u = std::clamp((epoch - sched.ramp_start) / span, 0.0, 1.0);
  double prob = sched.prob_lo + (sched.prob_hi - sched.prob_lo) * u;
  double cov = sched.cov_lo + (sched.cov_hi - sched.cov_lo) * u;
  return {prob, cov};
}

std::pair<VideoClip, ClipMeta> gen_clip(uint64_t seed, const SceneSpec& spec) {
  spec.validate();
  RngStream rng(seed, streams::kSceneDraw);
  size_t H = spec.H, W = spec.W, T = spec.T;

  ClipMeta meta;
  meta.seed = seed;
  meta.fs = spec.fs;
  meta.hr_bpm = rng.uniform(spec.hr_lo, spec.hr_hi);
  double phase = rng.uniform(0, 2 * kPi);
  double f = meta.hr_bpm / 60.0;

  std::vector<double> raw(T);
  for (size_t t = 0; t < T; ++t) {
    double tt = double(t) / spec.fs;
    raw[t] = std::sin(2 * kPi * f * tt) +
             0.3 * std::sin(4 * kPi * f * tt + phase);
  }
  meta.bvp = standardize(raw);
  double lo = meta.bvp[0], hi = meta.bvp[0];
  for (double v : meta.bvp) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  double halfspan = std::max((hi - lo) / 2, 1e-9);
  // peak-to-peak of (1 + pulse_amp/2 * bvp/halfspan) is exactly pulse_amp
  std::vector<double> mod(T);
  for (size_t t = 0; t < T; ++t)
    mod[t] = 0.5 * spec.pulse_amp * meta.bvp[t] / halfspan;

  std::vector<long> jx(T), jy(T);
  for (size_t t = 0; t < T; ++t) {
    jx[t] = std::lround(spec.jitter_amp * rng.uniform(-1, 1));
    jy[t] = std::lround(spec.jitter_amp * rng.uniform(-1, 1));
  }

  double cx = spec.face_cx * W, cy = spec.face_cy * H;
  double ax = spec.face_ax * W, ay = spec.face_ay * H;
  long margin = std::lround(std::ceil(spec.jitter_amp));
  meta.face_x0 = size_t(std::clamp<long>(std::lround(cx - ax) - margin, 0,
                                         long(W)));
  meta.face_x1 = size_t(std::clamp<long>(std::lround(cx + ax) + margin + 1,
                                         0, long(W)));
  meta.face_y0 = size_t(std::clamp<long>(std::lround(cy - ay) - margin, 0,
                                         long(H)));
  meta.face_y1 = size_t(std::clamp<long>(std::lround(cy + ay) + margin + 1,
                                         0, long(H)));

  VideoClip clip;
  clip.fs = spec.fs;
  clip.data = Tensor<float>({3, T, H, W});
  double base[3] = {spec.skin_r, spec.skin_g, spec.skin_b};
  double chan_gain[3] = {0.5, 1.0, 0.3};  // R,B follow G at reduced depth
  for (size_t t = 0; t < T; ++t) {
    double drift =
        spec.drift_amp *
        std::sin(2 * kPi * double(t) / (spec.fs * spec.drift_period_s));
    double fx = cx + double(jx[t]), fy = cy + double(jy[t]);
    for (size_t y = 0; y < H; ++y)
      for (size_t x = 0; x < W; ++x) {
        double ex = (double(x) - fx) / ax, ey = (double(y) - fy) / ay;
        double r2 = ex * ex + ey * ey;
        double perf = 0;
        if (r2 <= 1.0) {
          perf = 1.0;
          if (ey < -0.35) perf = spec.perf_forehead;
          else if (ey > 0.05 && ey < 0.6 && std::abs(ex) > 0.35)
            perf = spec.perf_cheek;
        }
        for (int c = 0; c < 3; ++c) {
          double v = r2 <= 1.0
                         ? base[c] * (1.0 + chan_gain[c] * perf * mod[t])
                         : kBackground;
          clip.data[((size_t(c) * T + t) * H + y) * W + x] =
              static_cast<float>(v + drift);
        }
      }
  }
  if (spec.noise_sigma > 0)
    for (size_t i = 0; i < clip.data.numel(); ++i)
      clip.data[i] += static_cast<float>(spec.noise_sigma * rng.gaussian());
  for (size_t i = 0; i < clip.data.numel(); ++i)
    clip.data[i] = std::clamp(clip.data[i], 0.0f, 1.0f);
  return {std::move(clip), std::move(meta)};
}

namespace {

void stamp_disc(std::vector<uint8_t>& mask, size_t H, size_t W, double px,
                double py, double radius) {
  long r = std::max<long>(1, std::lround(radius));
  for (long y = std::lround(py) - r; y <= std::lround(py) + r; ++y)
    for (long x = std::lround(px) - r; x <= std::lround(px) + r; ++x) {
      if (y < 0 || y >= long(H) || x < 0 || x >= long(W)) continue;
      double dx = double(x) - px, dy = double(y) - py;
      if (dx * dx + dy * dy <= radius * radius) mask[y * W + x] = 1;
    }
}

}  // namespace

Footprint rasterize_footprint(const OcclusionSpec& spec, size_t H, size_t W) {
  Footprint fp;
  fp.mask.assign(H * W, 0);
  const auto& g = spec.geometry;
  switch (spec.kind) {
    case OccluderKind::tube: {
      // quadratic Bezier {x0,y0,cx,cy,x1,y1,thickness}
      double th = g[6];
      size_t steps = 4 * (H + W);
      for (size_t i = 0; i <= steps; ++i) {
        double u = double(i) / double(steps);
        double a = (1 - u) * (1 - u), b = 2 * u * (1 - u), c = u * u;
        double px = a * g[0] + b * g[2] + c * g[4];
        double py = a * g[1] + b * g[3] + c * g[5];
        stamp_disc(fp.mask, H, W, px, py, th / 2);
      }
      break;
    }
    case OccluderKind::oxygen_mask:
    case OccluderKind::hand: {
      // rotated ellipse {cx,cy,ax,ay,angle}
      double ca = std::cos(g[4]), sa = std::sin(g[4]);
      for (size_t y = 0; y < H; ++y)
        for (size_t x = 0; x < W; ++x) {
          double dx = double(x) - g[0], dy = double(y) - g[1];
          double u = (dx * ca + dy * sa) / g[2];
          double v = (-dx * sa + dy * ca) / g[3];
          if (u * u + v * v <= 1.0) fp.mask[y * W + x] = 1;
        }
      break;
    }
    case OccluderKind::tape: {
      // rotated rectangle {cx,cy,half_a,half_b,angle}
      double ca = std::cos(g[4]), sa = std::sin(g[4]);
      for (size_t y = 0; y < H; ++y)
        for (size_t x = 0; x < W; ++x) {
          double dx = double(x) - g[0], dy = double(y) - g[1];
          double u = dx * ca + dy * sa, v = -dx * sa + dy * ca;
          if (std::abs(u) <= g[2] && std::abs(v) <= g[3])
            fp.mask[y * W + x] = 1;
        }
      break;
    }
    case OccluderKind::shadow: {
      // gradient strip {px,py,nx,ny,width,intensity}
      fp.factor.assign(H * W, 1.0f);
      for (size_t y = 0; y < H; ++y)
        for (size_t x = 0; x < W; ++x) {
          double d = (double(x) - g[0]) * g[2] + (double(y) - g[1]) * g[3];
          if (d >= 0 && d <= g[4]) {
            fp.mask[y * W + x] = 1;
            double s = d / g[4];
            fp.factor[y * W + x] =
                static_cast<float>(g[5] + (1.0 - g[5]) * s);
          }
        }
      break;
    }
    case OccluderKind::equipment: {
      // axis-aligned block {x0,y0,x1,y1} half-open
      for (size_t y = size_t(std::max(0.0, g[1]));
           y < std::min(double(H), g[3]); ++y)
        for (size_t x = size_t(std::max(0.0, g[0]));
             x < std::min(double(W), g[2]); ++x)
          fp.mask[y * W + x] = 1;
      break;
    }
    case OccluderKind::blanket: {
      // cubic edge {a0,a1,a2,a3,from_bottom}: fill between the curve and the
      // bottom (or top) frame edge
      bool from_bottom = g[4] > 0.5;
      for (size_t x = 0; x < W; ++x) {
        double u = double(x) / double(std::max<size_t>(W - 1, 1));
        double edge = g[0] + g[1] * u + g[2] * u * u + g[3] * u * u * u;
        long ye = std::lround(edge);
        if (from_bottom) {
          for (long y = std::max<long>(ye, 0); y < long(H); ++y)
            fp.mask[y * W + x] = 1;
        } else {
          for (long y = 0; y <= std::min<long>(ye, long(H) - 1); ++y)
            fp.mask[y * W + x] = 1;
        }
      }
      break;
    }
  }
  return fp;
}

bool occluder_active(const OcclusionSpec& spec, size_t frame) {
  if (frame < spec.onset || frame >= spec.onset + spec.duration) return false;
  double u = double(RngStream::mix(spec.retention_key, kRetentionStream,
                                   frame) >>
              11) *
             0x1.0p-53;
  return u < spec.retention;
}

namespace {

OcclusionSpec sample_occluder(RngStream& rng, const ClipMeta& meta, size_t H,
                              size_t W, size_t T) {
  OcclusionSpec sp;
  sp.kind = static_cast<OccluderKind>(rng.next_u64() % kOccluderKinds);
  double sc = px_scale(H, W);
  double fw = double(meta.face_x1 - meta.face_x0);
  double fcx = (double(meta.face_x0) + double(meta.face_x1)) / 2;
  double fcy = (double(meta.face_y0) + double(meta.face_y1)) / 2;
  switch (sp.kind) {
    case OccluderKind::tube: {
      auto edge_point = [&](double u) -> std::pair<double, double> {
        int side = int(u * 4) % 4;
        double v = rng.uniform(0, 1);
        switch (side) {
          case 0: return {v * W, 0.0};
          case 1: return {v * W, double(H) - 1};
          case 2: return {0.0, v * H};
          default: return {double(W) - 1, v * H};
        }
      };
      auto [x0, y0] = edge_point(rng.uniform(0, 1));
      auto [x1, y1] = edge_point(rng.uniform(0, 1));
      double cxp = rng.uniform(0.2, 0.8) * W;
      double cyp = rng.uniform(0.2, 0.8) * H;
      double th = std::max(1.0, std::round(rng.uniform(3, 8) * sc));
      sp.geometry = {x0, y0, cxp, cyp, x1, y1, th};
      double v = rng.uniform(200.0 / 255, 1.0);
      sp.color[0] = sp.color[1] = sp.color[2] = v;
      break;
    }
    case OccluderKind::oxygen_mask: {
      double axp = 0.35 * fw;  // ellipse spans 70% of the face width
      double ayp = axp * rng.uniform(0.6, 0.9);
      double mcx = fcx + rng.uniform(-0.05, 0.05) * fw;
      double mcy = fcy + rng.uniform(0.05, 0.25) * fw;
      sp.geometry = {mcx, mcy, std::max(axp, 1.0), std::max(ayp, 1.0),
                     rng.uniform(-0.2, 0.2)};
      double v = rng.uniform(0.70, 0.90);
      sp.color[0] = v * 0.95;
      sp.color[1] = v;
      sp.color[2] = v;
      break;
    }
    case OccluderKind::tape: {
      double ha = std::max(1.0, std::round(rng.uniform(10, 25) * sc)) / 2;
      double hb = std::max(1.0, std::round(rng.uniform(15, 40) * sc)) / 2;
      double tx = rng.uniform(double(meta.face_x0), double(meta.face_x1));
      double ty = rng.uniform(double(meta.face_y0), double(meta.face_y1));
      sp.geometry = {tx, ty, ha, hb, rng.uniform(0, kPi)};
      double v = rng.uniform(0.80, 0.95);
      sp.color[0] = v;
      sp.color[1] = v * 0.97;
      sp.color[2] = v * 0.92;
      break;
    }
    case OccluderKind::hand: {
      int side = int(rng.next_u64() % 4);
      double hx, hy;
      switch (side) {
        case 0: hx = rng.uniform(0, 1) * W; hy = 0; break;
        case 1: hx = rng.uniform(0, 1) * W; hy = double(H) - 1; break;
        case 2: hx = 0; hy = rng.uniform(0, 1) * H; break;
        default: hx = double(W) - 1; hy = rng.uniform(0, 1) * H; break;
      }
      double axp = rng.uniform(0.15, 0.30) * std::min(H, W);
      double ayp = rng.uniform(0.25, 0.45) * std::min(H, W);
      sp.geometry = {hx, hy, std::max(axp, 1.0), std::max(ayp, 1.0),
                     rng.uniform(0, kPi)};
      if (rng.uniform(0, 1) < 0.5) {  // skin tone
        double r = rng.uniform(0.72, 0.88);
        sp.color[0] = r;
        sp.color[1] = r * 0.75;
        sp.color[2] = r * 0.62;
      } else {  // blue glove
        sp.color[0] = rng.uniform(0.15, 0.30);
        sp.color[1] = sp.color[0] + 0.10;
        sp.color[2] = rng.uniform(0.55, 0.80);
      }
      break;
    }
    case OccluderKind::shadow: {
      double ang = rng.uniform(0, 2 * kPi);
      double nx = std::cos(ang), ny = std::sin(ang);
      double pxp = rng.uniform(0, 1) * W, pyp = rng.uniform(0, 1) * H;
      double width = rng.uniform(0.2, 0.5) * std::min(H, W);
      double intensity = rng.uniform(0.3, 0.7);
      sp.geometry = {pxp, pyp, nx, ny, std::max(width, 1.0), intensity};
      sp.color[0] = intensity;
      break;
    }
    case OccluderKind::equipment: {
      double bw = rng.uniform(0.15, 0.30) * W;
      double bh = rng.uniform(0.30, 0.80) * H;
      bool left = rng.uniform(0, 1) < 0.5;
      double x0 = left ? 0.0 : double(W) - bw;
      double y0 = rng.uniform(0, double(H) - bh);
      sp.geometry = {x0, y0, x0 + bw, y0 + bh};
      double v = rng.uniform(100.0 / 255, 180.0 / 255);
      sp.color[0] = sp.color[1] = sp.color[2] = v;
      break;
    }
    case OccluderKind::blanket: {
      bool from_bottom = rng.uniform(0, 1) < 0.5;
      double base = from_bottom ? rng.uniform(0.55, 0.85) * H
                                : rng.uniform(0.15, 0.45) * H;
      sp.geometry = {base, rng.uniform(-0.2, 0.2) * H,
                     rng.uniform(-0.3, 0.3) * H, rng.uniform(-0.2, 0.2) * H,
                     from_bottom ? 1.0 : 0.0};
      sp.color[0] = rng.uniform(0.45, 0.85);
      sp.color[1] = rng.uniform(0.45, 0.85);
      sp.color[2] = rng.uniform(0.60, 0.95);
      break;
    }
  }
  double durfrac = rng.uniform(0.2, 0.8);
  size_t dur = std::clamp<size_t>(size_t(std::lround(durfrac * double(T))),
                                  size_t(std::ceil(0.2 * double(T))),
                                  size_t(std::floor(0.8 * double(T))));
  dur = std::max<size_t>(dur, 1);
  sp.duration = dur;
  sp.onset = size_t(rng.uniform(0, 1) * double(T - dur + 1));
  sp.onset = std::min(sp.onset, T - dur);
  sp.retention = 0.7;
  sp.retention_key = rng.next_u64();
  return sp;
}

}  // namespace

void apply_occlusions(VideoClip& clip, ClipMeta& meta, double epoch,
                      const CurriculumSchedule& sched, RngStream& rng) {
  auto [prob, coverage] = schedule_at(epoch, sched);
  size_t H = clip.data.shape()[2], W = clip.data.shape()[3];
  size_t T = clip.data.shape()[1];
  if (rng.uniform(0, 1) >= prob) return;

  size_t fx0 = meta.face_x0, fx1 = meta.face_x1;
  size_t fy0 = meta.face_y0, fy1 = meta.face_y1;
  size_t face_px = (fx1 - fx0) * (fy1 - fy0);
  require(face_px > 0, "empty face rectangle in clip meta");

  std::vector<uint8_t> covered(H * W, 0);
  size_t covered_face = 0;
  auto face_gain = [&](const Footprint& fp) {
    size_t gain = 0;
    for (size_t y = fy0; y < fy1; ++y)
      for (size_t x = fx0; x < fx1; ++x)
        if (fp.mask[y * W + x] && !covered[y * W + x]) ++gain;
    return gain;
  };

  std::vector<std::pair<OcclusionSpec, Footprint>> placed;
  size_t target = size_t(std::lround(coverage * double(face_px)));
  size_t headroom =
      size_t(std::lround((coverage + kCoverageHeadroom) * double(face_px)));
  int attempts = 0;
  while (covered_face < target && attempts < kMaxAttempts) {
    ++attempts;
    OcclusionSpec sp = sample_occluder(rng, meta, H, W, T);
    Footprint fp = rasterize_footprint(sp, H, W);
    size_t gain = face_gain(fp);
    if (gain == 0) continue;
    if (covered_face + gain > headroom) continue;
    for (size_t i = 0; i < covered.size(); ++i)
      if (fp.mask[i]) covered[i] = 1;
    covered_face += gain;
    placed.emplace_back(std::move(sp), std::move(fp));
  }
  if (covered_face < target) meta.coverage_warning = true;

  for (auto& [sp, fp] : placed) {
    for (size_t t = sp.onset; t < sp.onset + sp.duration; ++t) {
      if (!occluder_active(sp, t)) continue;
      for (size_t y = 0; y < H; ++y)
        for (size_t x = 0; x < W; ++x) {
          if (!fp.mask[y * W + x]) continue;
          for (int c = 0; c < 3; ++c) {
            float& px = clip.data[((size_t(c) * T + t) * H + y) * W + x];
            if (sp.kind == OccluderKind::shadow)
              px *= fp.factor[y * W + x];
            else
              px = static_cast<float>(sp.color[c]);
          }
        }
    }
    meta.occlusions.push_back(sp);
  }
}

}  // namespace pmae
