#include "pulsemae/teacher.hpp"

#include <algorithm>
#include <cmath>

#include "pulsemae/errors.hpp"
#include "pulsemae/signal.hpp"

namespace pmae {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr size_t kChromWindow = 32;
constexpr size_t kPosWindow = 48;  // 1.6 s at 30 fps

double window_mean(const std::vector<double>& v, size_t s, size_t n) {
  double m = 0;
  for (size_t i = 0; i < n; ++i) m += v[s + i];
  return m / double(n);
}

double stddev(const std::vector<double>& v) {
  double m = 0;
  for (double x : v) m += x;
  m /= double(v.size());
  double s = 0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / double(v.size()));
}

}  // namespace

const char* teacher_kind_name(TeacherKind k) {
  switch (k) {
    case TeacherKind::oracle: return "oracle";
    case TeacherKind::pos: return "pos";
    case TeacherKind::chrom: return "chrom";
  }
  return "?";
}

TeacherKind teacher_kind_parse(const std::string& s) {
  if (s == "oracle") return TeacherKind::oracle;
  if (s == "pos") return TeacherKind::pos;
  if (s == "chrom") return TeacherKind::chrom;
  fail("unknown teacher kind: ", s, " (expected oracle|pos|chrom)");
}

FaceRegion centered_region(size_t H, size_t W, double fraction) {
  require(fraction > 0 && fraction <= 1, "crop fraction must be in (0,1]");
  FaceRegion r;
  r.x0 = size_t(std::lround(double(W) * (1 - fraction) / 2));
  r.x1 = size_t(std::lround(double(W) * (1 + fraction) / 2));
  r.y0 = size_t(std::lround(double(H) * (1 - fraction) / 2));
  r.y1 = size_t(std::lround(double(H) * (1 + fraction) / 2));
  return r;
}

RgbTrace extract_trace(const VideoClip& clip, const FaceRegion& region) {
  const Shape& s = clip.data.shape();
  require(s.size() == 4 && s[0] == 3, "extract_trace expects [3,T,H,W]");
  size_t T = s[1], H = s[2], W = s[3];
  require(region.x0 < region.x1 && region.x1 <= W && region.y0 < region.y1 &&
              region.y1 <= H,
          "face region out of frame bounds");
  RgbTrace tr;
  tr.r.resize(T);
  tr.g.resize(T);
  tr.b.resize(T);
  double n = double((region.x1 - region.x0) * (region.y1 - region.y0));
  for (size_t t = 0; t < T; ++t)
    for (int c = 0; c < 3; ++c) {
      double acc = 0;
      for (size_t y = region.y0; y < region.y1; ++y)
        for (size_t x = region.x0; x < region.x1; ++x)
          acc += clip.data[((size_t(c) * T + t) * H + y) * W + x];
      (c == 0 ? tr.r : c == 1 ? tr.g : tr.b)[t] = acc / n;
    }
  return tr;
}

Tensor<float> diff_normalize(const Tensor<float>& clip) {
  const Shape& s = clip.shape();
  require(s.size() == 4, "diff_normalize expects [C,T,H,W]");
  size_t C = s[0], T = s[1], H = s[2], W = s[3];
  require(T >= 2, "diff_normalize needs at least 2 frames, got ", T);
  Tensor<float> out({C, T - 1, H, W});
  for (size_t c = 0; c < C; ++c)
    for (size_t t = 0; t + 1 < T; ++t)
      for (size_t i = 0; i < H * W; ++i) {
        double a = clip[(c * T + t) * H * W + i];
        double b = clip[(c * T + t + 1) * H * W + i];
        out[(c * (T - 1) + t) * H * W + i] =
            static_cast<float>((b - a) / (b + a + 1e-6));
      }
  double mean = 0;
  for (size_t i = 0; i < out.numel(); ++i) mean += out[i];
  mean /= double(out.numel());
  double var = 0;
  for (size_t i = 0; i < out.numel(); ++i)
    var += (out[i] - mean) * (out[i] - mean);
  double sd = std::sqrt(var / double(out.numel()));
  for (size_t i = 0; i < out.numel(); ++i)
    out[i] = static_cast<float>((out[i] - mean) / (sd + 1e-8));
  return out;
}

std::vector<double> chrom(const RgbTrace& trace) {
  size_t T = trace.size();
  require(T >= kChromWindow, "chrom needs at least ", kChromWindow,
          " frames, got ", T);
  std::vector<size_t> starts;
  for (size_t s = 0; s + kChromWindow <= T; s += kChromWindow / 2)
    starts.push_back(s);
  if (starts.back() + kChromWindow < T) starts.push_back(T - kChromWindow);

  std::vector<double> out(T, 0), wsum(T, 0);
  std::vector<double> hann(kChromWindow);
  for (size_t i = 0; i < kChromWindow; ++i)
    hann[i] = 0.5 * (1 - std::cos(2 * kPi * double(i) /
                                  double(kChromWindow - 1)));
  std::vector<double> X(kChromWindow), Y(kChromWindow);
  for (size_t s : starts) {
    double mr = window_mean(trace.r, s, kChromWindow);
    double mg = window_mean(trace.g, s, kChromWindow);
    double mb = window_mean(trace.b, s, kChromWindow);
    if (mr < 1e-9 || mg < 1e-9 || mb < 1e-9) continue;
    for (size_t i = 0; i < kChromWindow; ++i) {
      double rn = trace.r[s + i] / mr;
      double gn = trace.g[s + i] / mg;
      double bn = trace.b[s + i] / mb;
      X[i] = 3 * rn - 2 * gn;
      Y[i] = 1.5 * rn + gn - 1.5 * bn;
    }
    double sy = stddev(Y);
    if (sy < 1e-12) continue;  // skip window with zero contribution
    double alpha = stddev(X) / sy;
    double mean_s = 0;
    for (size_t i = 0; i < kChromWindow; ++i) mean_s += X[i] - alpha * Y[i];
    mean_s /= double(kChromWindow);
    for (size_t i = 0; i < kChromWindow; ++i) {
      double v = X[i] - alpha * Y[i] - mean_s;
      out[s + i] += hann[i] * v;
      wsum[s + i] += hann[i];
    }
  }
  for (size_t t = 0; t < T; ++t)
    out[t] = wsum[t] > 1e-12 ? out[t] / wsum[t] : 0.0;
  return standardize(out);
}

std::vector<double> pos(const RgbTrace& trace) {
  size_t T = trace.size();
  size_t L = std::min<size_t>(kPosWindow, T);
  require(L >= 4, "pos needs at least 4 frames, got ", T);
  std::vector<double> out(T, 0);
  std::vector<double> s1(L), s2(L);
  for (size_t s = 0; s + L <= T; ++s) {
    double mr = window_mean(trace.r, s, L);
    double mg = window_mean(trace.g, s, L);
    double mb = window_mean(trace.b, s, L);
    if (mr < 1e-9 || mg < 1e-9 || mb < 1e-9) continue;
    for (size_t i = 0; i < L; ++i) {
      double rn = trace.r[s + i] / mr;
      double gn = trace.g[s + i] / mg;
      double bn = trace.b[s + i] / mb;
      s1[i] = gn - bn;
      s2[i] = gn + bn - 2 * rn;
    }
    double sd2 = stddev(s2);
    double alpha = sd2 < 1e-12 ? 0.0 : stddev(s1) / sd2;
    double mh = 0;
    for (size_t i = 0; i < L; ++i) mh += s1[i] + alpha * s2[i];
    mh /= double(L);
    for (size_t i = 0; i < L; ++i) out[s + i] += s1[i] + alpha * s2[i] - mh;
  }
  return standardize(out);
}

std::vector<double> teacher_forward(const VideoClip& clip,
                                    const ClipMeta* meta, TeacherKind kind,
                                    double center_crop_fraction) {
  const Shape& s = clip.data.shape();
  require(s.size() == 4 && s[0] == 3, "teacher_forward expects [3,T,H,W]");
  size_t T = s[1], H = s[2], W = s[3];
  if (kind == TeacherKind::oracle) {
    require(meta != nullptr && !meta->bvp.empty(),
            "oracle teacher needs generator metadata with the ground-truth "
            "BVP");
    std::vector<double> y = meta->bvp;
    if (y.size() != T) {  // linear resample to clip length
      std::vector<double> r(T);
      for (size_t t = 0; t < T; ++t) {
        double u = double(t) * double(y.size() - 1) /
                   double(std::max<size_t>(T - 1, 1));
        size_t i0 = size_t(u);
        size_t i1 = std::min(i0 + 1, y.size() - 1);
        r[t] = y[i0] + (u - double(i0)) * (y[i1] - y[i0]);
      }
      y = std::move(r);
    }
    return standardize(y);
  }
  FaceRegion region;
  if (meta != nullptr && meta->face_x1 > meta->face_x0 &&
      meta->face_y1 > meta->face_y0) {
    region = {meta->face_x0, meta->face_y0, meta->face_x1, meta->face_y1};
  } else {
    region = centered_region(H, W, center_crop_fraction);
  }
  RgbTrace trace = extract_trace(clip, region);
  std::vector<double> y =
      kind == TeacherKind::pos ? pos(trace) : chrom(trace);
  y.resize(T, 0.0);  // pad/trim to clip length
  return standardize(y);
}

}  // namespace pmae
