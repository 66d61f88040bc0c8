#include "pulsemae/signal.hpp"

#include <algorithm>
#include <cmath>
#include <complex>

#include "pulsemae/errors.hpp"

namespace pmae {

namespace {

size_t next_pow2(size_t n) {
  size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

// In-place iterative radix-2 FFT.
void fft(std::vector<std::complex<double>>& a) {
  size_t n = a.size();
  for (size_t i = 1, j = 0; i < n; ++i) {
    size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (size_t len = 2; len <= n; len <<= 1) {
    double ang = -2.0 * M_PI / double(len);
    std::complex<double> wl(std::cos(ang), std::sin(ang));
    for (size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (size_t j = 0; j < len / 2; ++j) {
        auto u = a[i + j];
        auto v = a[i + j + len / 2] * w;
        a[i + j] = u + v;
        a[i + j + len / 2] = u - v;
        w *= wl;
      }
    }
  }
}

}  // namespace

Spectrum power_spectrum(const std::vector<double>& x, double fs,
                        size_t pad_to) {
  size_t n = x.size();
  require(n >= 16, "power_spectrum needs at least 16 samples, got ", n);
  require(fs > 0, "sampling rate must be positive");
  size_t m = next_pow2(std::max(pad_to, n));
  double mean = 0;
  for (double v : x) mean += v;
  mean /= double(n);
  std::vector<std::complex<double>> buf(m, 0.0);
  for (size_t t = 0; t < n; ++t) {
    double w = 0.5 * (1.0 - std::cos(2.0 * M_PI * double(t) / double(n - 1)));
    buf[t] = (x[t] - mean) * w;
  }
  fft(buf);
  Spectrum s;
  size_t half = m / 2 + 1;
  s.freqs.resize(half);
  s.power.resize(half);
  for (size_t k = 0; k < half; ++k) {
    s.freqs[k] = double(k) * fs / double(m);
    s.power[k] = std::norm(buf[k]);
  }
  return s;
}

HrEstimate estimate_hr(const std::vector<double>& x, double fs,
                       size_t pad_to, double band_lo, double band_hi) {
  Spectrum s = power_spectrum(x, fs, pad_to);
  size_t lo = s.freqs.size(), hi = 0;
  for (size_t k = 0; k < s.freqs.size(); ++k) {
    if (s.freqs[k] >= band_lo && s.freqs[k] <= band_hi) {
      lo = std::min(lo, k);
      hi = std::max(hi, k);
    }
  }
  require(lo <= hi, "empty physiological band [", band_lo, ",", band_hi,
          "] Hz at fs = ", fs);
  size_t peak = lo;
  for (size_t k = lo; k <= hi; ++k)
    if (s.power[k] > s.power[peak]) peak = k;
  double f = s.freqs[peak];
  double df = s.freqs[1] - s.freqs[0];
  if (peak > 0 && peak + 1 < s.power.size()) {
    double y0 = s.power[peak - 1], y1 = s.power[peak], y2 = s.power[peak + 1];
    double denom = y0 - 2 * y1 + y2;
    if (std::abs(denom) > 1e-30) {
      double shift = 0.5 * (y0 - y2) / denom;
      shift = std::clamp(shift, -0.5, 0.5);
      f += shift * df;
    }
  }
  f = std::clamp(f, band_lo, band_hi);
  HrEstimate e;
  e.bpm = 60.0 * f;
  e.band_lo_hz = band_lo;
  e.band_hi_hz = band_hi;
  e.window_start = 0;
  e.window_len = x.size();
  return e;
}

std::vector<double> median_filter(const std::vector<double>& v, size_t k) {
  size_t n = v.size();
  if (n == 0) return v;
  k = std::min(k, n);
  if (k % 2 == 0) k = k > 1 ? k - 1 : 1;
  if (k <= 1) return v;
  std::vector<double> out(n);
  std::vector<double> win(k);
  long half = long(k) / 2;
  for (long i = 0; i < long(n); ++i) {
    for (long j = 0; j < long(k); ++j) {
      long idx = i - half + j;
      // reflect: -1 -> 1, n -> n-2
      while (idx < 0 || idx >= long(n)) {
        if (idx < 0) idx = -idx;
        if (idx >= long(n)) idx = 2 * long(n) - 2 - idx;
      }
      win[j] = v[idx];
    }
    std::nth_element(win.begin(), win.begin() + half, win.end());
    out[i] = win[half];
  }
  return out;
}

double sliding_hr(const std::vector<double>& x, double fs, size_t window,
                  size_t stride, size_t pad_to) {
  size_t n = x.size();
  size_t w = std::min(window, n);
  require(n >= w && w >= 16, "sliding_hr: signal of ", n,
          " samples is shorter than one usable window");
  std::vector<double> series;
  for (size_t start = 0; start + w <= n; start += stride) {
    std::vector<double> seg(x.begin() + start, x.begin() + start + w);
    series.push_back(estimate_hr(seg, fs, pad_to).bpm);
    if (start + w == n) break;
  }
  std::vector<double> filtered = median_filter(series, 5);
  double sum = 0;
  for (double v : filtered) sum += v;
  return sum / double(filtered.size());
}

double pearson_plain(const std::vector<double>& a,
                     const std::vector<double>& b, double eps) {
  require(a.size() == b.size() && a.size() >= 2,
          "pearson_plain needs equal lengths >= 2");
  double ma = 0, mb = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= double(a.size());
  mb /= double(b.size());
  double cov = 0, va = 0, vb = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    cov += (a[i] - ma) * (b[i] - mb);
    va += (a[i] - ma) * (a[i] - ma);
    vb += (b[i] - mb) * (b[i] - mb);
  }
  double n = double(a.size());
  return (cov / n) /
         ((std::sqrt(va / n) + eps) * (std::sqrt(vb / n) + eps));
}

std::vector<double> standardize(const std::vector<double>& x, double eps) {
  double mean = 0;
  for (double v : x) mean += v;
  mean /= std::max<size_t>(x.size(), 1);
  double var = 0;
  for (double v : x) var += (v - mean) * (v - mean);
  var /= std::max<size_t>(x.size(), 1);
  double sd = std::sqrt(var);
  std::vector<double> out(x.size());
  for (size_t i = 0; i < x.size(); ++i)
    out[i] = (x[i] - mean) / (sd + eps);
  return out;
}

HrMetrics metrics(const std::vector<double>& pred_hr,
                  const std::vector<double>& ref_hr,
                  const std::vector<std::vector<double>>& pred_sig,
                  const std::vector<std::vector<double>>& ref_sig) {
  require(pred_hr.size() == ref_hr.size() && !pred_hr.empty(),
          "metrics: HR lists must have equal length >= 1, got ",
          pred_hr.size(), " and ", ref_hr.size());
  require(pred_sig.size() == ref_sig.size(),
          "metrics: signal lists must have equal length");
  HrMetrics m;
  double se = 0;
  for (size_t i = 0; i < pred_hr.size(); ++i) {
    double d = pred_hr[i] - ref_hr[i];
    m.mae += std::abs(d);
    se += d * d;
  }
  m.mae /= double(pred_hr.size());
  m.rmse = std::sqrt(se / double(pred_hr.size()));
  if (!pred_sig.empty()) {
    for (size_t i = 0; i < pred_sig.size(); ++i)
      m.r += pearson_plain(pred_sig[i], ref_sig[i]);
    m.r /= double(pred_sig.size());
  }
  require(m.rmse >= m.mae - 1e-12, "RMSE < MAE violates the power-mean bound");
  return m;
}

}  // namespace pmae
