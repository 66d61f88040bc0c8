#pragma once

#include <cstddef>
#include <vector>

namespace pmae {

struct Spectrum {
  std::vector<double> freqs;
  std::vector<double> power;
};

// Mean-removed, Hann-windowed, zero-padded real FFT power spectrum.
// pad_to is rounded up to the next power of two >= max(pad_to, x.size()).
Spectrum power_spectrum(const std::vector<double>& x, double fs,
                        size_t pad_to = 2048);

struct HrEstimate {
  double bpm = 0;
  double band_lo_hz = 0.7;
  double band_hi_hz = 3.0;
  size_t window_start = 0;
  size_t window_len = 0;
};

// FFT peak within [0.7, 3.0] Hz with 3-point parabolic peak interpolation.
HrEstimate estimate_hr(const std::vector<double>& x, double fs,
                       size_t pad_to = 2048, double band_lo = 0.7,
                       double band_hi = 3.0);

// Windows of min(128, T) frames, stride 32; per-window estimate_hr; median
// filter (kernel 5, reflect edges, degrading gracefully below 5 windows);
// arithmetic mean of the filtered series.
double sliding_hr(const std::vector<double>& x, double fs,
                  size_t window = 128, size_t stride = 32,
                  size_t pad_to = 2048);

// Median filter with reflect edge policy; k is clipped to the series length
// and forced odd.
std::vector<double> median_filter(const std::vector<double>& v, size_t k);

// Plain (non-differentiable) Pearson with the same eps guard as the graph op.
double pearson_plain(const std::vector<double>& a,
                     const std::vector<double>& b, double eps = 1e-8);

// Zero mean, unit variance; a constant input comes back all zero.
std::vector<double> standardize(const std::vector<double>& x,
                                double eps = 1e-8);

struct HrMetrics {
  double mae = 0;
  double rmse = 0;
  double r = 0;
};

// MAE / RMSE over heart-rate lists; R is the per-clip Pearson between
// predicted and reference signals, averaged over clips.
HrMetrics metrics(const std::vector<double>& pred_hr,
                  const std::vector<double>& ref_hr,
                  const std::vector<std::vector<double>>& pred_sig,
                  const std::vector<std::vector<double>>& ref_sig);

}  // namespace pmae
