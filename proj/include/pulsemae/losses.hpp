#pragma once

#include <cmath>
#include <vector>

#include "pulsemae/autodiff.hpp"

namespace pmae {

template <typename T>
struct ReconLoss {
  Var<T> pixel;  // mean squared error over all masked-patch elements
  Var<T> corr;   // 1 - mean per-sample Pearson over flattened sequences
  Var<T> total;  // pixel + corr
};

// Reconstruction objective over masked patches only. Flattening order for
// the correlation term is (token canonical order, then intra-patch pixels),
// which is exactly the [B, M, P] storage order.
template <typename T>
ReconLoss<T> recon_loss(const Var<T>& reconstructed,
                        const Tensor<T>& targets) {
  const Shape& s = reconstructed->value.shape();
  require(s.size() == 3, "recon_loss expects [B,M,P], got ", shape_str(s));
  require(s == targets.shape(), "recon_loss shape mismatch: ", shape_str(s),
          " vs ", shape_str(targets.shape()));
  require(s[1] > 0, "recon_loss on an empty mask");
  size_t B = s[0], M = s[1], P = s[2];
  Var<T> tgt = constant(targets);
  Var<T> diff = sub(reconstructed, tgt);
  ReconLoss<T> out;
  out.pixel = mean_all(mul(diff, diff));
  Var<T> flat_pred = reshape(reconstructed, {B, M * P});
  Var<T> flat_tgt = reshape(tgt, {B, M * P});
  Var<T> rho = pearson_rows(flat_pred, flat_tgt);
  out.corr = add_scalar(neg(mean_all(rho)), T(1));
  out.total = add(out.pixel, out.corr);
  return out;
}

template <typename T>
struct DistillLoss {
  Var<T> per_sample;  // [B]: 1 - rho(student, teacher); the AMN reward
  Var<T> mean;        // batch mean used in the student loss
};

// Negative-Pearson alignment between student and teacher waveforms. Pearson
// is shift- and positive-scale-invariant, so per-sample standardization of
// either side leaves the value and gradients unchanged.
template <typename T>
DistillLoss<T> distill_loss(const Var<T>& student_wave,
                            const Tensor<T>& teacher_wave) {
  require(student_wave->value.shape() == teacher_wave.shape(),
          "distill_loss shape mismatch: ",
          shape_str(student_wave->value.shape()), " vs ",
          shape_str(teacher_wave.shape()));
  Var<T> rho = pearson_rows(student_wave, constant(teacher_wave));
  DistillLoss<T> out;
  out.per_sample = add_scalar(neg(rho), T(1));
  out.mean = mean_all(out.per_sample);
  return out;
}

// Differentiable spectral heart-rate estimate: soft-argmax over band-limited
// power at the same frequency grid the hard estimator uses. The per-sample
// temperature kappa = 0.05 * max(P) is treated as a constant.
template <typename T>
Var<T> hr_soft(const Var<T>& wave, double fs, double band_lo = 0.7,
               double band_hi = 3.0, size_t pad_to = 2048) {
  const Shape& s = wave->value.shape();
  require(s.size() == 2, "hr_soft expects [B,T], got ", shape_str(s));
  size_t B = s[0], L = s[1];
  require(L >= 2, "hr_soft needs at least 2 samples");
  std::vector<size_t> bins;
  for (size_t k = 0; k <= pad_to / 2; ++k) {
    double f = double(k) * fs / double(pad_to);
    if (f >= band_lo && f <= band_hi) bins.push_back(k);
  }
  require(!bins.empty(), "hr_soft: empty frequency band at fs = ", fs);
  size_t K = bins.size();
  Tensor<T> cosm({L, K}), sinm({L, K}), freq({K});
  Tensor<T> hann({size_t(1), L});
  for (size_t t = 0; t < L; ++t)
    hann[t] = static_cast<T>(
        0.5 * (1.0 - std::cos(2.0 * M_PI * double(t) / double(L - 1))));
  for (size_t j = 0; j < K; ++j) {
    freq[j] = static_cast<T>(double(bins[j]) * fs / double(pad_to));
    for (size_t t = 0; t < L; ++t) {
      double ang = 2.0 * M_PI * double(bins[j]) * double(t) / double(pad_to);
      cosm[t * K + j] = static_cast<T>(std::cos(ang));
      sinm[t * K + j] = static_cast<T>(std::sin(ang));
    }
  }
  Var<T> centered = sub(wave, reduce_mean(wave, {1}, true));
  Var<T> windowed = mul(centered, constant(hann));
  Var<T> re = matmul(windowed, constant(cosm));
  Var<T> im = matmul(windowed, constant(sinm));
  Var<T> power = add(mul(re, re), mul(im, im));
  Tensor<T> kappa({B, size_t(1)});
  for (size_t b = 0; b < B; ++b) {
    T mx = 0;
    for (size_t j = 0; j < K; ++j)
      mx = std::max(mx, power->value[b * K + j]);
    kappa[b] = std::max(static_cast<T>(0.05) * mx, T(1e-12));
  }
  Var<T> weights = softmax(div(power, constant(kappa)), -1);
  Var<T> f_mean = reduce_sum(mul(weights, constant(freq)), {1});
  return mul_scalar(f_mean, T(60));
}

}  // namespace pmae
