#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "pulsemae/params.hpp"

namespace pmae {

struct OptimConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.05;  // decoupled; skipped for exempt parameters
};

// AdamW over one parameter set. Decay applies to every parameter except
// those registered decay-exempt (biases and normalization terms).
template <typename T>
class AdamW {
 public:
  AdamW() = default;
  AdamW(const ParamSet<T>* params, OptimConfig cfg)
      : params_(params), cfg_(cfg) {
    m_.reserve(params->size());
    v_.reserve(params->size());
    for (const auto& e : params->entries()) {
      m_.emplace_back(e.var->value.shape());
      v_.emplace_back(e.var->value.shape());
    }
  }

  void step(double lr) {
    ++t_;
    double bc1 = 1.0 - std::pow(cfg_.beta1, double(t_));
    double bc2 = 1.0 - std::pow(cfg_.beta2, double(t_));
    for (size_t i = 0; i < params_->size(); ++i) {
      const auto& e = (*params_)[i];
      Tensor<T>& p = e.var->value;
      Tensor<T> g = e.var->grad_or_zero();
      T* pp = p.data();
      T* mp = m_[i].data();
      T* vp = v_[i].data();
      const T* gp = g.data();
      double decay = e.decay_exempt ? 0.0 : cfg_.weight_decay;
      for (size_t j = 0; j < p.numel(); ++j) {
        double gj = gp[j];
        double m = cfg_.beta1 * mp[j] + (1 - cfg_.beta1) * gj;
        double v = cfg_.beta2 * vp[j] + (1 - cfg_.beta2) * gj * gj;
        mp[j] = static_cast<T>(m);
        vp[j] = static_cast<T>(v);
        double mhat = m / bc1;
        double vhat = v / bc2;
        pp[j] = static_cast<T>(
            pp[j] - lr * (mhat / (std::sqrt(vhat) + cfg_.eps) +
                          decay * pp[j]));
      }
    }
  }

  int64_t steps() const { return t_; }
  void set_steps(int64_t t) { t_ = t; }
  size_t size() const { return m_.size(); }
  Tensor<T>& moment1(size_t i) { return m_[i]; }
  Tensor<T>& moment2(size_t i) { return v_[i]; }
  const Tensor<T>& moment1(size_t i) const { return m_[i]; }
  const Tensor<T>& moment2(size_t i) const { return v_[i]; }
  const OptimConfig& config() const { return cfg_; }

 private:
  const ParamSet<T>* params_ = nullptr;
  OptimConfig cfg_;
  std::vector<Tensor<T>> m_, v_;
  int64_t t_ = 0;
};

}  // namespace pmae
