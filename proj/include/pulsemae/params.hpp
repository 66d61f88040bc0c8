#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "pulsemae/autodiff.hpp"

namespace pmae {

template <typename T>
struct ParamEntry {
  std::string name;
  Var<T> var;
  bool decay_exempt = false;  // biases and normalization terms
  std::string role;
};

// Named view over a model's trainable tensors; the order is the registration
// order and is stable, which checkpointing and the optimizers rely on.
template <typename T>
class ParamSet {
 public:
  void add(std::string name, const Var<T>& v, bool decay_exempt,
           std::string role) {
    entries_.push_back({std::move(name), v, decay_exempt, std::move(role)});
  }

  const std::vector<ParamEntry<T>>& entries() const { return entries_; }
  size_t size() const { return entries_.size(); }
  const ParamEntry<T>& operator[](size_t i) const { return entries_[i]; }

  const ParamEntry<T>* find(const std::string& name) const {
    for (const auto& e : entries_)
      if (e.name == name) return &e;
    return nullptr;
  }

  void zero_grads() const {
    for (const auto& e : entries_) e.var->zero_grad();
  }

  double grad_norm() const {
    double s = 0;
    for (const auto& e : entries_) {
      if (!e.var->has_grad) continue;
      for (size_t i = 0; i < e.var->grad.numel(); ++i) {
        double g = e.var->grad[i];
        s += g * g;
      }
    }
    return std::sqrt(s);
  }

  // Scales all gradients so the global L2 norm is at most max_norm.
  // Returns the pre-clip norm.
  double clip_grad_norm(double max_norm) const {
    double norm = grad_norm();
    if (norm > max_norm && norm > 0) {
      T scale = static_cast<T>(max_norm / norm);
      for (const auto& e : entries_) {
        if (!e.var->has_grad) continue;
        for (size_t i = 0; i < e.var->grad.numel(); ++i)
          e.var->grad[i] *= scale;
      }
    }
    return norm;
  }

  size_t total_elements() const {
    size_t n = 0;
    for (const auto& e : entries_) n += e.var->value.numel();
    return n;
  }

 private:
  std::vector<ParamEntry<T>> entries_;
};

}  // namespace pmae
