#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "pulsemae/errors.hpp"
#include "pulsemae/rng.hpp"

namespace pmae {

using Shape = std::vector<size_t>;

inline size_t shape_numel(const Shape& s) {
  size_t n = 1;
  for (size_t d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ']';
  return os.str();
}

// Dense row-major tensor. Training runs in float, gradient-check suites in
// double; both instantiations share this header.
template <typename T>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape)
      : shape_(std::move(shape)), data_(shape_numel(shape_), T(0)) {}
  Tensor(Shape shape, std::vector<T> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    require(data_.size() == shape_numel(shape_), "tensor data size ",
            data_.size(), " does not match shape ", shape_str(shape_));
  }

  static Tensor full(Shape shape, T v) {
    Tensor t(std::move(shape));
    std::fill(t.data_.begin(), t.data_.end(), v);
    return t;
  }
  static Tensor scalar(T v) { return Tensor({}, {v}); }
  static Tensor vec(std::vector<T> v) {
    Shape s{v.size()};
    return Tensor(std::move(s), std::move(v));
  }
  static Tensor uniform(Shape shape, RngStream& rng, T lo, T hi) {
    Tensor t(std::move(shape));
    for (auto& x : t.data_) x = static_cast<T>(rng.uniform(lo, hi));
    return t;
  }
  static Tensor gaussian(Shape shape, RngStream& rng, T mean = 0, T sd = 1) {
    Tensor t(std::move(shape));
    for (auto& x : t.data_) x = static_cast<T>(mean + sd * rng.gaussian());
    return t;
  }

  const Shape& shape() const { return shape_; }
  size_t rank() const { return shape_.size(); }
  size_t dim(size_t i) const { return shape_[i]; }
  size_t numel() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  T& operator[](size_t i) { return data_[i]; }
  const T& operator[](size_t i) const { return data_[i]; }
  std::vector<T>& raw() { return data_; }
  const std::vector<T>& raw() const { return data_; }

  Tensor reshaped(Shape s) const {
    require(shape_numel(s) == numel(), "reshape ", shape_str(shape_), " -> ",
            shape_str(s), ": element count mismatch");
    Tensor t;
    t.shape_ = std::move(s);
    t.data_ = data_;
    return t;
  }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> t;
    t = Tensor<U>(shape_);
    for (size_t i = 0; i < data_.size(); ++i)
      t[i] = static_cast<U>(data_[i]);
    return t;
  }

  bool all_finite() const {
    for (T v : data_)
      if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  T sum() const { return std::accumulate(data_.begin(), data_.end(), T(0)); }
  T mean() const { return empty() ? T(0) : sum() / static_cast<T>(numel()); }
  T max_abs() const {
    T m = 0;
    for (T v : data_) m = std::max(m, static_cast<T>(std::abs(v)));
    return m;
  }

 private:
  Shape shape_;
  std::vector<T> data_;
};

// ---- broadcasting (trailing-dimension rules) ----

inline Shape broadcast_shape(const Shape& a, const Shape& b) {
  size_t r = std::max(a.size(), b.size());
  Shape out(r);
  for (size_t i = 0; i < r; ++i) {
    size_t da = i < r - a.size() ? 1 : a[i - (r - a.size())];
    size_t db = i < r - b.size() ? 1 : b[i - (r - b.size())];
    if (da != db && da != 1 && db != 1)
      fail("shapes not broadcast-compatible: ", shape_str(a), " vs ",
           shape_str(b));
    out[i] = std::max(da, db);
  }
  return out;
}

// Row-major strides padded to rank r, with stride 0 on broadcast dims.
inline std::vector<size_t> broadcast_strides(const Shape& s, size_t r,
                                             const Shape& out) {
  std::vector<size_t> st(r, 0);
  size_t stride = 1;
  for (size_t i = s.size(); i-- > 0;) {
    size_t oi = i + (r - s.size());
    st[oi] = (s[i] == 1 && out[oi] != 1) ? 0 : stride;
    stride *= s[i];
  }
  return st;
}

// Sum `g` down to `target` shape (reverse of broadcasting).
template <typename T>
Tensor<T> unbroadcast(const Tensor<T>& g, const Shape& target) {
  if (g.shape() == target) return g;
  Tensor<T> out(target);
  size_t r = g.rank();
  auto tst = broadcast_strides(target, r, g.shape());
  const Shape& gs = g.shape();
  std::vector<size_t> idx(r, 0);
  const T* gp = g.data();
  T* op = out.data();
  for (size_t flat = 0; flat < g.numel(); ++flat) {
    size_t ti = 0;
    for (size_t i = 0; i < r; ++i) ti += idx[i] * tst[i];
    op[ti] += gp[flat];
    for (size_t i = r; i-- > 0;) {
      if (++idx[i] < gs[i]) break;
      idx[i] = 0;
    }
  }
  return out;
}

// ---- small GEMM kernels (ikj order so the inner loop vectorizes) ----

// C[m,n] += A[m,k] * B[k,n]
template <typename T>
void gemm_nn(const T* a, const T* b, T* c, size_t m, size_t k, size_t n) {
  for (size_t i = 0; i < m; ++i) {
    const T* arow = a + i * k;
    T* crow = c + i * n;
    for (size_t p = 0; p < k; ++p) {
      T av = arow[p];
      if (av == T(0)) continue;
      const T* brow = b + p * n;
      for (size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C[m,n] += A[m,k] * B^T where B is stored [n,k]
template <typename T>
void gemm_nt(const T* a, const T* b, T* c, size_t m, size_t k, size_t n) {
  for (size_t i = 0; i < m; ++i) {
    const T* arow = a + i * k;
    T* crow = c + i * n;
    for (size_t j = 0; j < n; ++j) {
      const T* brow = b + j * k;
      T acc = 0;
      for (size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
      crow[j] += acc;
    }
  }
}

// C[k,n] += A^T * B where A is stored [m,k], B is [m,n]
template <typename T>
void gemm_tn(const T* a, const T* b, T* c, size_t m, size_t k, size_t n) {
  for (size_t i = 0; i < m; ++i) {
    const T* arow = a + i * k;
    const T* brow = b + i * n;
    for (size_t p = 0; p < k; ++p) {
      T av = arow[p];
      if (av == T(0)) continue;
      T* crow = c + p * n;
      for (size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

}  // namespace pmae
