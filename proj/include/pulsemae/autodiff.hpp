#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <unordered_set>
#include <utility>
#include <vector>

#include "pulsemae/errors.hpp"
#include "pulsemae/rng.hpp"
#include "pulsemae/tensor.hpp"

namespace pmae {

// Define-by-run reverse-mode autodiff. The graph is rebuilt every step and
// freed when the last Var handle goes out of scope.
template <typename T>
struct Node {
  Tensor<T> value;
  Tensor<T> grad;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backprop;
  bool needs_grad = false;
  bool has_grad = false;
  const char* op = "leaf";

  Tensor<T>& ensure_grad() {
    if (!has_grad) {
      grad = Tensor<T>(value.shape());
      has_grad = true;
    }
    return grad;
  }
  void accum_grad(const Tensor<T>& g) {
    Tensor<T>& dst = ensure_grad();
    T* d = dst.data();
    const T* s = g.data();
    for (size_t i = 0; i < dst.numel(); ++i) d[i] += s[i];
  }
  // Gradient view that is all-zero when the node was never reached.
  Tensor<T> grad_or_zero() const {
    return has_grad ? grad : Tensor<T>(value.shape());
  }
  void zero_grad() {
    has_grad = false;
    grad = Tensor<T>();
  }
};

template <typename T>
using Var = std::shared_ptr<Node<T>>;

template <typename T>
Var<T> constant(Tensor<T> v) {
  auto n = std::make_shared<Node<T>>();
  n->value = std::move(v);
  n->needs_grad = false;
  return n;
}

template <typename T>
Var<T> parameter(Tensor<T> v) {
  auto n = std::make_shared<Node<T>>();
  n->value = std::move(v);
  n->needs_grad = true;
  n->op = "param";
  return n;
}

template <typename T>
Var<T> make_node(Tensor<T> value, std::vector<Var<T>> parents,
                 std::function<void(Node<T>&)> backprop, const char* op) {
  auto n = std::make_shared<Node<T>>();
  n->value = std::move(value);
  for (auto& p : parents)
    if (p->needs_grad) n->needs_grad = true;
  n->parents = std::move(parents);
  if (n->needs_grad) n->backprop = std::move(backprop);
  n->op = op;
  return n;
}

// ---- elementwise ----

enum class EwOp { add, sub, mul, div };

template <typename T>
Var<T> binary(EwOp kind, const Var<T>& a, const Var<T>& b, const char* name) {
  const Tensor<T>& av = a->value;
  const Tensor<T>& bv = b->value;
  Shape os = broadcast_shape(av.shape(), bv.shape());
  Tensor<T> out(os);
  size_t r = os.size();
  auto sa = broadcast_strides(av.shape(), r, os);
  auto sb = broadcast_strides(bv.shape(), r, os);
  bool simple = av.shape() == bv.shape();
  const T* ap = av.data();
  const T* bp = bv.data();
  T* op = out.data();
  auto apply = [kind](T x, T y) -> T {
    switch (kind) {
      case EwOp::add: return x + y;
      case EwOp::sub: return x - y;
      case EwOp::mul: return x * y;
      case EwOp::div: return x / y;
    }
    return 0;
  };
  if (simple) {
    for (size_t i = 0; i < out.numel(); ++i) op[i] = apply(ap[i], bp[i]);
  } else {
    std::vector<size_t> idx(r, 0);
    for (size_t flat = 0; flat < out.numel(); ++flat) {
      size_t ia = 0, ib = 0;
      for (size_t i = 0; i < r; ++i) {
        ia += idx[i] * sa[i];
        ib += idx[i] * sb[i];
      }
      op[flat] = apply(ap[ia], bp[ib]);
      for (size_t i = r; i-- > 0;) {
        if (++idx[i] < os[i]) break;
        idx[i] = 0;
      }
    }
  }
  return make_node<T>(
      std::move(out), {a, b},
      [kind](Node<T>& self) {
        const Var<T>& pa = self.parents[0];
        const Var<T>& pb = self.parents[1];
        const Tensor<T>& g = self.grad;
        const Shape& os = self.value.shape();
        size_t r = os.size();
        auto sa = broadcast_strides(pa->value.shape(), r, os);
        auto sb = broadcast_strides(pb->value.shape(), r, os);
        Tensor<T> ga(os), gb(os);
        const T* gp = g.data();
        const T* apv = pa->value.data();
        const T* bpv = pb->value.data();
        std::vector<size_t> idx(r, 0);
        for (size_t flat = 0; flat < g.numel(); ++flat) {
          size_t ia = 0, ib = 0;
          for (size_t i = 0; i < r; ++i) {
            ia += idx[i] * sa[i];
            ib += idx[i] * sb[i];
          }
          switch (kind) {
            case EwOp::add:
              ga[flat] = gp[flat];
              gb[flat] = gp[flat];
              break;
            case EwOp::sub:
              ga[flat] = gp[flat];
              gb[flat] = -gp[flat];
              break;
            case EwOp::mul:
              ga[flat] = gp[flat] * bpv[ib];
              gb[flat] = gp[flat] * apv[ia];
              break;
            case EwOp::div: {
              T y = bpv[ib];
              ga[flat] = gp[flat] / y;
              gb[flat] = -gp[flat] * apv[ia] / (y * y);
              break;
            }
          }
          for (size_t i = r; i-- > 0;) {
            if (++idx[i] < os[i]) break;
            idx[i] = 0;
          }
        }
        if (pa->needs_grad) pa->accum_grad(unbroadcast(ga, pa->value.shape()));
        if (pb->needs_grad) pb->accum_grad(unbroadcast(gb, pb->value.shape()));
      },
      name);
}

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) { return binary(EwOp::add, a, b, "add"); }
template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) { return binary(EwOp::sub, a, b, "sub"); }
template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) { return binary(EwOp::mul, a, b, "mul"); }
template <typename T>
Var<T> div(const Var<T>& a, const Var<T>& b) { return binary(EwOp::div, a, b, "div"); }

template <typename T>
Var<T> operator+(const Var<T>& a, const Var<T>& b) { return add(a, b); }
template <typename T>
Var<T> operator-(const Var<T>& a, const Var<T>& b) { return sub(a, b); }
template <typename T>
Var<T> operator*(const Var<T>& a, const Var<T>& b) { return mul(a, b); }
template <typename T>
Var<T> operator/(const Var<T>& a, const Var<T>& b) { return div(a, b); }

// unary with pointwise forward f(x) and backward df(g, x, y)
template <typename T, typename F, typename DF>
Var<T> unary(const Var<T>& a, F f, DF df, const char* name) {
  Tensor<T> out(a->value.shape());
  const T* ap = a->value.data();
  T* op = out.data();
  for (size_t i = 0; i < out.numel(); ++i) op[i] = f(ap[i]);
  return make_node<T>(
      std::move(out), {a},
      [df](Node<T>& self) {
        const Var<T>& pa = self.parents[0];
        if (!pa->needs_grad) return;
        Tensor<T> ga(pa->value.shape());
        const T* gp = self.grad.data();
        const T* xp = pa->value.data();
        const T* yp = self.value.data();
        T* gap = ga.data();
        for (size_t i = 0; i < ga.numel(); ++i)
          gap[i] = df(gp[i], xp[i], yp[i]);
        pa->accum_grad(ga);
      },
      name);
}

template <typename T>
Var<T> neg(const Var<T>& a) {
  return unary(a, [](T x) { return -x; },
               [](T g, T, T) { return -g; }, "neg");
}
template <typename T>
Var<T> vexp(const Var<T>& a) {
  return unary(a, [](T x) { return std::exp(x); },
               [](T g, T, T y) { return g * y; }, "exp");
}
template <typename T>
Var<T> vlog(const Var<T>& a) {
  return unary(a, [](T x) { return std::log(x); },
               [](T g, T x, T) { return g / x; }, "log");
}
template <typename T>
Var<T> vsqrt(const Var<T>& a) {
  return unary(a, [](T x) { return std::sqrt(x); },
               [](T g, T, T y) {
                 return g * T(0.5) / std::max(y, T(1e-12));
               },
               "sqrt");
}
template <typename T>
Var<T> vabs(const Var<T>& a) {
  return unary(a, [](T x) { return std::abs(x); },
               [](T g, T x, T) { return x > 0 ? g : (x < 0 ? -g : T(0)); },
               "abs");
}
template <typename T>
Var<T> sigmoid(const Var<T>& a) {
  return unary(a,
               [](T x) {
                 return x >= 0 ? T(1) / (T(1) + std::exp(-x))
                               : std::exp(x) / (T(1) + std::exp(x));
               },
               [](T g, T, T y) { return g * y * (T(1) - y); }, "sigmoid");
}
template <typename T>
Var<T> silu(const Var<T>& a) {
  return unary(a,
               [](T x) {
                 T s = x >= 0 ? T(1) / (T(1) + std::exp(-x))
                              : std::exp(x) / (T(1) + std::exp(x));
                 return x * s;
               },
               [](T g, T x, T) {
                 T s = x >= 0 ? T(1) / (T(1) + std::exp(-x))
                              : std::exp(x) / (T(1) + std::exp(x));
                 return g * s * (T(1) + x * (T(1) - s));
               },
               "silu");
}
template <typename T>
Var<T> softplus(const Var<T>& a) {
  return unary(a,
               [](T x) {
                 if (x > T(30)) return x;
                 if (x < T(-30)) return std::exp(x);
                 return std::log1p(std::exp(x));
               },
               [](T g, T x, T) {
                 T s = x >= 0 ? T(1) / (T(1) + std::exp(-x))
                              : std::exp(x) / (T(1) + std::exp(x));
                 return g * s;
               },
               "softplus");
}
template <typename T>
Var<T> vtanh(const Var<T>& a) {
  return unary(a, [](T x) { return std::tanh(x); },
               [](T g, T, T y) { return g * (T(1) - y * y); }, "tanh");
}
template <typename T>
Var<T> clamp(const Var<T>& a, T lo, T hi) {
  return unary(a,
               [lo, hi](T x) { return std::min(std::max(x, lo), hi); },
               [lo, hi](T g, T x, T) {
                 return (x >= lo && x <= hi) ? g : T(0);
               },
               "clamp");
}

template <typename T>
Var<T> add_scalar(const Var<T>& a, T s) {
  return unary(a, [s](T x) { return x + s; },
               [](T g, T, T) { return g; }, "add_s");
}
template <typename T>
Var<T> mul_scalar(const Var<T>& a, T s) {
  return unary(a, [s](T x) { return x * s; },
               [s](T g, T, T) { return g * s; }, "mul_s");
}

// ---- matmul ----

// a: [..., m, k], b: [..., k, n]; leading dims broadcast.
template <typename T>
Var<T> matmul(const Var<T>& a, const Var<T>& b) {
  const Tensor<T>& av = a->value;
  const Tensor<T>& bv = b->value;
  require(av.rank() >= 2 && bv.rank() >= 2, "matmul needs rank >= 2, got ",
          shape_str(av.shape()), " and ", shape_str(bv.shape()));
  size_t m = av.dim(av.rank() - 2), k = av.dim(av.rank() - 1);
  size_t kb = bv.dim(bv.rank() - 2), n = bv.dim(bv.rank() - 1);
  require(k == kb, "matmul inner dimensions disagree: ", shape_str(av.shape()),
          " x ", shape_str(bv.shape()));
  Shape la(av.shape().begin(), av.shape().end() - 2);
  Shape lb(bv.shape().begin(), bv.shape().end() - 2);
  Shape lead = broadcast_shape(la, lb);
  size_t nb = shape_numel(lead);
  size_t r = lead.size();
  auto stA = broadcast_strides(la, r, lead);
  auto stB = broadcast_strides(lb, r, lead);
  Shape os = lead;
  os.push_back(m);
  os.push_back(n);
  Tensor<T> out(os);
  // flat batch offsets
  std::vector<size_t> offA(nb), offB(nb);
  {
    std::vector<size_t> idx(r, 0);
    for (size_t bi = 0; bi < nb; ++bi) {
      size_t ia = 0, ib = 0;
      for (size_t i = 0; i < r; ++i) {
        ia += idx[i] * stA[i];
        ib += idx[i] * stB[i];
      }
      offA[bi] = ia * m * k;
      offB[bi] = ib * k * n;
      for (size_t i = r; i-- > 0;) {
        if (++idx[i] < lead[i]) break;
        idx[i] = 0;
      }
    }
  }
  for (size_t bi = 0; bi < nb; ++bi)
    gemm_nn(av.data() + offA[bi], bv.data() + offB[bi],
            out.data() + bi * m * n, m, k, n);
  return make_node<T>(
      std::move(out), {a, b},
      [m, k, n, nb, offA, offB](Node<T>& self) {
        const Var<T>& pa = self.parents[0];
        const Var<T>& pb = self.parents[1];
        const T* g = self.grad.data();
        if (pa->needs_grad) {
          Tensor<T> ga(pa->value.shape());
          for (size_t bi = 0; bi < nb; ++bi)
            gemm_nt(g + bi * m * n, pb->value.data() + offB[bi],
                    ga.data() + offA[bi], m, n, k);
          pa->accum_grad(ga);
        }
        if (pb->needs_grad) {
          Tensor<T> gb(pb->value.shape());
          for (size_t bi = 0; bi < nb; ++bi)
            gemm_tn(pa->value.data() + offA[bi], g + bi * m * n,
                    gb.data() + offB[bi], m, k, n);
          pb->accum_grad(gb);
        }
      },
      "matmul");
}

// ---- reductions ----

inline size_t norm_axis(int axis, size_t rank) {
  int a = axis < 0 ? axis + static_cast<int>(rank) : axis;
  require(a >= 0 && a < static_cast<int>(rank), "axis ", axis,
          " out of range for rank ", rank);
  return static_cast<size_t>(a);
}

template <typename T>
Var<T> reduce_sum(const Var<T>& a, std::vector<int> axes, bool keepdims = false) {
  const Shape& is = a->value.shape();
  std::vector<bool> red(is.size(), false);
  if (axes.empty())
    std::fill(red.begin(), red.end(), true);
  else
    for (int ax : axes) red[norm_axis(ax, is.size())] = true;
  Shape os;
  for (size_t i = 0; i < is.size(); ++i) {
    if (red[i]) {
      if (keepdims) os.push_back(1);
    } else {
      os.push_back(is[i]);
    }
  }
  // map input flat index -> output flat index
  std::vector<size_t> ostrides(is.size(), 0);
  {
    size_t stride = 1;
    for (size_t i = is.size(); i-- > 0;) {
      if (!red[i]) {
        ostrides[i] = stride;
        stride *= is[i];
      }
    }
  }
  Tensor<T> out(os);
  const T* ap = a->value.data();
  T* op = out.data();
  std::vector<size_t> idx(is.size(), 0);
  for (size_t flat = 0; flat < a->value.numel(); ++flat) {
    size_t oi = 0;
    for (size_t i = 0; i < is.size(); ++i) oi += idx[i] * ostrides[i];
    op[oi] += ap[flat];
    for (size_t i = is.size(); i-- > 0;) {
      if (++idx[i] < is[i]) break;
      idx[i] = 0;
    }
  }
  return make_node<T>(
      std::move(out), {a},
      [ostrides](Node<T>& self) {
        const Var<T>& pa = self.parents[0];
        if (!pa->needs_grad) return;
        const Shape& is = pa->value.shape();
        Tensor<T> ga(is);
        const T* gp = self.grad.data();
        T* gap = ga.data();
        std::vector<size_t> idx(is.size(), 0);
        for (size_t flat = 0; flat < ga.numel(); ++flat) {
          size_t oi = 0;
          for (size_t i = 0; i < is.size(); ++i) oi += idx[i] * ostrides[i];
          gap[flat] = gp[oi];
          for (size_t i = is.size(); i-- > 0;) {
            if (++idx[i] < is[i]) break;
            idx[i] = 0;
          }
        }
        pa->accum_grad(ga);
      },
      "sum");
}

template <typename T>
Var<T> reduce_mean(const Var<T>& a, std::vector<int> axes, bool keepdims = false) {
  const Shape& is = a->value.shape();
  size_t n = 1;
  if (axes.empty()) {
    n = a->value.numel();
  } else {
    for (int ax : axes) n *= is[norm_axis(ax, is.size())];
  }
  return mul_scalar(reduce_sum(a, std::move(axes), keepdims),
                    T(1) / static_cast<T>(n));
}

template <typename T>
Var<T> sum_all(const Var<T>& a) { return reduce_sum(a, {}); }
template <typename T>
Var<T> mean_all(const Var<T>& a) { return reduce_mean(a, {}); }

// ---- softmax family (over a chosen axis, computed stably) ----

template <typename T, typename RowFn>
Var<T> rowwise_op(const Var<T>& a, int axis, RowFn fn,
                  std::function<void(Node<T>&, size_t, size_t, size_t)> bp,
                  const char* name) {
  const Shape& is = a->value.shape();
  size_t ax = norm_axis(axis, is.size());
  size_t d = is[ax];
  size_t inner = 1, outer = 1;
  for (size_t i = ax + 1; i < is.size(); ++i) inner *= is[i];
  for (size_t i = 0; i < ax; ++i) outer *= is[i];
  Tensor<T> out(is);
  std::vector<T> row(d);
  for (size_t o = 0; o < outer; ++o)
    for (size_t in = 0; in < inner; ++in) {
      size_t base = o * d * inner + in;
      for (size_t j = 0; j < d; ++j) row[j] = a->value[base + j * inner];
      fn(row);
      for (size_t j = 0; j < d; ++j) out[base + j * inner] = row[j];
    }
  return make_node<T>(std::move(out), {a},
                      [bp, outer, inner, d](Node<T>& self) {
                        if (!self.parents[0]->needs_grad) return;
                        bp(self, outer, inner, d);
                      },
                      name);
}

template <typename T>
Var<T> softmax(const Var<T>& a, int axis = -1) {
  return rowwise_op<T>(
      a, axis,
      [](std::vector<T>& row) {
        T m = *std::max_element(row.begin(), row.end());
        T s = 0;
        for (auto& v : row) {
          v = std::exp(v - m);
          s += v;
        }
        for (auto& v : row) v /= s;
      },
      [](Node<T>& self, size_t outer, size_t inner, size_t d) {
        const Var<T>& pa = self.parents[0];
        Tensor<T> ga(pa->value.shape());
        for (size_t o = 0; o < outer; ++o)
          for (size_t in = 0; in < inner; ++in) {
            size_t base = o * d * inner + in;
            T dot = 0;
            for (size_t j = 0; j < d; ++j)
              dot += self.grad[base + j * inner] * self.value[base + j * inner];
            for (size_t j = 0; j < d; ++j) {
              T y = self.value[base + j * inner];
              ga[base + j * inner] = y * (self.grad[base + j * inner] - dot);
            }
          }
        pa->accum_grad(ga);
      },
      "softmax");
}

template <typename T>
Var<T> log_softmax(const Var<T>& a, int axis = -1) {
  return rowwise_op<T>(
      a, axis,
      [](std::vector<T>& row) {
        T m = *std::max_element(row.begin(), row.end());
        T s = 0;
        for (auto v : row) s += std::exp(v - m);
        T lse = m + std::log(s);
        for (auto& v : row) v -= lse;
      },
      [](Node<T>& self, size_t outer, size_t inner, size_t d) {
        const Var<T>& pa = self.parents[0];
        Tensor<T> ga(pa->value.shape());
        for (size_t o = 0; o < outer; ++o)
          for (size_t in = 0; in < inner; ++in) {
            size_t base = o * d * inner + in;
            T gsum = 0;
            for (size_t j = 0; j < d; ++j) gsum += self.grad[base + j * inner];
            for (size_t j = 0; j < d; ++j)
              ga[base + j * inner] =
                  self.grad[base + j * inner] -
                  std::exp(self.value[base + j * inner]) * gsum;
          }
        pa->accum_grad(ga);
      },
      "log_softmax");
}

// ---- layer norm over the last axis ----

template <typename T>
Var<T> layer_norm(const Var<T>& a, const Var<T>& gain, const Var<T>& bias,
                  T eps = T(1e-5)) {
  require(eps > 0, "layer_norm eps must be > 0");
  const Shape& is = a->value.shape();
  require(!is.empty(), "layer_norm needs rank >= 1");
  size_t d = is.back();
  require(gain->value.numel() == d && bias->value.numel() == d,
          "layer_norm gain/bias length ", gain->value.numel(), "/",
          bias->value.numel(), " does not match last dim ", d);
  size_t rows = a->value.numel() / d;
  Tensor<T> out(is);
  Tensor<T> xhat(is);
  std::vector<T> inv_sd(rows);
  for (size_t rI = 0; rI < rows; ++rI) {
    const T* x = a->value.data() + rI * d;
    T mu = 0;
    for (size_t j = 0; j < d; ++j) mu += x[j];
    mu /= static_cast<T>(d);
    T var = 0;
    for (size_t j = 0; j < d; ++j) var += (x[j] - mu) * (x[j] - mu);
    var /= static_cast<T>(d);
    T isd = T(1) / std::sqrt(var + eps);
    inv_sd[rI] = isd;
    for (size_t j = 0; j < d; ++j) {
      T xh = (x[j] - mu) * isd;
      xhat[rI * d + j] = xh;
      out[rI * d + j] = xh * gain->value[j] + bias->value[j];
    }
  }
  return make_node<T>(
      std::move(out), {a, gain, bias},
      [xhat = std::move(xhat), inv_sd = std::move(inv_sd), rows,
       d](Node<T>& self) {
        const Var<T>& pa = self.parents[0];
        const Var<T>& pg = self.parents[1];
        const Var<T>& pb = self.parents[2];
        const Tensor<T>& g = self.grad;
        if (pg->needs_grad) {
          Tensor<T> gg({d});
          for (size_t rI = 0; rI < rows; ++rI)
            for (size_t j = 0; j < d; ++j)
              gg[j] += g[rI * d + j] * xhat[rI * d + j];
          pg->accum_grad(gg);
        }
        if (pb->needs_grad) {
          Tensor<T> gb({d});
          for (size_t rI = 0; rI < rows; ++rI)
            for (size_t j = 0; j < d; ++j) gb[j] += g[rI * d + j];
          pb->accum_grad(gb);
        }
        if (pa->needs_grad) {
          Tensor<T> ga(pa->value.shape());
          for (size_t rI = 0; rI < rows; ++rI) {
            T m1 = 0, m2 = 0;
            for (size_t j = 0; j < d; ++j) {
              T dxh = g[rI * d + j] * pg->value[j];
              m1 += dxh;
              m2 += dxh * xhat[rI * d + j];
            }
            m1 /= static_cast<T>(d);
            m2 /= static_cast<T>(d);
            for (size_t j = 0; j < d; ++j) {
              T dxh = g[rI * d + j] * pg->value[j];
              ga[rI * d + j] =
                  (dxh - m1 - xhat[rI * d + j] * m2) * inv_sd[rI];
            }
          }
          pa->accum_grad(ga);
        }
      },
      "layer_norm");
}

// ---- dropout ----

template <typename T>
Var<T> dropout(const Var<T>& a, double p, RngStream& rng, bool training) {
  require(p >= 0 && p < 1, "dropout p must be in [0,1), got ", p);
  if (!training || p == 0) return a;
  Tensor<T> mask(a->value.shape());
  T keep = T(1) / static_cast<T>(1.0 - p);
  for (size_t i = 0; i < mask.numel(); ++i)
    mask[i] = rng.uniform() >= p ? keep : T(0);
  Tensor<T> out(a->value.shape());
  for (size_t i = 0; i < out.numel(); ++i) out[i] = a->value[i] * mask[i];
  return make_node<T>(
      std::move(out), {a},
      [mask = std::move(mask)](Node<T>& self) {
        const Var<T>& pa = self.parents[0];
        if (!pa->needs_grad) return;
        Tensor<T> ga(pa->value.shape());
        for (size_t i = 0; i < ga.numel(); ++i)
          ga[i] = self.grad[i] * mask[i];
        pa->accum_grad(ga);
      },
      "dropout");
}

// ---- shape / indexing ----

template <typename T>
Var<T> reshape(const Var<T>& a, Shape s) {
  Tensor<T> out = a->value.reshaped(std::move(s));
  return make_node<T>(std::move(out), {a},
                      [](Node<T>& self) {
                        const Var<T>& pa = self.parents[0];
                        if (!pa->needs_grad) return;
                        pa->accum_grad(
                            self.grad.reshaped(pa->value.shape()));
                      },
                      "reshape");
}

// a: [B, N, D]; per-batch row indices -> [B, K, D]
template <typename T>
Var<T> gather_rows(const Var<T>& a,
                   const std::vector<std::vector<size_t>>& idx) {
  const Shape& is = a->value.shape();
  require(is.size() == 3, "gather_rows expects [B,N,D], got ",
          shape_str(is));
  size_t B = is[0], N = is[1], D = is[2];
  require(idx.size() == B, "gather_rows: ", idx.size(),
          " index rows for batch ", B);
  size_t K = idx[0].size();
  for (auto& r : idx)
    require(r.size() == K, "gather_rows: ragged per-sample cardinality ",
            r.size(), " vs ", K);
  Tensor<T> out({B, K, D});
  for (size_t b = 0; b < B; ++b)
    for (size_t kI = 0; kI < K; ++kI) {
      size_t src = idx[b][kI];
      require(src < N, "gather_rows index ", src, " out of range ", N);
      std::copy_n(a->value.data() + (b * N + src) * D, D,
                  out.data() + (b * K + kI) * D);
    }
  return make_node<T>(
      std::move(out), {a},
      [idx, B, N, K, D](Node<T>& self) {
        const Var<T>& pa = self.parents[0];
        if (!pa->needs_grad) return;
        Tensor<T> ga({B, N, D});
        for (size_t b = 0; b < B; ++b)
          for (size_t kI = 0; kI < K; ++kI) {
            const T* g = self.grad.data() + (b * K + kI) * D;
            T* dst = ga.data() + (b * N + idx[b][kI]) * D;
            for (size_t j = 0; j < D; ++j) dst[j] += g[j];
          }
        pa->accum_grad(ga);
      },
      "gather_rows");
}

// updates: [B, K, D] scattered into zeros of [B, N, D] at per-batch indices
template <typename T>
Var<T> scatter_rows(const Var<T>& updates,
                    const std::vector<std::vector<size_t>>& idx, size_t N) {
  const Shape& is = updates->value.shape();
  require(is.size() == 3, "scatter_rows expects [B,K,D], got ",
          shape_str(is));
  size_t B = is[0], K = is[1], D = is[2];
  require(idx.size() == B, "scatter_rows: batch mismatch");
  Tensor<T> out({B, N, D});
  for (size_t b = 0; b < B; ++b)
    for (size_t kI = 0; kI < K; ++kI) {
      size_t dst = idx[b][kI];
      require(dst < N, "scatter_rows index ", dst, " out of range ", N);
      std::copy_n(updates->value.data() + (b * K + kI) * D, D,
                  out.data() + (b * N + dst) * D);
    }
  return make_node<T>(
      std::move(out), {updates},
      [idx, K, D](Node<T>& self) {
        const Var<T>& pu = self.parents[0];
        if (!pu->needs_grad) return;
        size_t B = idx.size();
        size_t N = self.value.shape()[1];
        Tensor<T> gu({B, K, D});
        for (size_t b = 0; b < B; ++b)
          for (size_t kI = 0; kI < K; ++kI)
            std::copy_n(self.grad.data() + (b * N + idx[b][kI]) * D, D,
                        gu.data() + (b * K + kI) * D);
        pu->accum_grad(gu);
      },
      "scatter_rows");
}

template <typename T>
Var<T> slice_last(const Var<T>& a, size_t start, size_t len) {
  const Shape& is = a->value.shape();
  size_t d = is.back();
  require(start + len <= d, "slice_last [", start, ",", start + len,
          ") out of range for last dim ", d);
  Shape os = is;
  os.back() = len;
  size_t rows = a->value.numel() / d;
  Tensor<T> out(os);
  for (size_t rI = 0; rI < rows; ++rI)
    std::copy_n(a->value.data() + rI * d + start, len, out.data() + rI * len);
  return make_node<T>(
      std::move(out), {a},
      [start, len, d, rows](Node<T>& self) {
        const Var<T>& pa = self.parents[0];
        if (!pa->needs_grad) return;
        Tensor<T> ga(pa->value.shape());
        for (size_t rI = 0; rI < rows; ++rI)
          for (size_t j = 0; j < len; ++j)
            ga[rI * d + start + j] = self.grad[rI * len + j];
        pa->accum_grad(ga);
      },
      "slice_last");
}

template <typename T>
Var<T> reverse_axis(const Var<T>& a, int axis) {
  const Shape& is = a->value.shape();
  size_t ax = norm_axis(axis, is.size());
  size_t d = is[ax];
  size_t inner = 1, outer = 1;
  for (size_t i = ax + 1; i < is.size(); ++i) inner *= is[i];
  for (size_t i = 0; i < ax; ++i) outer *= is[i];
  auto rev = [outer, inner, d](const Tensor<T>& src) {
    Tensor<T> dst(src.shape());
    for (size_t o = 0; o < outer; ++o)
      for (size_t j = 0; j < d; ++j)
        std::copy_n(src.data() + (o * d + j) * inner, inner,
                    dst.data() + (o * d + (d - 1 - j)) * inner);
    return dst;
  };
  return make_node<T>(rev(a->value), {a},
                      [rev](Node<T>& self) {
                        const Var<T>& pa = self.parents[0];
                        if (!pa->needs_grad) return;
                        pa->accum_grad(rev(self.grad));
                      },
                      "reverse");
}

// ---- Pearson correlation (composite; differentiable end to end) ----

// a, b: [n] -> scalar. eps is added to each standard deviation, so constant
// inputs give rho ~ 0 instead of NaN.
template <typename T>
Var<T> pearson(const Var<T>& a, const Var<T>& b, T eps = T(1e-8)) {
  require(a->value.numel() == b->value.numel(),
          "pearson length mismatch: ", a->value.numel(), " vs ",
          b->value.numel());
  require(a->value.numel() >= 2, "pearson needs n >= 2");
  require(eps > 0, "pearson eps must be > 0");
  auto ca = sub(a, mean_all(a));
  auto cb = sub(b, mean_all(b));
  auto cov = mean_all(mul(ca, cb));
  auto sa = add_scalar(vsqrt(mean_all(mul(ca, ca))), eps);
  auto sb = add_scalar(vsqrt(mean_all(mul(cb, cb))), eps);
  return div(cov, mul(sa, sb));
}

// rows of [B, L] -> [B]
template <typename T>
Var<T> pearson_rows(const Var<T>& a, const Var<T>& b, T eps = T(1e-8)) {
  require(a->value.shape() == b->value.shape(), "pearson_rows shape mismatch: ",
          shape_str(a->value.shape()), " vs ", shape_str(b->value.shape()));
  require(a->value.rank() == 2 && a->value.shape()[1] >= 2,
          "pearson_rows expects [B,L] with L >= 2");
  auto ca = sub(a, reduce_mean(a, {1}, true));
  auto cb = sub(b, reduce_mean(b, {1}, true));
  auto cov = reduce_mean(mul(ca, cb), {1});
  auto sa = add_scalar(vsqrt(reduce_mean(mul(ca, ca), {1})), eps);
  auto sb = add_scalar(vsqrt(reduce_mean(mul(cb, cb), {1})), eps);
  return div(cov, mul(sa, sb));
}

// ---- backward ----

template <typename T>
std::vector<Node<T>*> topo_order(const Var<T>& root) {
  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> seen;
  std::vector<std::pair<Node<T>*, size_t>> stack{{root.get(), 0}};
  seen.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node<T>* p = node->parents[next++].get();
      if (p->needs_grad && !seen.count(p)) {
        seen.insert(p);
        stack.push_back({p, 0});
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  return order;  // parents before children
}

template <typename T>
void backward(const Var<T>& loss) {
  require(loss->value.numel() == 1, "backward expects a scalar loss, got ",
          shape_str(loss->value.shape()));
  if (!loss->needs_grad) return;
  auto order = topo_order(loss);
  loss->ensure_grad();
  loss->grad[0] = T(1);
  for (size_t i = order.size(); i-- > 0;) {
    Node<T>* n = order[i];
    if (n->backprop && n->has_grad) n->backprop(*n);
  }
}

}  // namespace pmae
