#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "pulsemae/autodiff.hpp"

namespace pmae {

// Selective state-space recurrence. Inputs:
//   x     [B,L,E]  sequence
//   delta [B,L,E]  positive step sizes (softplus-projected upstream)
//   A     [E,S]    continuous-time decays, strictly negative
//   Bm    [B,L,S]  input->state projection
//   Cm    [B,L,S]  state->output readout
//   d     [E]      skip gain
// Per (b,e,s):
//   h_t = exp(delta_t A) h_{t-1} + delta_t B_t x_t,   h_0 = 0
//   y_{t,e} = sum_s C_{t,s} h_{t,e,s} + d_e x_{t,e}
// Sequential recurrence with an analytic reverse pass; the state history is
// kept for backward.
template <typename T>
Var<T> scan_core(const Var<T>& x, const Var<T>& delta, const Var<T>& A,
                 const Var<T>& Bm, const Var<T>& Cm, const Var<T>& d) {
  const Shape& xs = x->value.shape();
  require(xs.size() == 3, "scan_core expects x [B,L,E], got ",
          shape_str(xs));
  size_t B = xs[0], L = xs[1], E = xs[2];
  require(L >= 1, "scan_core requires sequence length >= 1");
  require(delta->value.shape() == xs, "scan_core delta shape ",
          shape_str(delta->value.shape()), " != x shape ", shape_str(xs));
  const Shape& as = A->value.shape();
  require(as.size() == 2 && as[0] == E, "scan_core A must be [E,S]");
  size_t S = as[1];
  Shape bs{B, L, S};
  require(Bm->value.shape() == bs && Cm->value.shape() == bs,
          "scan_core B/C must be [B,L,S]");
  require(d->value.numel() == E, "scan_core d must be length E");

  Tensor<T> y({B, L, E});
  Tensor<T> h_hist({B, L, E, S});
  Tensor<T> abar_hist({B, L, E, S});
  const T* xp = x->value.data();
  const T* dl = delta->value.data();
  const T* ap = A->value.data();
  const T* bp = Bm->value.data();
  const T* cp = Cm->value.data();
  const T* dp = d->value.data();
  std::vector<T> h(E * S);
  for (size_t b = 0; b < B; ++b) {
    std::fill(h.begin(), h.end(), T(0));
    for (size_t t = 0; t < L; ++t) {
      size_t o = (b * L + t);
      const T* bt = bp + o * S;
      const T* ct = cp + o * S;
      for (size_t e = 0; e < E; ++e) {
        T dte = dl[o * E + e];
        T xte = xp[o * E + e];
        T inp = dte * xte;
        T* he = h.data() + e * S;
        T* hh = h_hist.data() + (o * E + e) * S;
        T* ah = abar_hist.data() + (o * E + e) * S;
        T acc = 0;
        for (size_t s = 0; s < S; ++s) {
          T abar = std::exp(dte * ap[e * S + s]);
          T hn = abar * he[s] + inp * bt[s];
          he[s] = hn;
          hh[s] = hn;
          ah[s] = abar;
          acc += ct[s] * hn;
        }
        y[o * E + e] = acc + dp[e] * xte;
      }
    }
  }
  return make_node<T>(
      std::move(y), {x, delta, A, Bm, Cm, d},
      [B, L, E, S, h_hist = std::move(h_hist),
       abar_hist = std::move(abar_hist)](Node<T>& self) {
        const Var<T>& px = self.parents[0];
        const Var<T>& pdelta = self.parents[1];
        const Var<T>& pA = self.parents[2];
        const Var<T>& pB = self.parents[3];
        const Var<T>& pC = self.parents[4];
        const Var<T>& pd = self.parents[5];
        const T* gy = self.grad.data();
        const T* xp = px->value.data();
        const T* dl = pdelta->value.data();
        const T* ap = pA->value.data();
        const T* bp = pB->value.data();
        const T* dp = pd->value.data();
        Tensor<T> gx({B, L, E}), gdelta({B, L, E}), gA({E, S});
        Tensor<T> gB({B, L, S}), gC({B, L, S}), gd({E});
        std::vector<T> carry(E * S);
        for (size_t b = 0; b < B; ++b) {
          std::fill(carry.begin(), carry.end(), T(0));
          for (size_t t = L; t-- > 0;) {
            size_t o = (b * L + t);
            const T* bt = bp + o * S;
            const T* ct = pC->value.data() + o * S;
            T* gbt = gB.data() + o * S;
            T* gct = gC.data() + o * S;
            for (size_t e = 0; e < E; ++e) {
              T gyo = gy[o * E + e];
              T dte = dl[o * E + e];
              T xte = xp[o * E + e];
              const T* hh = h_hist.data() + (o * E + e) * S;
              const T* hprev =
                  t > 0 ? h_hist.data() + ((o - 1) * E + e) * S : nullptr;
              const T* ah = abar_hist.data() + (o * E + e) * S;
              T* ce = carry.data() + e * S;
              T gdelta_e = 0;
              T gx_e = gyo * dp[e];
              for (size_t s = 0; s < S; ++s) {
                T g = gyo * ct[s] + ce[s];
                gct[s] += gyo * hh[s];
                T hp = hprev ? hprev[s] : T(0);
                T gabar = g * hp;
                gdelta_e += gabar * ap[e * S + s] * ah[s];
                gA[e * S + s] += gabar * dte * ah[s];
                gdelta_e += g * bt[s] * xte;
                gbt[s] += g * dte * xte;
                gx_e += g * dte * bt[s];
                ce[s] = g * ah[s];
              }
              gdelta[o * E + e] = gdelta_e;
              gx[o * E + e] = gx_e;
              gd[e] += gyo * xte;
            }
          }
        }
        if (px->needs_grad) px->accum_grad(gx);
        if (pdelta->needs_grad) pdelta->accum_grad(gdelta);
        if (pA->needs_grad) pA->accum_grad(gA);
        if (pB->needs_grad) pB->accum_grad(gB);
        if (pC->needs_grad) pC->accum_grad(gC);
        if (pd->needs_grad) pd->accum_grad(gd);
      },
      "scan_core");
}

enum class ScanDirection { forward, backward };

// Per-direction parameters of the selective scan over width E with state S.
template <typename T>
struct SsmParams {
  Var<T> a_log;    // [E,S]; decay A = -exp(a_log) is strictly negative
  Var<T> w_delta;  // [E,E]
  Var<T> b_delta;  // [E]
  Var<T> w_b;      // [E,S]
  Var<T> w_c;      // [E,S]
  Var<T> d;        // [E]

  static SsmParams init(size_t E, size_t S, RngStream& rng) {
    SsmParams p;
    Tensor<T> alog({E, S});
    for (size_t i = 0; i < alog.numel(); ++i)
      alog[i] = static_cast<T>(std::log(rng.uniform(0.5, 8.0)));
    p.a_log = parameter(std::move(alog));
    T ge = T(1) / std::sqrt(static_cast<T>(E));
    p.w_delta = parameter(Tensor<T>::uniform({E, E}, rng, -ge, ge));
    p.b_delta = parameter(Tensor<T>({E}));
    p.w_b = parameter(Tensor<T>::uniform({E, S}, rng, -ge, ge));
    p.w_c = parameter(Tensor<T>::uniform({E, S}, rng, -ge, ge));
    p.d = parameter(Tensor<T>::full({E}, T(1)));
    return p;
  }
};

// One directional pass. Backward direction scans the time-reversed sequence
// and reverses the result.
template <typename T>
Var<T> selective_scan(const Var<T>& x, const SsmParams<T>& p,
                      ScanDirection dir) {
  require(x->value.rank() == 3, "selective_scan expects [B,L,E], got ",
          shape_str(x->value.shape()));
  require(x->value.shape()[1] >= 1, "selective_scan: empty sequence (L = 0)");
  Var<T> xr = dir == ScanDirection::backward ? reverse_axis(x, 1) : x;
  Var<T> delta = softplus(add(matmul(xr, p.w_delta), p.b_delta));
  Var<T> A = neg(vexp(p.a_log));
  Var<T> Bm = matmul(xr, p.w_b);
  Var<T> Cm = matmul(xr, p.w_c);
  Var<T> y = scan_core(xr, delta, A, Bm, Cm, p.d);
  return dir == ScanDirection::backward ? reverse_axis(y, 1) : y;
}

// Bidirectional gated block: pre-norm, D->2E projection split into value and
// gate paths, forward+backward scans summed, SiLU gate, output projection,
// residual connection.
template <typename T>
struct MambaBlockParams {
  Var<T> ln_gain, ln_bias;  // [D]
  Var<T> w_in;              // [D, 2E]
  SsmParams<T> fwd, bwd;
  Var<T> w_out;  // [E, D]
  size_t D = 0, E = 0;

  static MambaBlockParams init(size_t D, size_t E, size_t S, RngStream& rng) {
    MambaBlockParams p;
    p.D = D;
    p.E = E;
    p.ln_gain = parameter(Tensor<T>::full({D}, T(1)));
    p.ln_bias = parameter(Tensor<T>({D}));
    T gd = T(1) / std::sqrt(static_cast<T>(D));
    p.w_in = parameter(Tensor<T>::uniform({D, 2 * E}, rng, -gd, gd));
    p.fwd = SsmParams<T>::init(E, S, rng);
    p.bwd = SsmParams<T>::init(E, S, rng);
    T ge = T(1) / std::sqrt(static_cast<T>(E));
    p.w_out = parameter(Tensor<T>::uniform({E, D}, rng, -ge, ge));
    return p;
  }
};

template <typename T>
Var<T> mamba_block(const Var<T>& x, const MambaBlockParams<T>& p) {
  require(x->value.rank() == 3 && x->value.shape()[2] == p.D,
          "mamba_block width mismatch: input ", shape_str(x->value.shape()),
          " vs block width ", p.D);
  Var<T> h = layer_norm(x, p.ln_gain, p.ln_bias);
  Var<T> u = matmul(h, p.w_in);
  Var<T> v = slice_last(u, 0, p.E);
  Var<T> g = slice_last(u, p.E, p.E);
  Var<T> s = add(selective_scan(v, p.fwd, ScanDirection::forward),
                 selective_scan(v, p.bwd, ScanDirection::backward));
  Var<T> gated = mul(s, silu(g));
  return add(x, matmul(gated, p.w_out));
}

}  // namespace pmae
