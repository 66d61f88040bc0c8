#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <chrono>
#include <cmath>

#include "pulsemae/gradcheck.hpp"
#include "pulsemae/ssm.hpp"

using namespace pmae;

namespace {

// Plain-loop reference recurrence, kept independent of scan_core. Also
// reports the state history so tests can bound it.
template <typename T>
void reference_scan(const Tensor<T>& x, const Tensor<T>& delta,
                    const Tensor<T>& A, const Tensor<T>& Bm,
                    const Tensor<T>& Cm, const Tensor<T>& d, Tensor<T>& y,
                    Tensor<T>& h_hist) {
  size_t B = x.shape()[0], L = x.shape()[1], E = x.shape()[2];
  size_t S = A.shape()[1];
  y = Tensor<T>({B, L, E});
  h_hist = Tensor<T>({B, L, E, S});
  for (size_t b = 0; b < B; ++b)
    for (size_t e = 0; e < E; ++e) {
      std::vector<T> h(S, 0);
      for (size_t t = 0; t < L; ++t) {
        size_t o = b * L + t;
        T dte = delta[o * E + e];
        T xte = x[o * E + e];
        T acc = 0;
        for (size_t s = 0; s < S; ++s) {
          T abar = std::exp(dte * A[e * S + s]);
          h[s] = abar * h[s] + dte * Bm[o * S + s] * xte;
          h_hist[(o * E + e) * S + s] = h[s];
          acc += Cm[o * S + s] * h[s];
        }
        y[o * E + e] = acc + d[e] * xte;
      }
    }
}

SsmParams<double> random_ssm(size_t E, size_t S, uint64_t seed) {
  RngStream rng(seed, streams::kTest);
  return SsmParams<double>::init(E, S, rng);
}

}  // namespace

TEST_CASE("zero input with zero skip gives zero output") {
  auto p = random_ssm(3, 2, 1);
  p.d = parameter(Tensor<double>({3}));
  auto x = constant(Tensor<double>({2, 5, 3}));
  auto y = selective_scan(x, p, ScanDirection::forward);
  for (size_t i = 0; i < y->value.numel(); ++i) CHECK(y->value[i] == 0.0);
}

TEST_CASE("single step matches the closed form") {
  size_t E = 2, S = 2;
  auto p = random_ssm(E, S, 2);
  RngStream rng(3, streams::kTest);
  auto xv = Tensor<double>::uniform({1, 1, E}, rng, -1, 1);
  auto y = selective_scan(constant(xv), p, ScanDirection::forward);

  // delta = softplus(x W_delta + b), h_1 = delta*B_1*x, y = C_1.h_1 + d*x
  std::vector<double> delta(E), Bv(S), Cv(S);
  for (size_t e = 0; e < E; ++e) {
    double acc = p.b_delta->value[e];
    for (size_t i = 0; i < E; ++i)
      acc += xv[i] * p.w_delta->value[i * E + e];
    delta[e] = std::log1p(std::exp(acc));
  }
  for (size_t s = 0; s < S; ++s) {
    double b = 0, c = 0;
    for (size_t i = 0; i < E; ++i) {
      b += xv[i] * p.w_b->value[i * S + s];
      c += xv[i] * p.w_c->value[i * S + s];
    }
    Bv[s] = b;
    Cv[s] = c;
  }
  for (size_t e = 0; e < E; ++e) {
    double acc = 0;
    for (size_t s = 0; s < S; ++s) acc += Cv[s] * delta[e] * Bv[s] * xv[e];
    acc += p.d->value[e] * xv[e];
    CHECK(y->value[e] == doctest::Approx(acc).epsilon(1e-10));
  }
}

TEST_CASE("backward direction equals reverse-scan-reverse") {
  auto p = random_ssm(4, 3, 5);
  RngStream rng(7, streams::kTest);
  auto xv = Tensor<double>::uniform({2, 6, 4}, rng, -1, 1);
  auto x = constant(xv);
  auto yb = selective_scan(x, p, ScanDirection::backward);
  auto yf = reverse_axis(
      selective_scan(reverse_axis(x, 1), p, ScanDirection::forward), 1);
  for (size_t i = 0; i < yb->value.numel(); ++i)
    CHECK(yb->value[i] == doctest::Approx(yf->value[i]).epsilon(1e-12));
}

TEST_CASE("scan_core matches the reference recurrence") {
  RngStream rng(11, streams::kTest);
  size_t B = 2, L = 9, E = 4, S = 3;
  auto x = Tensor<double>::uniform({B, L, E}, rng, -1, 1);
  auto delta = Tensor<double>::uniform({B, L, E}, rng, 0.01, 1.5);
  Tensor<double> A({E, S});
  for (size_t i = 0; i < A.numel(); ++i) A[i] = -rng.uniform(0.5, 8.0);
  auto Bm = Tensor<double>::uniform({B, L, S}, rng, -1, 1);
  auto Cm = Tensor<double>::uniform({B, L, S}, rng, -1, 1);
  auto d = Tensor<double>::uniform({E}, rng, -1, 1);
  auto y = scan_core(constant(x), constant(delta), constant(A), constant(Bm),
                     constant(Cm), constant(d));
  Tensor<double> yref, href;
  reference_scan(x, delta, A, Bm, Cm, d, yref, href);
  for (size_t i = 0; i < yref.numel(); ++i)
    CHECK(y->value[i] == doctest::Approx(yref[i]).epsilon(1e-6));
}

TEST_CASE("empty sequence is a structured error") {
  auto p = random_ssm(2, 2, 1);
  auto x = constant(Tensor<double>({1, 0, 2}));
  CHECK_THROWS_AS(selective_scan(x, p, ScanDirection::forward),
                  ValidationError);
}

TEST_CASE("discrete decay stays in (0,1) and the state stays bounded") {
  auto p = random_ssm(4, 8, 13);
  RngStream rng(17, streams::kTest);
  size_t B = 1, L = 512, E = 4, S = 8;
  auto xv = Tensor<double>::gaussian({B, L, E}, rng);
  // recompute delta and decay the way selective_scan does
  auto x = constant(xv);
  auto delta = softplus(add(matmul(x, p.w_delta), p.b_delta));
  Tensor<double> A({E, S});
  for (size_t i = 0; i < A.numel(); ++i)
    A[i] = -std::exp(p.a_log->value[i]);
  for (size_t o = 0; o < B * L; ++o)
    for (size_t e = 0; e < E; ++e)
      for (size_t s = 0; s < S; ++s) {
        double abar = std::exp(delta->value[o * E + e] * A[e * S + s]);
        CHECK(abar > 0.0);
        CHECK(abar < 1.0);
      }
  auto Bm = matmul(x, p.w_b);
  auto Cm = matmul(x, p.w_c);
  Tensor<double> y, h;
  reference_scan(xv, delta->value, A, Bm->value, Cm->value, p.d->value, y, h);
  CHECK(h.max_abs() < 1e3);
}

TEST_CASE("scan gradients pass finite differences") {
  RngStream rng(19, streams::kTest);
  size_t B = 1, L = 4, E = 3, S = 2;
  auto x = Tensor<double>::uniform({B, L, E}, rng, -1, 1);
  auto delta = Tensor<double>::uniform({B, L, E}, rng, 0.05, 1.0);
  Tensor<double> A({E, S});
  for (size_t i = 0; i < A.numel(); ++i) A[i] = -rng.uniform(0.5, 4.0);
  auto Bm = Tensor<double>::uniform({B, L, S}, rng, -1, 1);
  auto Cm = Tensor<double>::uniform({B, L, S}, rng, -1, 1);
  auto d = Tensor<double>::uniform({E}, rng, -1, 1);
  RngStream wr(23, streams::kTest);
  auto w = constant(Tensor<double>::uniform({B, L, E}, wr, -1, 1));
  double err = finite_diff_check(
      [&](const std::vector<Var<double>>& v) {
        return sum_all(
            mul(scan_core(v[0], v[1], v[2], v[3], v[4], v[5]), w));
      },
      {x, delta, A, Bm, Cm, d});
  CHECK(err < 1e-3);
}

TEST_CASE("mamba_block with zero output projection is the identity") {
  RngStream rng(29, streams::kTest);
  auto p = MambaBlockParams<double>::init(4, 4, 2, rng);
  p.w_out = parameter(Tensor<double>({4, 4}));
  auto xv = Tensor<double>::uniform({2, 5, 4}, rng, -1, 1);
  auto y = mamba_block(constant(xv), p);
  for (size_t i = 0; i < xv.numel(); ++i) CHECK(y->value[i] == xv[i]);
}

TEST_CASE("mamba_block width mismatch is a structured error") {
  RngStream rng(31, streams::kTest);
  auto p = MambaBlockParams<double>::init(4, 4, 2, rng);
  CHECK_THROWS_AS(mamba_block(constant(Tensor<double>({1, 3, 6})), p),
                  ValidationError);
}

TEST_CASE("mamba_block gradients pass finite differences") {
  RngStream rng(37, streams::kTest);
  size_t D = 3, E = 3, S = 2, B = 1, L = 3;
  auto xv = Tensor<double>::uniform({B, L, D}, rng, -1, 1);
  RngStream wr(41, streams::kTest);
  auto w = constant(Tensor<double>::uniform({B, L, D}, wr, -1, 1));
  auto build = [&](const std::vector<Var<double>>& v) {
    MambaBlockParams<double> p;
    p.D = D;
    p.E = E;
    p.ln_gain = v[1];
    p.ln_bias = v[2];
    p.w_in = v[3];
    p.fwd = {v[4], v[5], v[6], v[7], v[8], v[9]};
    p.bwd = {v[10], v[11], v[12], v[13], v[14], v[15]};
    p.w_out = v[16];
    return sum_all(mul(mamba_block(v[0], p), w));
  };
  RngStream pr(43, streams::kTest);
  auto ssm_inputs = [&](std::vector<Tensor<double>>& out) {
    Tensor<double> alog({E, S});
    for (size_t i = 0; i < alog.numel(); ++i)
      alog[i] = std::log(pr.uniform(0.5, 4.0));
    out.push_back(alog);
    out.push_back(Tensor<double>::uniform({E, E}, pr, -0.5, 0.5));
    out.push_back(Tensor<double>::uniform({E}, pr, -0.1, 0.1));
    out.push_back(Tensor<double>::uniform({E, S}, pr, -0.5, 0.5));
    out.push_back(Tensor<double>::uniform({E, S}, pr, -0.5, 0.5));
    out.push_back(Tensor<double>::uniform({E}, pr, 0.5, 1.0));
  };
  std::vector<Tensor<double>> inputs;
  inputs.push_back(xv);
  inputs.push_back(Tensor<double>::full({D}, 1.0));
  inputs.push_back(Tensor<double>::uniform({D}, pr, -0.1, 0.1));
  inputs.push_back(Tensor<double>::uniform({D, 2 * E}, pr, -0.5, 0.5));
  ssm_inputs(inputs);
  ssm_inputs(inputs);
  inputs.push_back(Tensor<double>::uniform({E, D}, pr, -0.5, 0.5));
  CHECK(finite_diff_check(build, inputs) < 1e-3);
}

TEST_CASE("swapping directions and reversing time reverses the scan sum") {
  auto pf = random_ssm(3, 2, 47);
  auto pb = random_ssm(3, 2, 53);
  RngStream rng(59, streams::kTest);
  auto xv = Tensor<double>::uniform({2, 7, 3}, rng, -1, 1);
  auto x = constant(xv);
  auto sum_fb = add(selective_scan(x, pf, ScanDirection::forward),
                    selective_scan(x, pb, ScanDirection::backward));
  auto xr = reverse_axis(x, 1);
  auto sum_swapped = add(selective_scan(xr, pb, ScanDirection::forward),
                         selective_scan(xr, pf, ScanDirection::backward));
  auto expect = reverse_axis(sum_fb, 1);
  for (size_t i = 0; i < expect->value.numel(); ++i)
    CHECK(sum_swapped->value[i] ==
          doctest::Approx(expect->value[i]).epsilon(1e-10));
}

TEST_CASE("scan runtime is roughly linear in sequence length") {
  auto p = random_ssm(16, 8, 61);
  RngStream rng(67, streams::kTest);
  double prev = 0;
  bool ok = true;
  for (size_t L : {64, 128, 256, 512}) {
    auto x = constant(Tensor<double>::uniform({2, L, 16}, rng, -1, 1));
    double best = 1e30;
    for (int rep = 0; rep < 3; ++rep) {
      auto t0 = std::chrono::steady_clock::now();
      auto y = selective_scan(x, p, ScanDirection::forward);
      auto t1 = std::chrono::steady_clock::now();
      best = std::min(best,
                      std::chrono::duration<double>(t1 - t0).count());
    }
    if (prev > 0 && best > 2.3 * prev) ok = false;
    prev = best;
  }
  CHECK(ok);
}
