#pragma once

#include <algorithm>
#include <iostream>
#include <numeric>
#include <vector>

#include "pulsemae/params.hpp"
#include "pulsemae/student.hpp"

namespace pmae {

struct AmnConfig {
  TubeletConfig tub;  // same grid as the student; embed_dim is the AMN width
  size_t blocks = 2;
  size_t state_size = 8;
  double spatial_amp = 1.0;  // Gaussian center-prior amplitude
};

// Fixed center prior over the spatial grid, replicated across time:
// amplitude * exp(-(dr^2 + dc^2) / (2 sigma^2)) with sigma = grid_width / 4.
template <typename T>
Tensor<T> spatial_prior(const TubeletConfig& tub, double amplitude) {
  size_t nt = tub.grid_t(), nh = tub.grid_h(), nw = tub.grid_w();
  Tensor<T> prior({nt * nh * nw});
  double cr = (double(nh) - 1) / 2, cc = (double(nw) - 1) / 2;
  double sigma = std::max(double(nw) / 4, 1e-6);
  for (size_t ti = 0; ti < nt; ++ti)
    for (size_t hi = 0; hi < nh; ++hi)
      for (size_t wi = 0; wi < nw; ++wi) {
        double dr = double(hi) - cr, dc = double(wi) - cc;
        prior[(ti * nh + hi) * nw + wi] = static_cast<T>(
            amplitude * std::exp(-(dr * dr + dc * dc) / (2 * sigma * sigma)));
      }
  return prior;
}

template <typename T>
struct AmnParams {
  AmnConfig cfg;
  Var<T> w_embed, b_embed;  // own patch embedding, independent of the student
  std::vector<MambaBlockParams<T>> blocks;
  Var<T> ln_g, ln_b;
  Var<T> w_imp, b_imp;   // [Da,1], [1]
  Tensor<T> pos;         // [N,Da] fixed
  Tensor<T> b_spatial;   // [N] fixed center prior

  static AmnParams init(const AmnConfig& cfg, RngStream& rng) {
    AmnParams p;
    p.cfg = cfg;
    size_t Da = cfg.tub.embed_dim, N = cfg.tub.tokens();
    size_t P = cfg.tub.patch_elems();
    auto u = [&](Shape s, size_t fan_in) {
      T g = T(1) / std::sqrt(static_cast<T>(fan_in));
      return parameter(Tensor<T>::uniform(std::move(s), rng, -g, g));
    };
    p.w_embed = u({P, Da}, P);
    p.b_embed = parameter(Tensor<T>({Da}));
    for (size_t i = 0; i < cfg.blocks; ++i)
      p.blocks.push_back(
          MambaBlockParams<T>::init(Da, Da, cfg.state_size, rng));
    p.ln_g = parameter(Tensor<T>::full({Da}, T(1)));
    p.ln_b = parameter(Tensor<T>({Da}));
    p.w_imp = u({Da, size_t(1)}, Da);
    p.b_imp = parameter(Tensor<T>({1}));
    p.pos = sinusoidal_positions<T>(N, Da);
    p.b_spatial = spatial_prior<T>(cfg.tub, cfg.spatial_amp);
    return p;
  }

  void register_params(ParamSet<T>& ps) const {
    ps.add("amn.w_embed", w_embed, false, "amn");
    ps.add("amn.b_embed", b_embed, true, "amn");
    for (size_t i = 0; i < blocks.size(); ++i) {
      const std::string pfx = "amn.blk" + std::to_string(i);
      const auto& b = blocks[i];
      ps.add(pfx + ".ln_g", b.ln_gain, true, "amn");
      ps.add(pfx + ".ln_b", b.ln_bias, true, "amn");
      ps.add(pfx + ".w_in", b.w_in, false, "amn");
      const SsmParams<T>* dirs[2] = {&b.fwd, &b.bwd};
      const char* names[2] = {".fwd", ".bwd"};
      for (int j = 0; j < 2; ++j) {
        ps.add(pfx + names[j] + ".a_log", dirs[j]->a_log, false, "amn");
        ps.add(pfx + names[j] + ".w_delta", dirs[j]->w_delta, false, "amn");
        ps.add(pfx + names[j] + ".b_delta", dirs[j]->b_delta, true, "amn");
        ps.add(pfx + names[j] + ".w_b", dirs[j]->w_b, false, "amn");
        ps.add(pfx + names[j] + ".w_c", dirs[j]->w_c, false, "amn");
        ps.add(pfx + names[j] + ".d", dirs[j]->d, false, "amn");
      }
      ps.add(pfx + ".w_out", b.w_out, false, "amn");
    }
    ps.add("amn.ln_g", ln_g, true, "amn");
    ps.add("amn.ln_b", ln_b, true, "amn");
    ps.add("amn.w_imp", w_imp, false, "amn");
    ps.add("amn.b_imp", b_imp, true, "amn");
  }
};

// S = squeeze(ImpHead(LN(MambaBlocks(PatchEmbed(X) + PosEnc)))) + B_spatial
template <typename T>
Var<T> importance_scores(const Tensor<T>& video, const AmnParams<T>& p) {
  Tensor<T> patches = extract_patches(video, p.cfg.tub);
  size_t B = patches.shape()[0], N = patches.shape()[1];
  Var<T> h = add(add(matmul(constant(std::move(patches)), p.w_embed),
                     p.b_embed),
                 constant(p.pos));
  for (const auto& blk : p.blocks) h = mamba_block(h, blk);
  h = layer_norm(h, p.ln_g, p.ln_b);
  Var<T> s = reshape(add(matmul(h, p.w_imp), p.b_imp), {B, N});
  return add(s, constant(p.b_spatial));
}

template <typename T>
struct MaskSample {
  MaskBatch mask;
  Var<T> logits;  // [B,N], post temperature and clamp; graph-connected
};

// Gumbel-Top-K: the N_vis largest perturbed logits stay visible, everything
// else is masked. Ties break toward the lower token index.
template <typename T>
MaskSample<T> sample_mask(const Var<T>& scores, double rho, double tau,
                          RngStream& rng) {
  require(rho > 0 && rho < 1, "mask ratio must lie in (0,1), got ", rho);
  require(tau > 0, "temperature must be positive, got ", tau);
  const Shape& s = scores->value.shape();
  require(s.size() == 2, "sample_mask expects scores [B,N]");
  size_t B = s[0], N = s[1];
  size_t n_vis = static_cast<size_t>(double(N) * (1.0 - rho));
  require(n_vis > 0 && n_vis < N,
          "degenerate mask: N_vis = ", n_vis, " of N = ", N);
  Var<T> logits = clamp(mul_scalar(scores, T(1.0 / tau)), T(-10), T(10));
  std::vector<uint8_t> bits(B * N, 1);
  std::vector<size_t> order(N);
  std::vector<double> perturbed(N);
  for (size_t b = 0; b < B; ++b) {
    for (size_t i = 0; i < N; ++i)
      perturbed[i] = double(logits->value[b * N + i]) + rng.gumbel();
    std::iota(order.begin(), order.end(), size_t(0));
    std::partial_sort(order.begin(), order.begin() + n_vis, order.end(),
                      [&](size_t a, size_t c) {
                        if (perturbed[a] != perturbed[c])
                          return perturbed[a] > perturbed[c];
                        return a < c;
                      });
    for (size_t k = 0; k < n_vis; ++k) bits[b * N + order[k]] = 0;
  }
  return {MaskBatch::from_bits(B, N, std::move(bits)), logits};
}

// Per sample: sum over visible tokens of log-softmax(logits).
template <typename T>
Var<T> mask_log_prob(const Var<T>& logits, const MaskBatch& mask) {
  require(logits->value.shape() == Shape{mask.B, mask.N},
          "mask_log_prob: logits ", shape_str(logits->value.shape()),
          " do not match mask [", mask.B, ",", mask.N, "]");
  Var<T> lsm = log_softmax(logits, -1);
  Tensor<T> vis({mask.B, mask.N});
  for (size_t i = 0; i < vis.numel(); ++i)
    vis[i] = mask.bits[i] ? T(0) : T(1);
  return reduce_sum(mul(lsm, constant(vis)), {1});
}

// REINFORCE with a batch-mean baseline. The reward is detached: gradients
// reach only the AMN through log_probs.
template <typename T>
Var<T> policy_loss(const Var<T>& log_probs, const Tensor<T>& reward, T beta,
                   T alpha) {
  require(log_probs->value.rank() == 1, "policy_loss expects log_probs [B]");
  require(reward.numel() == log_probs->value.numel(),
          "policy_loss reward/log_prob length mismatch");
  if (reward.numel() == 1)
    std::cerr << "warning: policy_loss with batch size 1; the batch-mean "
                 "baseline makes the advantage identically zero\n";
  T baseline = reward.mean();
  Tensor<T> advantage(reward.shape());
  for (size_t i = 0; i < reward.numel(); ++i)
    advantage[i] = (reward[i] - baseline) * beta;
  return mul_scalar(neg(mean_all(mul(log_probs, constant(advantage)))),
                    alpha);
}

}  // namespace pmae
