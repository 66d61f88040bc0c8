#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "pulsemae/params.hpp"
#include "pulsemae/ssm.hpp"

namespace pmae {

// One clip: pixel intensities in [0,1], shape [C,T,H,W], plus frame rate.
struct VideoClip {
  Tensor<float> data;
  double fs = 30.0;
};

struct TubeletConfig {
  size_t t = 2, h = 8, w = 8;
  size_t C = 3, T = 32, H = 32, W = 32;
  size_t embed_dim = 64;

  void validate() const {
    require(t > 0 && h > 0 && w > 0, "tubelet extents must be positive");
    require(T % t == 0, "tubelet does not tile the time axis: T = ", T,
            ", t = ", t);
    require(H % h == 0, "tubelet does not tile the height axis: H = ", H,
            ", h = ", h);
    require(W % w == 0, "tubelet does not tile the width axis: W = ", W,
            ", w = ", w);
  }
  size_t grid_t() const { return T / t; }
  size_t grid_h() const { return H / h; }
  size_t grid_w() const { return W / w; }
  size_t tokens() const {
    validate();
    return grid_t() * grid_h() * grid_w();
  }
  size_t patch_elems() const { return C * t * h * w; }
};

// Binary visibility mask over tokens; 1 = masked. Cardinality is identical
// across the batch by construction.
struct MaskBatch {
  size_t B = 0, N = 0;
  std::vector<uint8_t> bits;  // [B*N], 1 = masked
  std::vector<std::vector<size_t>> visible;  // ascending per sample
  std::vector<std::vector<size_t>> masked;   // ascending per sample

  static MaskBatch from_bits(size_t B, size_t N, std::vector<uint8_t> bits) {
    MaskBatch m;
    m.B = B;
    m.N = N;
    m.bits = std::move(bits);
    require(m.bits.size() == B * N, "mask bits size mismatch");
    m.visible.resize(B);
    m.masked.resize(B);
    for (size_t b = 0; b < B; ++b)
      for (size_t i = 0; i < N; ++i)
        (m.bits[b * N + i] ? m.masked[b] : m.visible[b]).push_back(i);
    size_t k = m.visible.empty() ? 0 : m.visible[0].size();
    for (size_t b = 0; b < B; ++b)
      require(m.visible[b].size() == k,
              "ragged per-sample visible cardinality: ", m.visible[b].size(),
              " vs ", k);
    return m;
  }
  static MaskBatch none(size_t B, size_t N) {
    return from_bits(B, N, std::vector<uint8_t>(B * N, 0));
  }
  size_t n_visible() const { return visible.empty() ? 0 : visible[0].size(); }
  size_t n_masked() const { return N - n_visible(); }

  template <typename T>
  Tensor<T> bits_tensor() const {
    Tensor<T> t({B, N, 1});
    for (size_t i = 0; i < bits.size(); ++i) t[i] = static_cast<T>(bits[i]);
    return t;
  }
};

// Interleaved sine/cosine table over the flattened canonical token index.
template <typename T>
Tensor<T> sinusoidal_positions(size_t N, size_t D) {
  Tensor<T> pe({N, D});
  for (size_t pos = 0; pos < N; ++pos)
    for (size_t i = 0; i < D; ++i) {
      double denom = std::pow(10000.0, double(2 * (i / 2)) / double(D));
      double angle = double(pos) / denom;
      pe[pos * D + i] =
          static_cast<T>(i % 2 == 0 ? std::sin(angle) : std::cos(angle));
    }
  return pe;
}

// Non-overlapping tubelets flattened in canonical order: token index runs
// time-major, then row, then column; patch interior is (c, dt, dy, dx).
template <typename T>
Tensor<T> extract_patches(const Tensor<T>& video, const TubeletConfig& cfg) {
  const Shape& s = video.shape();
  require(s.size() == 5, "extract_patches expects [B,C,T,H,W], got ",
          shape_str(s));
  require(s[1] == cfg.C && s[2] == cfg.T && s[3] == cfg.H && s[4] == cfg.W,
          "video dims ", shape_str(s), " do not match tubelet config");
  cfg.validate();
  size_t B = s[0], N = cfg.tokens(), P = cfg.patch_elems();
  size_t nt = cfg.grid_t(), nh = cfg.grid_h(), nw = cfg.grid_w();
  Tensor<T> out({B, N, P});
  for (size_t b = 0; b < B; ++b)
    for (size_t ti = 0; ti < nt; ++ti)
      for (size_t hi = 0; hi < nh; ++hi)
        for (size_t wi = 0; wi < nw; ++wi) {
          size_t tok = (ti * nh + hi) * nw + wi;
          T* dst = out.data() + (b * N + tok) * P;
          for (size_t c = 0; c < cfg.C; ++c)
            for (size_t dt = 0; dt < cfg.t; ++dt)
              for (size_t dy = 0; dy < cfg.h; ++dy) {
                const T* src = video.data() +
                               (((b * cfg.C + c) * cfg.T + ti * cfg.t + dt) *
                                    cfg.H +
                                hi * cfg.h + dy) *
                                   cfg.W +
                               wi * cfg.w;
                for (size_t dx = 0; dx < cfg.w; ++dx) *dst++ = src[dx];
              }
        }
  return out;
}

struct StudentConfig {
  TubeletConfig tub;
  size_t enc_blocks = 4;
  size_t dec_dim = 32;
  size_t dec_blocks = 2;
  size_t mlp_hidden = 128;
  size_t state_size = 8;
  double dropout_p = 0.1;
};

template <typename T>
struct StudentParams {
  StudentConfig cfg;
  Var<T> w_embed, b_embed;  // [P,D], [D]
  std::vector<MambaBlockParams<T>> enc;
  Var<T> enc_ln_g, enc_ln_b;
  Var<T> w_enc2dec;   // [D,Dd]
  Var<T> mask_token;  // [Dd]
  std::vector<MambaBlockParams<T>> dec;
  Var<T> dec_ln_g, dec_ln_b;
  Var<T> w_recon, b_recon;  // [Dd,P], [P]
  Var<T> w_maskpool;        // [Dd,D]: mask token at encoder width for pooling
  Var<T> w_mlp1, b_mlp1;    // [D,Hm], [Hm]
  Var<T> w_mlp2, b_mlp2;    // [Hm,T], [T]
  Tensor<T> pos_enc;        // [N,D] fixed
  Tensor<T> pos_dec;        // [N,Dd] fixed

  static StudentParams init(const StudentConfig& cfg, RngStream& rng) {
    StudentParams p;
    p.cfg = cfg;
    size_t D = cfg.tub.embed_dim, Dd = cfg.dec_dim;
    size_t N = cfg.tub.tokens(), P = cfg.tub.patch_elems();
    auto u = [&](Shape s, size_t fan_in) {
      T g = T(1) / std::sqrt(static_cast<T>(fan_in));
      return parameter(Tensor<T>::uniform(std::move(s), rng, -g, g));
    };
    p.w_embed = u({P, D}, P);
    p.b_embed = parameter(Tensor<T>({D}));
    for (size_t i = 0; i < cfg.enc_blocks; ++i)
      p.enc.push_back(MambaBlockParams<T>::init(D, D, cfg.state_size, rng));
    p.enc_ln_g = parameter(Tensor<T>::full({D}, T(1)));
    p.enc_ln_b = parameter(Tensor<T>({D}));
    p.w_enc2dec = u({D, Dd}, D);
    p.mask_token = u({size_t(1), Dd}, Dd);
    for (size_t i = 0; i < cfg.dec_blocks; ++i)
      p.dec.push_back(MambaBlockParams<T>::init(Dd, Dd, cfg.state_size, rng));
    p.dec_ln_g = parameter(Tensor<T>::full({Dd}, T(1)));
    p.dec_ln_b = parameter(Tensor<T>({Dd}));
    p.w_recon = u({Dd, P}, Dd);
    p.b_recon = parameter(Tensor<T>({P}));
    p.w_maskpool = u({Dd, D}, Dd);
    p.w_mlp1 = u({D, cfg.mlp_hidden}, D);
    p.b_mlp1 = parameter(Tensor<T>({cfg.mlp_hidden}));
    p.w_mlp2 = u({cfg.mlp_hidden, cfg.tub.T}, cfg.mlp_hidden);
    p.b_mlp2 = parameter(Tensor<T>({cfg.tub.T}));
    p.pos_enc = sinusoidal_positions<T>(N, D);
    p.pos_dec = sinusoidal_positions<T>(N, Dd);
    return p;
  }

  void register_block(ParamSet<T>& ps, const std::string& pfx,
                      const MambaBlockParams<T>& b,
                      const std::string& role) const {
    ps.add(pfx + ".ln_g", b.ln_gain, true, role);
    ps.add(pfx + ".ln_b", b.ln_bias, true, role);
    ps.add(pfx + ".w_in", b.w_in, false, role);
    const SsmParams<T>* dirs[2] = {&b.fwd, &b.bwd};
    const char* names[2] = {".fwd", ".bwd"};
    for (int i = 0; i < 2; ++i) {
      ps.add(pfx + names[i] + ".a_log", dirs[i]->a_log, false, role);
      ps.add(pfx + names[i] + ".w_delta", dirs[i]->w_delta, false, role);
      ps.add(pfx + names[i] + ".b_delta", dirs[i]->b_delta, true, role);
      ps.add(pfx + names[i] + ".w_b", dirs[i]->w_b, false, role);
      ps.add(pfx + names[i] + ".w_c", dirs[i]->w_c, false, role);
      ps.add(pfx + names[i] + ".d", dirs[i]->d, false, role);
    }
    ps.add(pfx + ".w_out", b.w_out, false, role);
  }

  void register_encoder_and_head(ParamSet<T>& ps) const {
    for (size_t i = 0; i < enc.size(); ++i)
      register_block(ps, "student.enc" + std::to_string(i), enc[i],
                     "encoder");
    ps.add("student.enc_ln_g", enc_ln_g, true, "encoder");
    ps.add("student.enc_ln_b", enc_ln_b, true, "encoder");
    ps.add("student.w_mlp1", w_mlp1, false, "rppg_head");
    ps.add("student.b_mlp1", b_mlp1, true, "rppg_head");
    ps.add("student.w_mlp2", w_mlp2, false, "rppg_head");
    ps.add("student.b_mlp2", b_mlp2, true, "rppg_head");
  }

  void register_params(ParamSet<T>& ps) const {
    ps.add("student.w_embed", w_embed, false, "tokenizer");
    ps.add("student.b_embed", b_embed, true, "tokenizer");
    register_encoder_and_head(ps);
    ps.add("student.w_enc2dec", w_enc2dec, false, "decoder");
    ps.add("student.mask_token", mask_token, false, "decoder");
    for (size_t i = 0; i < dec.size(); ++i)
      register_block(ps, "student.dec" + std::to_string(i), dec[i],
                     "decoder");
    ps.add("student.dec_ln_g", dec_ln_g, true, "decoder");
    ps.add("student.dec_ln_b", dec_ln_b, true, "decoder");
    ps.add("student.w_recon", w_recon, false, "decoder");
    ps.add("student.b_recon", b_recon, true, "decoder");
    ps.add("student.w_maskpool", w_maskpool, false, "rppg_head");
  }
};

// Patch embedding of a video batch plus fixed sinusoidal positions: [B,N,D].
template <typename T>
Var<T> tokenize(const Tensor<T>& video, const StudentParams<T>& p) {
  Tensor<T> patches = extract_patches(video, p.cfg.tub);
  Var<T> tok = add(matmul(constant(std::move(patches)), p.w_embed),
                   p.b_embed);
  return add(tok, constant(p.pos_enc));
}

// Gathers visible tokens in canonical order and runs the encoder stack.
template <typename T>
Var<T> encode(const Var<T>& tokens, const MaskBatch& mask,
              const StudentParams<T>& p) {
  require(tokens->value.rank() == 3 &&
              tokens->value.shape()[1] == mask.N,
          "encode: token count ", shape_str(tokens->value.shape()),
          " does not match mask N = ", mask.N);
  Var<T> x = mask.n_masked() == 0 ? tokens : gather_rows(tokens, mask.visible);
  for (const auto& blk : p.enc) x = mamba_block(x, blk);
  return layer_norm(x, p.enc_ln_g, p.enc_ln_b);
}

// Projects visible embeddings to decoder width, inserts the learned mask
// token at masked positions (restoring canonical spatiotemporal order),
// adds decoder positions, runs the decoder stack, and reconstructs only the
// masked patches: [B, N-K, P].
template <typename T>
Var<T> decode_and_reconstruct(const Var<T>& visible, const MaskBatch& mask,
                              const StudentParams<T>& p) {
  Var<T> proj = matmul(visible, p.w_enc2dec);
  Var<T> full = scatter_rows(proj, mask.visible, mask.N);
  Var<T> mask_part =
      mul(constant(mask.template bits_tensor<T>()), p.mask_token);
  full = add(full, mask_part);
  full = add(full, constant(p.pos_dec));
  for (const auto& blk : p.dec) full = mamba_block(full, blk);
  full = layer_norm(full, p.dec_ln_g, p.dec_ln_b);
  Var<T> masked_only = gather_rows(full, mask.masked);
  return add(matmul(masked_only, p.w_recon), p.b_recon);
}

// Full-length token sequence for pooling: encoder outputs at visible
// positions, the mask token (mapped to encoder width) at masked positions.
template <typename T>
Var<T> pooled_sequence(const Var<T>& encoded_visible, const MaskBatch& mask,
                       const StudentParams<T>& p) {
  if (mask.n_masked() == 0) return encoded_visible;
  Var<T> full = scatter_rows(encoded_visible, mask.visible, mask.N);
  Var<T> tok_at_enc_width = matmul(p.mask_token, p.w_maskpool);  // [1,D]
  Var<T> mask_part =
      mul(constant(mask.template bits_tensor<T>()), tok_at_enc_width);
  return add(full, mask_part);
}

// Mean pooling over tokens, then a two-layer MLP to a length-T waveform.
template <typename T>
Var<T> rppg_head(const Var<T>& token_embeddings, const StudentParams<T>& p,
                 RngStream& rng, bool training) {
  Var<T> pooled = reduce_mean(token_embeddings, {1});
  Var<T> hidden = silu(add(matmul(pooled, p.w_mlp1), p.b_mlp1));
  hidden = dropout(hidden, p.cfg.dropout_p, rng, training);
  return add(matmul(hidden, p.w_mlp2), p.b_mlp2);
}

template <typename T>
struct StudentForward {
  Var<T> reconstructed;  // [B, N-K, P] (empty mask -> unset)
  Var<T> waveform;       // [B, T]
  Tensor<T> masked_targets;  // [B, N-K, P] raw pixels in [0,1]
};

template <typename T>
StudentForward<T> student_forward(const Tensor<T>& video,
                                  const MaskBatch& mask,
                                  const StudentParams<T>& p, RngStream& rng,
                                  bool training) {
  StudentForward<T> out;
  Var<T> tokens = tokenize(video, p);
  Var<T> enc = encode(tokens, mask, p);
  if (mask.n_masked() > 0) {
    out.reconstructed = decode_and_reconstruct(enc, mask, p);
    Tensor<T> patches = extract_patches(video, p.cfg.tub);
    size_t B = mask.B, M = mask.n_masked(), P = p.cfg.tub.patch_elems();
    out.masked_targets = Tensor<T>({B, M, P});
    for (size_t b = 0; b < B; ++b)
      for (size_t m = 0; m < M; ++m)
        std::copy_n(patches.data() + (b * mask.N + mask.masked[b][m]) * P, P,
                    out.masked_targets.data() + (b * M + m) * P);
  }
  out.waveform = rppg_head(pooled_sequence(enc, mask, p), p, rng, training);
  return out;
}

}  // namespace pmae
