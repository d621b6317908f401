// SPDX-License-Identifier: Apache-2.0
//
// U-shaped convolutional network with selective state-space (Mamba) layers
// in the encoder, for image-to-vector (positioning) and image-to-image
// (channel reconstruction) regression.
//
// Layout for stages = S, base width c0, stage widths c0 * 2^i:
//   encoder block 0:     two 3x3 conv + SiLU at full resolution
//   encoder block i>0:   stride-2 3x3 conv + SiLU, 3x3 conv + SiLU, then a
//                        residual Mamba layer over the feature map
//                        flattened to a [H*W, C] sequence
//   decoder block j:     nearest-neighbor upsample2x, concat with the
//                        matching encoder skip, two 3x3 conv + SiLU
//   head:                position -> global mean pool + affine to 2 reals;
//                        channel  -> 1x1 conv to out_ch planes
// Both heads are zero-initialized, so a fresh network outputs exactly zero.
//
// Flattening order is row-major over [H, W] (H outer), which for the
// channel images used here means frequency-major; `raster_transpose` flips
// to W-major as an ablation.  Nearest-neighbor upsampling (rather than
// transposed conv) avoids checkerboard artifacts.
//
// Parameter initialization order is fixed and documented: encoder block 0
// convs, then each deeper encoder block (down conv, conv, Mamba layer),
// then decoder blocks shallow-ward, then the head; a single Rng consumed in
// that order makes builds reproducible.

#pragma once

#include <string>
#include <utility>
#include <vector>

#include "xlmimo/autodiff.hpp"
#include "xlmimo/mamba.hpp"
#include "xlmimo/rng.hpp"

namespace xlm::ad {

enum class HeadKind : int { position = 0, channel = 1 };

struct NetConfig {
  int in_ch = 2;
  int out_ch = 2;  // channel-head output planes
  int in_h = 64;
  int in_w = 64;
  int stages = 4;
  int c0 = 16;
  int d_state = 16;
  int dt_rank = 0;  // 0 = Mamba default
  int k_conv = 4;
  HeadKind head = HeadKind::position;
  bool raster_transpose = false;

  int width(int stage) const { return c0 << stage; }

  void validate() const {
    if (stages < 2) throw InvalidParameter("net: stages must be >= 2");
    if (stages > 16) throw InvalidParameter("net: stages out of range");
    if (in_ch < 1 || out_ch < 1 || c0 < 1)
      throw InvalidParameter("net: channel counts must be positive");
    if (in_h < 1 || in_w < 1)
      throw InvalidParameter("net: spatial extents must be positive");
    if (d_state < 1 || k_conv < 1 || dt_rank < 0)
      throw InvalidParameter("net: bad state/conv parameters");
    const int div = 1 << (stages - 1);
    if (in_h % div != 0 || in_w % div != 0)
      throw InvalidParameter(
          "net: spatial extents " + std::to_string(in_h) + "x" +
          std::to_string(in_w) + " must be divisible by " +
          std::to_string(div));
  }
};

template <class T>
struct ConvLayer {
  ArrP<T> w;  // [c_out, c_in, k, k]
  ArrP<T> b;  // [c_out]

  void init(Rng& rng, int c_in, int c_out, int k) {
    w = make_param<T>({c_out, c_in, k, k});
    b = make_param<T>({c_out});
    const double bound = std::sqrt(1.0 / (static_cast<double>(c_in) * k * k));
    for (T& v : w->val) v = static_cast<T>(rng.uniform(-bound, bound));
    for (T& v : b->val) v = static_cast<T>(rng.uniform(-bound, bound));
  }

  void init_zero(int c_in, int c_out, int k) {
    w = make_param<T>({c_out, c_in, k, k});
    b = make_param<T>({c_out});
  }

  ArrP<T> apply(Tape<T>& tape, const ArrP<T>& x, int stride, int pad) const {
    return conv2d(tape, x, w, b, stride, pad);
  }
};

template <class T>
struct CpMambaModel {
  NetConfig cfg;

  ConvLayer<T> stem_a, stem_b;  // encoder block 0

  struct EncBlock {
    ConvLayer<T> down;  // stride 2
    ConvLayer<T> conv;
    MambaParams<T> mamba;
    MambaConfig mcfg;
  };
  std::vector<EncBlock> enc;  // blocks 1..S-1

  struct DecBlock {
    ConvLayer<T> conv_a;  // (skip + up) channels -> skip channels
    ConvLayer<T> conv_b;
  };
  std::vector<DecBlock> dec;  // deepest first

  // position head: affine [c0 -> 2]; channel head: 1x1 conv [c0 -> out_ch].
  ArrP<T> head_w;
  ArrP<T> head_b;
};

template <class T>
CpMambaModel<T> build_model(const NetConfig& cfg, Rng& rng) {
  cfg.validate();
  CpMambaModel<T> m;
  m.cfg = cfg;
  m.stem_a.init(rng, cfg.in_ch, cfg.width(0), 3);
  m.stem_b.init(rng, cfg.width(0), cfg.width(0), 3);
  m.enc.resize(cfg.stages - 1);
  for (int i = 1; i < cfg.stages; ++i) {
    auto& blk = m.enc[i - 1];
    blk.down.init(rng, cfg.width(i - 1), cfg.width(i), 3);
    blk.conv.init(rng, cfg.width(i), cfg.width(i), 3);
    blk.mcfg = MambaConfig{cfg.width(i), cfg.d_state, cfg.k_conv,
                           cfg.dt_rank};
    blk.mamba.init(rng, blk.mcfg);
  }
  m.dec.resize(cfg.stages - 1);
  for (int j = 0; j < cfg.stages - 1; ++j) {
    const int up_c = cfg.width(cfg.stages - 1 - j);
    const int skip_c = cfg.width(cfg.stages - 2 - j);
    m.dec[j].conv_a.init(rng, up_c + skip_c, skip_c, 3);
    m.dec[j].conv_b.init(rng, skip_c, skip_c, 3);
  }
  if (cfg.head == HeadKind::position) {
    m.head_w = make_param<T>({cfg.width(0), 2});
    m.head_b = make_param<T>({2});
  } else {
    ConvLayer<T> h;
    h.init_zero(cfg.width(0), cfg.out_ch, 1);
    m.head_w = h.w;
    m.head_b = h.b;
  }
  return m;
}

// [c, h, w] -> [c, w, h]; used by the raster-order ablation.
template <class T>
ArrP<T> spatial_swap(Tape<T>& tape, const ArrP<T>& a) {
  if (a->shape.size() != 3)
    throw InvalidParameter("spatial_swap: need [c,h,w], got " +
                           shape_str(a->shape));
  const int c = a->shape[0], h = a->shape[1], w = a->shape[2];
  auto out = make_array<T>({c, w, h}, a->requires_grad);
  for (int ch = 0; ch < c; ++ch)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        out->val[(static_cast<std::size_t>(ch) * w + x) * h + y] =
            a->val[(static_cast<std::size_t>(ch) * h + y) * w + x];
  if (out->requires_grad)
    tape.record([a, out, c, h, w]() {
      for (int ch = 0; ch < c; ++ch)
        for (int y = 0; y < h; ++y)
          for (int x = 0; x < w; ++x)
            a->grad[(static_cast<std::size_t>(ch) * h + y) * w + x] +=
                out->grad[(static_cast<std::size_t>(ch) * w + x) * h + y];
    });
  return out;
}

// Feature map [C, H, W] -> sequence [H*W, C] in row-major raster order
// (W-major if `transposed`); inverse restores the layout bitwise.
template <class T>
ArrP<T> to_sequence(Tape<T>& tape, const ArrP<T>& x, bool transposed) {
  ArrP<T> f = transposed ? spatial_swap(tape, x) : x;
  const int c = f->shape[0];
  const int hw = f->shape[1] * f->shape[2];
  return transpose2(tape, reshape(tape, f, {c, hw}));
}

template <class T>
ArrP<T> from_sequence(Tape<T>& tape, const ArrP<T>& seq, int c, int h, int w,
                      bool transposed) {
  ArrP<T> f = reshape(tape, transpose2(tape, seq),
                      transposed ? std::vector<int>{c, w, h}
                                 : std::vector<int>{c, h, w});
  return transposed ? spatial_swap(tape, f) : f;
}

// Full forward pass.  Output: position head -> [2]; channel head ->
// [out_ch, in_h, in_w].
template <class T>
ArrP<T> net_forward(Tape<T>& tape, const CpMambaModel<T>& m,
                    const ArrP<T>& x) {
  const NetConfig& cfg = m.cfg;
  if (x->shape != std::vector<int>{cfg.in_ch, cfg.in_h, cfg.in_w})
    throw InvalidParameter("net: input shape " + shape_str(x->shape) +
                           " does not match configured " +
                           shape_str({cfg.in_ch, cfg.in_h, cfg.in_w}));
  auto cur = silu(tape, m.stem_a.apply(tape, x, 1, 1));
  cur = silu(tape, m.stem_b.apply(tape, cur, 1, 1));

  std::vector<ArrP<T>> skips;
  skips.reserve(cfg.stages - 1);
  for (int i = 1; i < cfg.stages; ++i) {
    skips.push_back(cur);
    const auto& blk = m.enc[i - 1];
    cur = silu(tape, blk.down.apply(tape, cur, 2, 1));
    cur = silu(tape, blk.conv.apply(tape, cur, 1, 1));
    const int c = cur->shape[0], h = cur->shape[1], w = cur->shape[2];
    auto seq = to_sequence(tape, cur, cfg.raster_transpose);
    auto mixed = mamba_forward(tape, seq, blk.mamba, blk.mcfg);
    cur = add(tape, cur,
              from_sequence(tape, mixed, c, h, w, cfg.raster_transpose));
  }

  for (int j = 0; j < cfg.stages - 1; ++j) {
    cur = upsample2x(tape, cur);
    cur = concat(tape, cur, skips[cfg.stages - 2 - j], 0);
    cur = silu(tape, m.dec[j].conv_a.apply(tape, cur, 1, 1));
    cur = silu(tape, m.dec[j].conv_b.apply(tape, cur, 1, 1));
  }

  if (cfg.head == HeadKind::position) {
    auto pooled = reshape(tape, mean_pool_hw(tape, cur), {1, cfg.width(0)});
    auto out = add(tape, matmul(tape, pooled, m.head_w), m.head_b);
    return reshape(tape, out, {2});
  }
  return conv2d(tape, cur, m.head_w, m.head_b, 1, 0);
}

template <class T>
std::vector<std::pair<std::string, ArrP<T>>> named_params(
    const CpMambaModel<T>& m) {
  std::vector<std::pair<std::string, ArrP<T>>> out;
  out.emplace_back("enc0.conv1.w", m.stem_a.w);
  out.emplace_back("enc0.conv1.b", m.stem_a.b);
  out.emplace_back("enc0.conv2.w", m.stem_b.w);
  out.emplace_back("enc0.conv2.b", m.stem_b.b);
  for (std::size_t i = 0; i < m.enc.size(); ++i) {
    const std::string p = "enc" + std::to_string(i + 1);
    out.emplace_back(p + ".down.w", m.enc[i].down.w);
    out.emplace_back(p + ".down.b", m.enc[i].down.b);
    out.emplace_back(p + ".conv.w", m.enc[i].conv.w);
    out.emplace_back(p + ".conv.b", m.enc[i].conv.b);
    m.enc[i].mamba.collect(p + ".mamba", out);
  }
  for (std::size_t j = 0; j < m.dec.size(); ++j) {
    const std::string p = "dec" + std::to_string(j);
    out.emplace_back(p + ".conv1.w", m.dec[j].conv_a.w);
    out.emplace_back(p + ".conv1.b", m.dec[j].conv_a.b);
    out.emplace_back(p + ".conv2.w", m.dec[j].conv_b.w);
    out.emplace_back(p + ".conv2.b", m.dec[j].conv_b.b);
  }
  out.emplace_back("head.w", m.head_w);
  out.emplace_back("head.b", m.head_b);
  return out;
}

template <class T>
std::vector<ArrP<T>> param_list(const CpMambaModel<T>& m) {
  std::vector<ArrP<T>> out;
  for (auto& [name, arr] : named_params(m)) out.push_back(arr);
  return out;
}

template <class T>
std::size_t param_count(const CpMambaModel<T>& m) {
  std::size_t n = 0;
  for (auto& [name, arr] : named_params(m)) n += arr->numel();
  return n;
}

// FLOP accounting for one forward pass: 2 * m * k * n per matmul,
// 2 * C_in * kh * kw per conv output element, 2 * taps per depthwise-conv
// output element, 6 per scan state update (recurrence + readout), and 4 per
// element for cheap maps (SiLU/sigmoid/discretize).  Biases, copies and
// concatenations are not counted.
inline double flop_estimate(const NetConfig& cfg) {
  cfg.validate();
  const auto conv_flops = [](int ci, int co, int ho, int wo) {
    return 2.0 * ci * 9.0 * co * ho * wo;
  };
  double fl = 0.0;
  int h = cfg.in_h, w = cfg.in_w;
  fl += conv_flops(cfg.in_ch, cfg.width(0), h, w);
  fl += conv_flops(cfg.width(0), cfg.width(0), h, w);
  fl += 8.0 * cfg.width(0) * h * w;  // two SiLU maps
  for (int i = 1; i < cfg.stages; ++i) {
    h /= 2;
    w /= 2;
    const int c = cfg.width(i);
    fl += conv_flops(cfg.width(i - 1), c, h, w);
    fl += conv_flops(c, c, h, w);
    fl += 8.0 * c * h * w;
    const MambaConfig mc{c, cfg.d_state, cfg.k_conv, cfg.dt_rank};
    const double l = static_cast<double>(h) * w;
    const double din = mc.d_inner(), s = mc.d_state;
    fl += 2.0 * l * c * 4.0 * c;                    // in-projection
    fl += 2.0 * l * din * mc.d_conv;                // causal depthwise conv
    fl += 4.0 * l * din;                            // SiLU
    fl += 2.0 * l * din * mc.resolved_dt_rank() * 2.0;  // delta bottleneck
    fl += 2.0 * l * din * s * 2.0;                  // B_t and C_t
    fl += 4.0 * l * din * s;                        // discretization
    fl += 6.0 * l * din * s;                        // selective scan
    fl += 5.0 * l * din;                            // gate
    fl += 2.0 * l * din * c;                        // out-projection
  }
  for (int j = 0; j < cfg.stages - 1; ++j) {
    const int up_c = cfg.width(cfg.stages - 1 - j);
    const int skip_c = cfg.width(cfg.stages - 2 - j);
    h *= 2;
    w *= 2;
    fl += conv_flops(up_c + skip_c, skip_c, h, w);
    fl += conv_flops(skip_c, skip_c, h, w);
    fl += 8.0 * skip_c * h * w;
  }
  if (cfg.head == HeadKind::position)
    fl += 2.0 * cfg.width(0) * 2.0;
  else
    fl += 2.0 * cfg.width(0) * cfg.out_ch * h * w;
  return fl;
}

}  // namespace xlm::ad
