// SPDX-License-Identifier: Apache-2.0
#include "mdps/denoiser.hpp"

#include <stdexcept>

namespace mdps {

using nn::Conv2d;
using nn::GroupNorm;
using nn::Linear;
using nn::SelfAttention2d;
using nn::Tensor;

// ---------------------------------------------------------------------------
// GradBuffer
// ---------------------------------------------------------------------------

void GradBuffer::init(const std::vector<ParamRef>& params) {
  grads.clear();
  grads.reserve(params.size());
  for (const auto& p : params) grads.push_back(Tensor::zeros_like(*p.value));
}

void GradBuffer::zero() {
  for (auto& g : grads) std::fill(g.v.begin(), g.v.end(), 0.0f);
}

void GradBuffer::add(const GradBuffer& other) {
  if (other.grads.size() != grads.size()) {
    throw std::invalid_argument("GradBuffer::add: layout mismatch");
  }
  for (std::size_t i = 0; i < grads.size(); ++i) {
    for (std::size_t j = 0; j < grads[i].v.size(); ++j) grads[i].v[j] += other.grads[i].v[j];
  }
}

void GradBuffer::scale(float s) {
  for (auto& g : grads) {
    for (auto& v : g.v) v *= s;
  }
}

// ---------------------------------------------------------------------------
// Denoiser / TrainableDenoiser defaults
// ---------------------------------------------------------------------------

Denoiser::EvalVjp Denoiser::evaluate_with_vjp(const ImageTensor& x_t, int t) const {
  EvalVjp out;
  out.eps = evaluate(x_t, t);
  out.vjp = [this, x_t, t](const ImageTensor& upstream) { return input_vjp(x_t, t, upstream); };
  return out;
}

ImageTensor TrainableDenoiser::evaluate(const ImageTensor& x_t, int t) const {
  return forward_ctx(x_t, t)->eps;
}

ImageTensor TrainableDenoiser::input_vjp(const ImageTensor& x_t, int t,
                                         const ImageTensor& upstream) const {
  auto ctx = forward_ctx(x_t, t);
  return backward_ctx(*ctx, upstream, nullptr, true);
}

Denoiser::EvalVjp TrainableDenoiser::evaluate_with_vjp(const ImageTensor& x_t, int t) const {
  std::shared_ptr<DenoiserCtx> ctx = forward_ctx(x_t, t);
  EvalVjp out;
  out.eps = ctx->eps;
  out.vjp = [this, ctx](const ImageTensor& upstream) {
    return backward_ctx(*ctx, upstream, nullptr, true);
  };
  return out;
}

// ---------------------------------------------------------------------------
// Compact CNN backend: four 3x3 convs, timestep embedding added channel-wise
// ---------------------------------------------------------------------------

namespace {

class CompactDenoiser final : public TrainableDenoiser {
 public:
  CompactDenoiser(const ArchDescriptor& arch, Rng& rng)
      : arch_(arch),
        conv1_(arch.in_channels, arch.base_channels, 3),
        conv2_(arch.base_channels, arch.base_channels, 3),
        conv3_(arch.base_channels, arch.base_channels, 3),
        conv4_(arch.base_channels, arch.in_channels, 3),
        temb_fc_(arch.time_embed_dim, arch.time_embed_dim),
        proj1_(arch.time_embed_dim, arch.base_channels),
        proj2_(arch.time_embed_dim, arch.base_channels),
        proj3_(arch.time_embed_dim, arch.base_channels) {
    conv1_.init_he(rng);
    conv2_.init_he(rng);
    conv3_.init_he(rng);
    conv4_.init_he(rng);
    temb_fc_.init_he(rng);
    proj1_.init_he(rng);
    proj2_.init_he(rng);
    proj3_.init_he(rng);
    // zero-init the head so the initial prediction is 0
    std::fill(conv4_.w.v.begin(), conv4_.w.v.end(), 0.0f);
  }

  std::string architecture() const override { return "compact"; }

  struct Ctx final : DenoiserCtx {
    ImageTensor x;
    std::vector<float> e0, e_pre, e;
    ImageTensor h1, a1, h2, a2, h3, a3;
  };

  std::unique_ptr<DenoiserCtx> forward_ctx(const ImageTensor& x, int t) const override {
    auto ctx = std::make_unique<Ctx>();
    ctx->x = x;
    ctx->e0 = nn::sinusoidal_embedding(t, arch_.time_embed_dim);
    ctx->e_pre = temb_fc_.forward(ctx->e0);
    ctx->e = nn::silu_vec(ctx->e_pre);

    ctx->h1 = conv1_.forward(x);
    nn::add_channel_bias(ctx->h1, proj1_.forward(ctx->e));
    ctx->a1 = nn::silu(ctx->h1);

    ctx->h2 = conv2_.forward(ctx->a1);
    nn::add_channel_bias(ctx->h2, proj2_.forward(ctx->e));
    ctx->a2 = nn::silu(ctx->h2);

    ctx->h3 = conv3_.forward(ctx->a2);
    nn::add_channel_bias(ctx->h3, proj3_.forward(ctx->e));
    ctx->a3 = nn::silu(ctx->h3);

    ctx->eps = conv4_.forward(ctx->a3);
    return ctx;
  }

  ImageTensor backward_ctx(const DenoiserCtx& base, const ImageTensor& d_eps, GradBuffer* gb,
                           bool need_dx) const override {
    const auto& c = dynamic_cast<const Ctx&>(base);
    Tensor* g = nullptr;
    auto grad = [&](int i) { return gb ? &gb->grads[static_cast<std::size_t>(i)] : g; };

    std::vector<float> de(c.e.size(), 0.0f);
    auto add_vec = [](std::vector<float>& dst, const std::vector<float>& src) {
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
    };

    ImageTensor da3 = conv4_.backward(c.a3, d_eps, grad(6), grad(7), true);
    ImageTensor dh3 = nn::silu_backward(c.h3, da3);
    add_vec(de, proj3_.backward(c.e, nn::channel_bias_backward(dh3), grad(14), grad(15), true));

    ImageTensor da2 = conv3_.backward(c.a2, dh3, grad(4), grad(5), true);
    ImageTensor dh2 = nn::silu_backward(c.h2, da2);
    add_vec(de, proj2_.backward(c.e, nn::channel_bias_backward(dh2), grad(12), grad(13), true));

    ImageTensor da1 = conv2_.backward(c.a1, dh2, grad(2), grad(3), true);
    ImageTensor dh1 = nn::silu_backward(c.h1, da1);
    add_vec(de, proj1_.backward(c.e, nn::channel_bias_backward(dh1), grad(10), grad(11), true));

    if (gb) {
      std::vector<float> de_pre = nn::silu_vec_backward(c.e_pre, de);
      temb_fc_.backward(c.e0, de_pre, grad(8), grad(9), false);
    }

    return conv1_.backward(c.x, dh1, grad(0), grad(1), need_dx);
  }

  std::vector<ParamRef> parameters() override {
    return {
        {"conv1.w", &conv1_.w}, {"conv1.b", &conv1_.b}, {"conv2.w", &conv2_.w},
        {"conv2.b", &conv2_.b}, {"conv3.w", &conv3_.w}, {"conv3.b", &conv3_.b},
        {"conv4.w", &conv4_.w}, {"conv4.b", &conv4_.b}, {"temb.w", &temb_fc_.w},
        {"temb.b", &temb_fc_.b}, {"proj1.w", &proj1_.w}, {"proj1.b", &proj1_.b},
        {"proj2.w", &proj2_.w}, {"proj2.b", &proj2_.b}, {"proj3.w", &proj3_.w},
        {"proj3.b", &proj3_.b},
    };
  }

 private:
  ArchDescriptor arch_;
  Conv2d conv1_, conv2_, conv3_, conv4_;
  Linear temb_fc_, proj1_, proj2_, proj3_;
};

// ---------------------------------------------------------------------------
// U-Net backend: two downsampling levels, residual blocks with GroupNorm and
// channel-wise timestep bias, skip concatenation, optional bottleneck
// self-attention.
// ---------------------------------------------------------------------------

// largest divisor of ch not exceeding 8
int norm_groups(int ch) {
  for (int g = std::min(8, ch); g > 1; --g) {
    if (ch % g == 0) return g;
  }
  return 1;
}

struct ResBlock {
  GroupNorm gn1, gn2;
  Conv2d conv1, conv2;
  Linear temb_proj;
  Conv2d skip;  // 1x1, present when in != out
  bool has_skip = false;

  ResBlock() = default;
  ResBlock(int in_ch, int out_ch, int temb_dim)
      : gn1(in_ch, norm_groups(in_ch)),
        gn2(out_ch, norm_groups(out_ch)),
        conv1(in_ch, out_ch, 3),
        conv2(out_ch, out_ch, 3),
        temb_proj(temb_dim, out_ch),
        has_skip(in_ch != out_ch) {
    if (has_skip) skip = Conv2d(in_ch, out_ch, 1);
  }

  void init(Rng& rng) {
    conv1.init_he(rng);
    conv2.init_he(rng);
    temb_proj.init_he(rng);
    if (has_skip) skip.init_he(rng);
  }

  struct Ctx {
    ImageTensor x, n1, a1, h, n2, a2;
  };

  ImageTensor forward(const ImageTensor& x, const std::vector<float>& e, Ctx* ctx) const {
    ImageTensor n1 = gn1.forward(x);
    ImageTensor a1 = nn::silu(n1);
    ImageTensor h = conv1.forward(a1);
    nn::add_channel_bias(h, temb_proj.forward(e));
    ImageTensor n2 = gn2.forward(h);
    ImageTensor a2 = nn::silu(n2);
    ImageTensor y = conv2.forward(a2);
    if (has_skip) {
      ImageTensor sk = skip.forward(x);
      for (std::size_t i = 0; i < y.size(); ++i) y.data[i] += sk.data[i];
    } else {
      for (std::size_t i = 0; i < y.size(); ++i) y.data[i] += x.data[i];
    }
    if (ctx) {
      ctx->x = x;
      ctx->n1 = std::move(n1);
      ctx->a1 = std::move(a1);
      ctx->h = std::move(h);
      ctx->n2 = std::move(n2);
      ctx->a2 = std::move(a2);
    }
    return y;
  }

  struct Grads {
    Tensor gn1_g, gn1_b, gn2_g, gn2_b, conv1_w, conv1_b, conv2_w, conv2_b, temb_w, temb_b,
        skip_w, skip_b;

    void init(const ResBlock& r) {
      gn1_g = Tensor::zeros_like(r.gn1.gamma);
      gn1_b = Tensor::zeros_like(r.gn1.beta);
      gn2_g = Tensor::zeros_like(r.gn2.gamma);
      gn2_b = Tensor::zeros_like(r.gn2.beta);
      conv1_w = Tensor::zeros_like(r.conv1.w);
      conv1_b = Tensor::zeros_like(r.conv1.b);
      conv2_w = Tensor::zeros_like(r.conv2.w);
      conv2_b = Tensor::zeros_like(r.conv2.b);
      temb_w = Tensor::zeros_like(r.temb_proj.w);
      temb_b = Tensor::zeros_like(r.temb_proj.b);
      if (r.has_skip) {
        skip_w = Tensor::zeros_like(r.skip.w);
        skip_b = Tensor::zeros_like(r.skip.b);
      } else {
        skip_w = Tensor();
        skip_b = Tensor();
      }
    }
  };

  /// dy -> dx; de accumulates the embedding gradient.
  ImageTensor backward(const ImageTensor& dy, const std::vector<float>& e, const Ctx& c,
                       Grads* g, std::vector<float>* de) const {
    ImageTensor da2 = conv2.backward(c.a2, dy, g ? &g->conv2_w : nullptr,
                                     g ? &g->conv2_b : nullptr, true);
    ImageTensor dn2 = nn::silu_backward(c.n2, da2);
    ImageTensor dh = gn2.backward(c.h, dn2, g ? &g->gn2_g : nullptr, g ? &g->gn2_b : nullptr);
    std::vector<float> bias_grad = nn::channel_bias_backward(dh);
    std::vector<float> de_part = temb_proj.backward(e, bias_grad, g ? &g->temb_w : nullptr,
                                                    g ? &g->temb_b : nullptr, de != nullptr);
    if (de) {
      for (std::size_t i = 0; i < de->size(); ++i) (*de)[i] += de_part[i];
    }
    ImageTensor da1 = conv1.backward(c.a1, dh, g ? &g->conv1_w : nullptr,
                                     g ? &g->conv1_b : nullptr, true);
    ImageTensor dn1 = nn::silu_backward(c.n1, da1);
    ImageTensor dx = gn1.backward(c.x, dn1, g ? &g->gn1_g : nullptr, g ? &g->gn1_b : nullptr);
    if (has_skip) {
      ImageTensor dsk = skip.backward(c.x, dy, g ? &g->skip_w : nullptr,
                                      g ? &g->skip_b : nullptr, true);
      for (std::size_t i = 0; i < dx.size(); ++i) dx.data[i] += dsk.data[i];
    } else {
      for (std::size_t i = 0; i < dx.size(); ++i) dx.data[i] += dy.data[i];
    }
    return dx;
  }
};

class UNetDenoiser final : public TrainableDenoiser {
 public:
  UNetDenoiser(const ArchDescriptor& arch, Rng& rng)
      : arch_(arch),
        conv_in_(arch.in_channels, arch.base_channels, 3),
        enc1_(arch.base_channels, arch.base_channels, arch.time_embed_dim),
        down1_(arch.base_channels, 2 * arch.base_channels, 3, 2),
        enc2_(2 * arch.base_channels, 2 * arch.base_channels, arch.time_embed_dim),
        down2_(2 * arch.base_channels, 2 * arch.base_channels, 3, 2),
        mid1_(2 * arch.base_channels, 2 * arch.base_channels, arch.time_embed_dim),
        attn_(2 * arch.base_channels),
        mid2_(2 * arch.base_channels, 2 * arch.base_channels, arch.time_embed_dim),
        up1conv_(2 * arch.base_channels, 2 * arch.base_channels, 3),
        dec2_(4 * arch.base_channels, 2 * arch.base_channels, arch.time_embed_dim),
        up2conv_(2 * arch.base_channels, arch.base_channels, 3),
        dec1_(2 * arch.base_channels, arch.base_channels, arch.time_embed_dim),
        out_norm_(arch.base_channels, norm_groups(arch.base_channels)),
        out_conv_(arch.base_channels, arch.in_channels, 3),
        temb_fc1_(arch.time_embed_dim, arch.time_embed_dim),
        temb_fc2_(arch.time_embed_dim, arch.time_embed_dim) {
    conv_in_.init_he(rng);
    enc1_.init(rng);
    down1_.init_he(rng);
    enc2_.init(rng);
    down2_.init_he(rng);
    mid1_.init(rng);
    attn_.init(rng);
    mid2_.init(rng);
    up1conv_.init_he(rng);
    dec2_.init(rng);
    up2conv_.init_he(rng);
    dec1_.init(rng);
    out_conv_.init_he(rng);
    temb_fc1_.init_he(rng);
    temb_fc2_.init_he(rng);
    std::fill(out_conv_.w.v.begin(), out_conv_.w.v.end(), 0.0f);
  }

  std::string architecture() const override { return "unet"; }

  struct Ctx final : DenoiserCtx {
    std::vector<float> e0, e1_pre, e1, e2_pre, e;
    ImageTensor x, cin, o_enc1, p1, o_enc2, p2, o_mid1, o_attn, o_mid2;
    ImageTensor u1, u1c, cat2, o_dec2, u2, u2c, cat1, o_dec1, on, oa;
    ResBlock::Ctx c_enc1, c_enc2, c_mid1, c_mid2, c_dec2, c_dec1;
    SelfAttention2d::Ctx c_attn;
  };

  std::unique_ptr<DenoiserCtx> forward_ctx(const ImageTensor& x, int t) const override {
    if (x.height % 4 != 0 || x.width % 4 != 0) {
      throw std::invalid_argument("unet backend requires height/width divisible by 4");
    }
    auto ctx = std::make_unique<Ctx>();
    ctx->x = x;
    ctx->e0 = nn::sinusoidal_embedding(t, arch_.time_embed_dim);
    ctx->e1_pre = temb_fc1_.forward(ctx->e0);
    ctx->e1 = nn::silu_vec(ctx->e1_pre);
    ctx->e2_pre = temb_fc2_.forward(ctx->e1);
    ctx->e = nn::silu_vec(ctx->e2_pre);

    ctx->cin = conv_in_.forward(x);
    ctx->o_enc1 = enc1_.forward(ctx->cin, ctx->e, &ctx->c_enc1);
    ctx->p1 = down1_.forward(ctx->o_enc1);
    ctx->o_enc2 = enc2_.forward(ctx->p1, ctx->e, &ctx->c_enc2);
    ctx->p2 = down2_.forward(ctx->o_enc2);

    ctx->o_mid1 = mid1_.forward(ctx->p2, ctx->e, &ctx->c_mid1);
    ctx->o_attn = arch_.attention ? attn_.forward(ctx->o_mid1, &ctx->c_attn) : ctx->o_mid1;
    ctx->o_mid2 = mid2_.forward(ctx->o_attn, ctx->e, &ctx->c_mid2);

    ctx->u1 = nn::upsample_nearest2x(ctx->o_mid2);
    ctx->u1c = up1conv_.forward(ctx->u1);
    ctx->cat2 = nn::concat_channels(ctx->u1c, ctx->o_enc2);
    ctx->o_dec2 = dec2_.forward(ctx->cat2, ctx->e, &ctx->c_dec2);

    ctx->u2 = nn::upsample_nearest2x(ctx->o_dec2);
    ctx->u2c = up2conv_.forward(ctx->u2);
    ctx->cat1 = nn::concat_channels(ctx->u2c, ctx->o_enc1);
    ctx->o_dec1 = dec1_.forward(ctx->cat1, ctx->e, &ctx->c_dec1);

    ctx->on = out_norm_.forward(ctx->o_dec1);
    ctx->oa = nn::silu(ctx->on);
    ctx->eps = out_conv_.forward(ctx->oa);
    return ctx;
  }

  ImageTensor backward_ctx(const DenoiserCtx& base, const ImageTensor& d_eps, GradBuffer* gb,
                           bool need_dx) const override {
    const auto& c = dynamic_cast<const Ctx&>(base);
    auto G = [&](int i) -> Tensor* { return gb ? &gb->grads[static_cast<std::size_t>(i)] : nullptr; };
    std::vector<float> de(c.e.size(), 0.0f);
    std::vector<float>* de_ptr = gb ? &de : nullptr;

    auto res_bwd = [&](const ResBlock& blk, const ImageTensor& dy, const ResBlock::Ctx& bc,
                       int slot) {
      if (!gb) return blk.backward(dy, c.e, bc, nullptr, nullptr);
      ResBlock::Grads rg;
      rg.init(blk);
      ImageTensor dx = blk.backward(dy, c.e, bc, &rg, de_ptr);
      store_res_grads(rg, slot, gb);
      return dx;
    };

    // head
    ImageTensor doa = out_conv_.backward(c.oa, d_eps, G(kOutConvW), G(kOutConvB), true);
    ImageTensor don = nn::silu_backward(c.on, doa);
    ImageTensor dd1 = out_norm_.backward(c.o_dec1, don, G(kOutNormG), G(kOutNormB));

    // decoder level 1
    ImageTensor dcat1 = res_bwd(dec1_, dd1, c.c_dec1, kDec1);
    ImageTensor du2c, dskip1;
    nn::split_channels(dcat1, arch_.base_channels, &du2c, &dskip1);
    ImageTensor du2 = up2conv_.backward(c.u2, du2c, G(kUp2W), G(kUp2B), true);
    ImageTensor dd2 = nn::upsample_nearest2x_backward(du2);

    // decoder level 2
    ImageTensor dcat2 = res_bwd(dec2_, dd2, c.c_dec2, kDec2);
    ImageTensor du1c, dskip2;
    nn::split_channels(dcat2, 2 * arch_.base_channels, &du1c, &dskip2);
    ImageTensor du1 = up1conv_.backward(c.u1, du1c, G(kUp1W), G(kUp1B), true);
    ImageTensor dmid2 = nn::upsample_nearest2x_backward(du1);

    // bottleneck
    ImageTensor dattn = res_bwd(mid2_, dmid2, c.c_mid2, kMid2);
    ImageTensor dmid1;
    if (arch_.attention) {
      SelfAttention2d::Grads ag;
      ag.init(attn_);
      dmid1 = attn_.backward(dattn, c.c_attn, gb ? &ag : nullptr);
      if (gb) store_attn_grads(ag, gb);
    } else {
      dmid1 = std::move(dattn);
    }
    ImageTensor dp2 = res_bwd(mid1_, dmid1, c.c_mid1, kMid1);

    // encoder level 2
    ImageTensor denc2 = down2_.backward(c.o_enc2, dp2, G(kDown2W), G(kDown2B), true);
    for (std::size_t i = 0; i < denc2.size(); ++i) denc2.data[i] += dskip2.data[i];
    ImageTensor dp1 = res_bwd(enc2_, denc2, c.c_enc2, kEnc2);

    // encoder level 1
    ImageTensor denc1 = down1_.backward(c.o_enc1, dp1, G(kDown1W), G(kDown1B), true);
    for (std::size_t i = 0; i < denc1.size(); ++i) denc1.data[i] += dskip1.data[i];
    ImageTensor dcin = res_bwd(enc1_, denc1, c.c_enc1, kEnc1);

    if (gb) {
      std::vector<float> de2_pre = nn::silu_vec_backward(c.e2_pre, de);
      std::vector<float> de1 = temb_fc2_.backward(c.e1, de2_pre, G(kTemb2W), G(kTemb2B), true);
      std::vector<float> de1_pre = nn::silu_vec_backward(c.e1_pre, de1);
      temb_fc1_.backward(c.e0, de1_pre, G(kTemb1W), G(kTemb1B), false);
    }

    return conv_in_.backward(c.x, dcin, G(kConvInW), G(kConvInB), need_dx);
  }

  std::vector<ParamRef> parameters() override;

 private:
  // parameter slot layout; resblocks occupy 12 consecutive slots
  enum : int {
    kConvInW = 0, kConvInB,
    kEnc1, kEnc2 = kEnc1 + 12, kMid1 = kEnc2 + 12, kMid2 = kMid1 + 12,
    kDec2 = kMid2 + 12, kDec1 = kDec2 + 12,
    kDown1W = kDec1 + 12, kDown1B, kDown2W, kDown2B,
    kUp1W, kUp1B, kUp2W, kUp2B,
    kOutNormG, kOutNormB, kOutConvW, kOutConvB,
    kTemb1W, kTemb1B, kTemb2W, kTemb2B,
    kAttn  // 10 slots when attention is enabled
  };

  void append_res_params(std::vector<ParamRef>& out, const std::string& prefix, ResBlock& r) {
    out.push_back({prefix + ".gn1.g", &r.gn1.gamma});
    out.push_back({prefix + ".gn1.b", &r.gn1.beta});
    out.push_back({prefix + ".gn2.g", &r.gn2.gamma});
    out.push_back({prefix + ".gn2.b", &r.gn2.beta});
    out.push_back({prefix + ".conv1.w", &r.conv1.w});
    out.push_back({prefix + ".conv1.b", &r.conv1.b});
    out.push_back({prefix + ".conv2.w", &r.conv2.w});
    out.push_back({prefix + ".conv2.b", &r.conv2.b});
    out.push_back({prefix + ".temb.w", &r.temb_proj.w});
    out.push_back({prefix + ".temb.b", &r.temb_proj.b});
    // keep the slot count fixed: identity skips store 1-element dummies
    out.push_back({prefix + ".skip.w", r.has_skip ? &r.skip.w : &dummy_});
    out.push_back({prefix + ".skip.b", r.has_skip ? &r.skip.b : &dummy_});
  }

  void store_res_grads(const ResBlock::Grads& g, int base, GradBuffer* gb) const {
    auto put = [&](int off, const Tensor& t) {
      auto& dst = gb->grads[static_cast<std::size_t>(base + off)];
      if (t.v.size() == dst.v.size()) {  // identity skips leave empty tensors
        for (std::size_t i = 0; i < dst.v.size(); ++i) dst.v[i] += t.v[i];
      }
    };
    put(0, g.gn1_g);
    put(1, g.gn1_b);
    put(2, g.gn2_g);
    put(3, g.gn2_b);
    put(4, g.conv1_w);
    put(5, g.conv1_b);
    put(6, g.conv2_w);
    put(7, g.conv2_b);
    put(8, g.temb_w);
    put(9, g.temb_b);
    put(10, g.skip_w);
    put(11, g.skip_b);
  }

  void store_attn_grads(const SelfAttention2d::Grads& g, GradBuffer* gb) const {
    const int base = kAttn;
    auto put = [&](int off, const Tensor& t) {
      auto& dst = gb->grads[static_cast<std::size_t>(base + off)];
      for (std::size_t i = 0; i < dst.v.size(); ++i) dst.v[i] += t.v[i];
    };
    put(0, g.norm_gamma);
    put(1, g.norm_beta);
    put(2, g.q_w);
    put(3, g.q_b);
    put(4, g.k_w);
    put(5, g.k_b);
    put(6, g.v_w);
    put(7, g.v_b);
    put(8, g.proj_w);
    put(9, g.proj_b);
  }

  ArchDescriptor arch_;
  Conv2d conv_in_;
  ResBlock enc1_;
  Conv2d down1_;
  ResBlock enc2_;
  Conv2d down2_;
  ResBlock mid1_;
  SelfAttention2d attn_;
  ResBlock mid2_;
  Conv2d up1conv_;
  ResBlock dec2_;
  Conv2d up2conv_;
  ResBlock dec1_;
  GroupNorm out_norm_;
  Conv2d out_conv_;
  Linear temb_fc1_, temb_fc2_;
  Tensor dummy_{std::vector<int>{1}};  // placeholder for identity-skip slots
};

std::vector<ParamRef> UNetDenoiser::parameters() {
  std::vector<ParamRef> out;
  out.push_back({"conv_in.w", &conv_in_.w});
  out.push_back({"conv_in.b", &conv_in_.b});
  append_res_params(out, "enc1", enc1_);
  append_res_params(out, "enc2", enc2_);
  append_res_params(out, "mid1", mid1_);
  append_res_params(out, "mid2", mid2_);
  append_res_params(out, "dec2", dec2_);
  append_res_params(out, "dec1", dec1_);
  out.push_back({"down1.w", &down1_.w});
  out.push_back({"down1.b", &down1_.b});
  out.push_back({"down2.w", &down2_.w});
  out.push_back({"down2.b", &down2_.b});
  out.push_back({"up1.w", &up1conv_.w});
  out.push_back({"up1.b", &up1conv_.b});
  out.push_back({"up2.w", &up2conv_.w});
  out.push_back({"up2.b", &up2conv_.b});
  out.push_back({"out_norm.g", &out_norm_.gamma});
  out.push_back({"out_norm.b", &out_norm_.beta});
  out.push_back({"out_conv.w", &out_conv_.w});
  out.push_back({"out_conv.b", &out_conv_.b});
  out.push_back({"temb1.w", &temb_fc1_.w});
  out.push_back({"temb1.b", &temb_fc1_.b});
  out.push_back({"temb2.w", &temb_fc2_.w});
  out.push_back({"temb2.b", &temb_fc2_.b});
  if (arch_.attention) {
    out.push_back({"attn.norm.g", &attn_.norm.gamma});
    out.push_back({"attn.norm.b", &attn_.norm.beta});
    out.push_back({"attn.q.w", &attn_.q.w});
    out.push_back({"attn.q.b", &attn_.q.b});
    out.push_back({"attn.k.w", &attn_.k.w});
    out.push_back({"attn.k.b", &attn_.k.b});
    out.push_back({"attn.v.w", &attn_.v.w});
    out.push_back({"attn.v.b", &attn_.v.b});
    out.push_back({"attn.proj.w", &attn_.proj.w});
    out.push_back({"attn.proj.b", &attn_.proj.b});
  }
  return out;
}

}  // namespace

std::unique_ptr<TrainableDenoiser> make_denoiser(const ArchDescriptor& arch, Rng& init_rng) {
  if (arch.in_channels < 1 || arch.base_channels < 1 || arch.time_embed_dim < 2 ||
      arch.time_embed_dim % 2 != 0) {
    throw std::invalid_argument("make_denoiser: invalid architecture descriptor");
  }
  if (arch.backend == "compact") {
    return std::make_unique<CompactDenoiser>(arch, init_rng);
  }
  if (arch.backend == "unet") {
    return std::make_unique<UNetDenoiser>(arch, init_rng);
  }
  throw std::invalid_argument("make_denoiser: unknown backend '" + arch.backend +
                              "' (expected compact|unet)");
}

}  // namespace mdps
