// SPDX-License-Identifier: Apache-2.0
#include "mdps/nn/layers.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>

namespace mdps::nn {

using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRM = Eigen::Map<RowMat>;
using MapRMConst = Eigen::Map<const RowMat>;

Tensor::Tensor(std::vector<int> s, float fill) : shape(std::move(s)) {
  std::size_t n = 1;
  for (int d : shape) {
    if (d < 1) throw std::invalid_argument("nn::Tensor: dims must be >= 1");
    n *= static_cast<std::size_t>(d);
  }
  v.assign(n, fill);
}

// ---------------------------------------------------------------------------
// Conv2d
// ---------------------------------------------------------------------------

Conv2d::Conv2d(int in_channels, int out_channels, int kernel, int stride_)
    : in_ch(in_channels),
      out_ch(out_channels),
      ksize(kernel),
      stride(stride_),
      pad((kernel - 1) / 2),
      w({out_channels, in_channels, kernel, kernel}),
      b({out_channels}) {}

void Conv2d::init_he(Rng& rng) {
  const double scale = std::sqrt(2.0 / (static_cast<double>(in_ch) * ksize * ksize));
  for (auto& x : w.v) x = static_cast<float>(rng.normal() * scale);
  for (auto& x : b.v) x = 0.0f;
}

namespace {

// Patch matrix: rows = in_ch*k*k, cols = output positions (row-major).
void im2col(const ImageTensor& x, int ksize, int stride, int pad, int oh, int ow, RowMat& cols) {
  const int k2 = ksize * ksize;
  cols.resize(x.channels * k2, oh * ow);
  for (int ic = 0; ic < x.channels; ++ic) {
    for (int ky = 0; ky < ksize; ++ky) {
      for (int kx = 0; kx < ksize; ++kx) {
        const int row = (ic * ksize + ky) * ksize + kx;
        float* dst = cols.data() + static_cast<std::size_t>(row) * oh * ow;
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= x.height) {
            for (int ox = 0; ox < ow; ++ox) dst[oy * ow + ox] = 0.0f;
            continue;
          }
          const float* src = &x.data[(static_cast<std::size_t>(ic) * x.height + iy) * x.width];
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox * stride - pad + kx;
            dst[oy * ow + ox] = (ix >= 0 && ix < x.width) ? src[ix] : 0.0f;
          }
        }
      }
    }
  }
}

void col2im(const RowMat& cols, int channels, int h, int w, int ksize, int stride, int pad,
            int oh, int ow, ImageTensor& dx) {
  for (int ic = 0; ic < channels; ++ic) {
    for (int ky = 0; ky < ksize; ++ky) {
      for (int kx = 0; kx < ksize; ++kx) {
        const int row = (ic * ksize + ky) * ksize + kx;
        const float* src = cols.data() + static_cast<std::size_t>(row) * oh * ow;
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= h) continue;
          float* dst = &dx.data[(static_cast<std::size_t>(ic) * h + iy) * w];
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox * stride - pad + kx;
            if (ix >= 0 && ix < w) dst[ix] += src[oy * ow + ox];
          }
        }
      }
    }
  }
}

}  // namespace

ImageTensor Conv2d::forward(const ImageTensor& x) const {
  if (x.channels != in_ch) {
    throw std::invalid_argument("Conv2d: expected " + std::to_string(in_ch) + " channels, got " +
                                std::to_string(x.channels));
  }
  const int oh = out_h(x.height), ow = out_w(x.width);
  RowMat cols;
  im2col(x, ksize, stride, pad, oh, ow, cols);

  ImageTensor y(out_ch, oh, ow, ValueRange::Free);
  MapRMConst wm(w.v.data(), out_ch, in_ch * ksize * ksize);
  MapRM ym(y.data.data(), out_ch, oh * ow);
  ym.noalias() = wm * cols;
  for (int oc = 0; oc < out_ch; ++oc) ym.row(oc).array() += b.v[static_cast<std::size_t>(oc)];
  return y;
}

ImageTensor Conv2d::backward(const ImageTensor& x, const ImageTensor& dy, Tensor* dw, Tensor* db,
                             bool need_dx) const {
  const int oh = out_h(x.height), ow = out_w(x.width);
  if (dy.channels != out_ch || dy.height != oh || dy.width != ow) {
    throw std::invalid_argument("Conv2d::backward: dy shape mismatch");
  }
  MapRMConst wm(w.v.data(), out_ch, in_ch * ksize * ksize);
  MapRMConst dym(dy.data.data(), out_ch, oh * ow);

  if (dw || db) {
    if (db) {
      Eigen::Map<Eigen::VectorXf> dbv(db->v.data(), out_ch);
      dbv.noalias() += dym.rowwise().sum();
    }
    if (dw) {
      RowMat cols;
      im2col(x, ksize, stride, pad, oh, ow, cols);
      MapRM dwm(dw->v.data(), out_ch, in_ch * ksize * ksize);
      dwm.noalias() += dym * cols.transpose();
    }
  }

  ImageTensor dx;
  if (need_dx) {
    dx = ImageTensor(in_ch, x.height, x.width, ValueRange::Free);
    RowMat dcols(in_ch * ksize * ksize, oh * ow);
    dcols.noalias() = wm.transpose() * dym;
    col2im(dcols, in_ch, x.height, x.width, ksize, stride, pad, oh, ow, dx);
  }
  return dx;
}

// ---------------------------------------------------------------------------
// Linear
// ---------------------------------------------------------------------------

Linear::Linear(int in_d, int out_d) : in_dim(in_d), out_dim(out_d), w({out_d, in_d}), b({out_d}) {}

void Linear::init_he(Rng& rng) {
  const double scale = std::sqrt(2.0 / static_cast<double>(in_dim));
  for (auto& x : w.v) x = static_cast<float>(rng.normal() * scale);
  for (auto& x : b.v) x = 0.0f;
}

std::vector<float> Linear::forward(const std::vector<float>& x) const {
  if (static_cast<int>(x.size()) != in_dim) {
    throw std::invalid_argument("Linear: input size mismatch");
  }
  std::vector<float> y(out_dim);
  MapRMConst wm(w.v.data(), out_dim, in_dim);
  Eigen::Map<const Eigen::VectorXf> xv(x.data(), in_dim);
  Eigen::Map<Eigen::VectorXf> yv(y.data(), out_dim);
  yv.noalias() = wm * xv;
  yv += Eigen::Map<const Eigen::VectorXf>(b.v.data(), out_dim);
  return y;
}

std::vector<float> Linear::backward(const std::vector<float>& x, const std::vector<float>& dy,
                                    Tensor* dw, Tensor* db, bool need_dx) const {
  MapRMConst wm(w.v.data(), out_dim, in_dim);
  Eigen::Map<const Eigen::VectorXf> dyv(dy.data(), out_dim);
  if (db) {
    Eigen::Map<Eigen::VectorXf>(db->v.data(), out_dim) += dyv;
  }
  if (dw) {
    MapRM dwm(dw->v.data(), out_dim, in_dim);
    dwm.noalias() += dyv * Eigen::Map<const Eigen::VectorXf>(x.data(), in_dim).transpose();
  }
  std::vector<float> dx;
  if (need_dx) {
    dx.resize(in_dim);
    Eigen::Map<Eigen::VectorXf>(dx.data(), in_dim).noalias() = wm.transpose() * dyv;
  }
  return dx;
}

// ---------------------------------------------------------------------------
// GroupNorm
// ---------------------------------------------------------------------------

GroupNorm::GroupNorm(int ch, int groups_) : channels(ch), groups(groups_), gamma({ch}, 1.0f), beta({ch}) {
  if (ch % groups_ != 0) {
    throw std::invalid_argument("GroupNorm: channels must divide evenly into groups");
  }
}

ImageTensor GroupNorm::forward(const ImageTensor& x) const {
  if (x.channels != channels) throw std::invalid_argument("GroupNorm: channel mismatch");
  ImageTensor y(x.channels, x.height, x.width, ValueRange::Free);
  const std::size_t plane = x.pixels();
  const int cpg = channels / groups;
  const std::size_t m = static_cast<std::size_t>(cpg) * plane;
  for (int g = 0; g < groups; ++g) {
    const float* xs = &x.data[static_cast<std::size_t>(g) * cpg * plane];
    double sum = 0.0, sq = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      sum += xs[i];
      sq += static_cast<double>(xs[i]) * xs[i];
    }
    const double mean = sum / static_cast<double>(m);
    const double var = sq / static_cast<double>(m) - mean * mean;
    const double inv = 1.0 / std::sqrt(var + eps);
    for (int cc = 0; cc < cpg; ++cc) {
      const int c = g * cpg + cc;
      const float ga = gamma.v[static_cast<std::size_t>(c)];
      const float be = beta.v[static_cast<std::size_t>(c)];
      const float* xp = &x.data[static_cast<std::size_t>(c) * plane];
      float* yp = &y.data[static_cast<std::size_t>(c) * plane];
      for (std::size_t i = 0; i < plane; ++i) {
        yp[i] = static_cast<float>((xp[i] - mean) * inv) * ga + be;
      }
    }
  }
  return y;
}

ImageTensor GroupNorm::backward(const ImageTensor& x, const ImageTensor& dy, Tensor* dgamma,
                                Tensor* dbeta) const {
  ImageTensor dx(x.channels, x.height, x.width, ValueRange::Free);
  const std::size_t plane = x.pixels();
  const int cpg = channels / groups;
  const std::size_t m = static_cast<std::size_t>(cpg) * plane;
  std::vector<double> xhat(m);
  for (int g = 0; g < groups; ++g) {
    const float* xs = &x.data[static_cast<std::size_t>(g) * cpg * plane];
    const float* dys = &dy.data[static_cast<std::size_t>(g) * cpg * plane];
    float* dxs = &dx.data[static_cast<std::size_t>(g) * cpg * plane];
    double sum = 0.0, sq = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      sum += xs[i];
      sq += static_cast<double>(xs[i]) * xs[i];
    }
    const double mean = sum / static_cast<double>(m);
    const double var = sq / static_cast<double>(m) - mean * mean;
    const double inv = 1.0 / std::sqrt(var + eps);

    double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
    for (int cc = 0; cc < cpg; ++cc) {
      const int c = g * cpg + cc;
      const float ga = gamma.v[static_cast<std::size_t>(c)];
      double dg = 0.0, dbv = 0.0;
      for (std::size_t i = 0; i < plane; ++i) {
        const std::size_t j = static_cast<std::size_t>(cc) * plane + i;
        xhat[j] = (xs[j] - mean) * inv;
        const double d = dys[j];
        dg += d * xhat[j];
        dbv += d;
        const double dxh = d * ga;
        sum_dxhat += dxh;
        sum_dxhat_xhat += dxh * xhat[j];
      }
      if (dgamma) dgamma->v[static_cast<std::size_t>(c)] += static_cast<float>(dg);
      if (dbeta) dbeta->v[static_cast<std::size_t>(c)] += static_cast<float>(dbv);
    }
    const double mean_dxhat = sum_dxhat / static_cast<double>(m);
    const double mean_dxhat_xhat = sum_dxhat_xhat / static_cast<double>(m);
    for (int cc = 0; cc < cpg; ++cc) {
      const int c = g * cpg + cc;
      const double ga = gamma.v[static_cast<std::size_t>(c)];
      for (std::size_t i = 0; i < plane; ++i) {
        const std::size_t j = static_cast<std::size_t>(cc) * plane + i;
        const double dxh = static_cast<double>(dys[j]) * ga;
        dxs[j] = static_cast<float>(inv * (dxh - mean_dxhat - xhat[j] * mean_dxhat_xhat));
      }
    }
  }
  return dx;
}

// ---------------------------------------------------------------------------
// Elementwise / structural
// ---------------------------------------------------------------------------

ImageTensor silu(const ImageTensor& x) {
  ImageTensor y = x;
  y.range = ValueRange::Free;
  for (auto& v : y.data) {
    const float s = 1.0f / (1.0f + std::exp(-v));
    v = v * s;
  }
  return y;
}

ImageTensor silu_backward(const ImageTensor& x, const ImageTensor& dy) {
  ImageTensor dx(x.channels, x.height, x.width, ValueRange::Free);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const float s = 1.0f / (1.0f + std::exp(-x.data[i]));
    dx.data[i] = dy.data[i] * s * (1.0f + x.data[i] * (1.0f - s));
  }
  return dx;
}

std::vector<float> silu_vec(const std::vector<float>& x) {
  std::vector<float> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const float s = 1.0f / (1.0f + std::exp(-x[i]));
    y[i] = x[i] * s;
  }
  return y;
}

std::vector<float> silu_vec_backward(const std::vector<float>& x, const std::vector<float>& dy) {
  std::vector<float> dx(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const float s = 1.0f / (1.0f + std::exp(-x[i]));
    dx[i] = dy[i] * s * (1.0f + x[i] * (1.0f - s));
  }
  return dx;
}

ImageTensor upsample_nearest2x(const ImageTensor& x) {
  ImageTensor y(x.channels, x.height * 2, x.width * 2, ValueRange::Free);
  for (int c = 0; c < x.channels; ++c) {
    for (int iy = 0; iy < y.height; ++iy) {
      for (int ix = 0; ix < y.width; ++ix) {
        y.at(c, iy, ix) = x.at(c, iy / 2, ix / 2);
      }
    }
  }
  return y;
}

ImageTensor upsample_nearest2x_backward(const ImageTensor& dy) {
  ImageTensor dx(dy.channels, dy.height / 2, dy.width / 2, ValueRange::Free);
  for (int c = 0; c < dy.channels; ++c) {
    for (int iy = 0; iy < dy.height; ++iy) {
      for (int ix = 0; ix < dy.width; ++ix) {
        dx.at(c, iy / 2, ix / 2) += dy.at(c, iy, ix);
      }
    }
  }
  return dx;
}

ImageTensor concat_channels(const ImageTensor& a, const ImageTensor& b) {
  if (a.height != b.height || a.width != b.width) {
    throw std::invalid_argument("concat_channels: spatial shape mismatch");
  }
  ImageTensor y(a.channels + b.channels, a.height, a.width, ValueRange::Free);
  std::copy(a.data.begin(), a.data.end(), y.data.begin());
  std::copy(b.data.begin(), b.data.end(), y.data.begin() + static_cast<std::ptrdiff_t>(a.size()));
  return y;
}

void split_channels(const ImageTensor& d, int ch_a, ImageTensor* da, ImageTensor* db) {
  *da = ImageTensor(ch_a, d.height, d.width, ValueRange::Free);
  *db = ImageTensor(d.channels - ch_a, d.height, d.width, ValueRange::Free);
  std::copy(d.data.begin(), d.data.begin() + static_cast<std::ptrdiff_t>(da->size()),
            da->data.begin());
  std::copy(d.data.begin() + static_cast<std::ptrdiff_t>(da->size()), d.data.end(),
            db->data.begin());
}

void add_channel_bias(ImageTensor& x, const std::vector<float>& vec) {
  if (static_cast<int>(vec.size()) != x.channels) {
    throw std::invalid_argument("add_channel_bias: size mismatch");
  }
  const std::size_t plane = x.pixels();
  for (int c = 0; c < x.channels; ++c) {
    float* p = &x.data[static_cast<std::size_t>(c) * plane];
    for (std::size_t i = 0; i < plane; ++i) p[i] += vec[static_cast<std::size_t>(c)];
  }
}

std::vector<float> channel_bias_backward(const ImageTensor& dy) {
  std::vector<float> g(static_cast<std::size_t>(dy.channels), 0.0f);
  const std::size_t plane = dy.pixels();
  for (int c = 0; c < dy.channels; ++c) {
    double s = 0.0;
    const float* p = &dy.data[static_cast<std::size_t>(c) * plane];
    for (std::size_t i = 0; i < plane; ++i) s += p[i];
    g[static_cast<std::size_t>(c)] = static_cast<float>(s);
  }
  return g;
}

std::vector<float> sinusoidal_embedding(int t, int dim) {
  if (dim < 2 || dim % 2 != 0) {
    throw std::invalid_argument("sinusoidal_embedding: dim must be even and >= 2");
  }
  const int half = dim / 2;
  std::vector<float> e(static_cast<std::size_t>(dim));
  for (int i = 0; i < half; ++i) {
    const double freq =
        std::exp(-std::log(10000.0) * (half > 1 ? static_cast<double>(i) / (half - 1) : 0.0));
    e[static_cast<std::size_t>(i)] = static_cast<float>(std::sin(t * freq));
    e[static_cast<std::size_t>(half + i)] = static_cast<float>(std::cos(t * freq));
  }
  return e;
}

// ---------------------------------------------------------------------------
// SelfAttention2d
// ---------------------------------------------------------------------------

namespace {
int attn_norm_groups(int ch) {
  for (int g = std::min(8, ch); g > 1; --g) {
    if (ch % g == 0) return g;
  }
  return 1;
}
}  // namespace

SelfAttention2d::SelfAttention2d(int ch)
    : channels(ch),
      norm(ch, attn_norm_groups(ch)),
      q(ch, ch, 1),
      k(ch, ch, 1),
      v(ch, ch, 1),
      proj(ch, ch, 1) {}

void SelfAttention2d::init(Rng& rng) {
  q.init_he(rng);
  k.init_he(rng);
  v.init_he(rng);
  proj.init_he(rng);
  // zero-init the output projection so the block starts as identity
  for (auto& x : proj.w.v) x = 0.0f;
}

void SelfAttention2d::Grads::init(const SelfAttention2d& a) {
  norm_gamma = Tensor::zeros_like(a.norm.gamma);
  norm_beta = Tensor::zeros_like(a.norm.beta);
  q_w = Tensor::zeros_like(a.q.w);
  q_b = Tensor::zeros_like(a.q.b);
  k_w = Tensor::zeros_like(a.k.w);
  k_b = Tensor::zeros_like(a.k.b);
  v_w = Tensor::zeros_like(a.v.w);
  v_b = Tensor::zeros_like(a.v.b);
  proj_w = Tensor::zeros_like(a.proj.w);
  proj_b = Tensor::zeros_like(a.proj.b);
}

ImageTensor SelfAttention2d::forward(const ImageTensor& x, Ctx* ctx) const {
  const int hw = x.height * x.width;
  ImageTensor xn = norm.forward(x);
  ImageTensor qm = q.forward(xn);
  ImageTensor km = k.forward(xn);
  ImageTensor vm = v.forward(xn);

  const float scale = 1.0f / std::sqrt(static_cast<float>(channels));
  MapRMConst qmat(qm.data.data(), channels, hw);
  MapRMConst kmat(km.data.data(), channels, hw);
  MapRMConst vmat(vm.data.data(), channels, hw);

  RowMat scores(hw, hw);
  scores.noalias() = qmat.transpose() * kmat;
  scores *= scale;
  // row-wise softmax
  for (int i = 0; i < hw; ++i) {
    float mx = scores.row(i).maxCoeff();
    scores.row(i) = (scores.row(i).array() - mx).exp();
    scores.row(i) /= scores.row(i).sum();
  }

  ImageTensor attn_out(channels, x.height, x.width, ValueRange::Free);
  MapRM ao(attn_out.data.data(), channels, hw);
  ao.noalias() = vmat * scores.transpose();

  ImageTensor y = proj.forward(attn_out);
  for (std::size_t i = 0; i < y.size(); ++i) y.data[i] += x.data[i];

  if (ctx) {
    ctx->x = x;
    ctx->xn = std::move(xn);
    ctx->qm = std::move(qm);
    ctx->km = std::move(km);
    ctx->vm = std::move(vm);
    ctx->attn.assign(scores.data(), scores.data() + static_cast<std::size_t>(hw) * hw);
    ctx->attn_out = std::move(attn_out);
  }
  return y;
}

ImageTensor SelfAttention2d::backward(const ImageTensor& dy, const Ctx& ctx, Grads* g) const {
  const int hw = ctx.x.height * ctx.x.width;
  const float scale = 1.0f / std::sqrt(static_cast<float>(channels));

  ImageTensor d_ao = proj.backward(ctx.attn_out, dy, g ? &g->proj_w : nullptr,
                                   g ? &g->proj_b : nullptr, true);

  MapRMConst attn(ctx.attn.data(), hw, hw);
  MapRMConst daom(d_ao.data.data(), channels, hw);
  MapRMConst vmat(ctx.vm.data.data(), channels, hw);
  MapRMConst qmat(ctx.qm.data.data(), channels, hw);
  MapRMConst kmat(ctx.km.data.data(), channels, hw);

  ImageTensor dv(channels, ctx.x.height, ctx.x.width, ValueRange::Free);
  MapRM dvm(dv.data.data(), channels, hw);
  dvm.noalias() = daom * attn;

  RowMat dattn(hw, hw);
  dattn.noalias() = daom.transpose() * vmat;  // (i,j) = sum_c d_ao(c,i) v(c,j)

  RowMat dscores(hw, hw);
  for (int i = 0; i < hw; ++i) {
    const float dot = dattn.row(i).cwiseProduct(attn.row(i)).sum();
    dscores.row(i) = attn.row(i).cwiseProduct((dattn.row(i).array() - dot).matrix());
  }
  dscores *= scale;

  ImageTensor dq(channels, ctx.x.height, ctx.x.width, ValueRange::Free);
  ImageTensor dk(channels, ctx.x.height, ctx.x.width, ValueRange::Free);
  MapRM dqm(dq.data.data(), channels, hw);
  MapRM dkm(dk.data.data(), channels, hw);
  dqm.noalias() = kmat * dscores.transpose();
  dkm.noalias() = qmat * dscores;

  ImageTensor dxn = q.backward(ctx.xn, dq, g ? &g->q_w : nullptr, g ? &g->q_b : nullptr, true);
  ImageTensor t1 = k.backward(ctx.xn, dk, g ? &g->k_w : nullptr, g ? &g->k_b : nullptr, true);
  ImageTensor t2 = v.backward(ctx.xn, dv, g ? &g->v_w : nullptr, g ? &g->v_b : nullptr, true);
  for (std::size_t i = 0; i < dxn.size(); ++i) dxn.data[i] += t1.data[i] + t2.data[i];

  ImageTensor dx = norm.backward(ctx.x, dxn, g ? &g->norm_gamma : nullptr,
                                 g ? &g->norm_beta : nullptr);
  for (std::size_t i = 0; i < dx.size(); ++i) dx.data[i] += dy.data[i];  // residual branch
  return dx;
}

}  // namespace mdps::nn
