// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "mdps/rng.hpp"
#include "mdps/tensor.hpp"

// Minimal layer set with hand-written backward passes. Each layer owns its
// parameters only; activations needed for backward live in caller-owned
// context objects, so forward paths are reentrant and safe to share
// read-only across threads. Gradient sinks are nullable: passing nullptr
// skips the parameter-gradient work (used by the input-gradient path of the
// guidance term, which only needs dX).

namespace mdps::nn {

struct Tensor {
  std::vector<int> shape;
  std::vector<float> v;

  Tensor() = default;
  explicit Tensor(std::vector<int> s, float fill = 0.0f);

  std::size_t size() const { return v.size(); }
  static Tensor zeros_like(const Tensor& t) { return Tensor(t.shape); }
};

// ---------------------------------------------------------------------------
// Convolution
// ---------------------------------------------------------------------------

struct Conv2d {
  int in_ch = 0, out_ch = 0, ksize = 3, stride = 1, pad = 1;
  Tensor w;  // [out_ch, in_ch, k, k]
  Tensor b;  // [out_ch]

  Conv2d() = default;
  Conv2d(int in_channels, int out_channels, int kernel, int stride_ = 1);

  void init_he(Rng& rng);

  int out_h(int h) const { return (h + 2 * pad - ksize) / stride + 1; }
  int out_w(int w) const { return (w + 2 * pad - ksize) / stride + 1; }

  ImageTensor forward(const ImageTensor& x) const;

  /// dy -> dx (if need_dx), accumulating dW/db into the sinks when non-null.
  ImageTensor backward(const ImageTensor& x, const ImageTensor& dy, Tensor* dw, Tensor* db,
                       bool need_dx) const;
};

// ---------------------------------------------------------------------------
// Fully connected (used by the timestep-embedding MLP and its projections)
// ---------------------------------------------------------------------------

struct Linear {
  int in_dim = 0, out_dim = 0;
  Tensor w;  // [out_dim, in_dim]
  Tensor b;  // [out_dim]

  Linear() = default;
  Linear(int in_d, int out_d);

  void init_he(Rng& rng);

  std::vector<float> forward(const std::vector<float>& x) const;
  std::vector<float> backward(const std::vector<float>& x, const std::vector<float>& dy,
                              Tensor* dw, Tensor* db, bool need_dx) const;
};

// ---------------------------------------------------------------------------
// GroupNorm (inference == training behavior; no running stats)
// ---------------------------------------------------------------------------

struct GroupNorm {
  int channels = 0, groups = 1;
  double eps = 1e-5;
  Tensor gamma;  // [channels]
  Tensor beta;   // [channels]

  GroupNorm() = default;
  GroupNorm(int ch, int groups_);

  ImageTensor forward(const ImageTensor& x) const;
  ImageTensor backward(const ImageTensor& x, const ImageTensor& dy, Tensor* dgamma,
                       Tensor* dbeta) const;
};

// ---------------------------------------------------------------------------
// Elementwise and structural ops
// ---------------------------------------------------------------------------

ImageTensor silu(const ImageTensor& x);
/// dL/dx given the pre-activation x.
ImageTensor silu_backward(const ImageTensor& x, const ImageTensor& dy);

std::vector<float> silu_vec(const std::vector<float>& x);
std::vector<float> silu_vec_backward(const std::vector<float>& x, const std::vector<float>& dy);

ImageTensor upsample_nearest2x(const ImageTensor& x);
ImageTensor upsample_nearest2x_backward(const ImageTensor& dy);

ImageTensor concat_channels(const ImageTensor& a, const ImageTensor& b);
void split_channels(const ImageTensor& d, int ch_a, ImageTensor* da, ImageTensor* db);

/// Adds vec[c] to every pixel of channel c.
void add_channel_bias(ImageTensor& x, const std::vector<float>& vec);
/// Per-channel spatial sum of dy (gradient of add_channel_bias wrt vec).
std::vector<float> channel_bias_backward(const ImageTensor& dy);

/// Sinusoidal embedding of an integer timestep; dim must be even.
std::vector<float> sinusoidal_embedding(int t, int dim);

// ---------------------------------------------------------------------------
// Single-head self-attention over spatial positions (bottleneck blocks)
// ---------------------------------------------------------------------------

struct SelfAttention2d {
  int channels = 0;
  GroupNorm norm;
  Conv2d q, k, v, proj;  // all 1x1

  SelfAttention2d() = default;
  explicit SelfAttention2d(int ch);

  void init(Rng& rng);

  struct Ctx;  // holds activations for backward
  ImageTensor forward(const ImageTensor& x, Ctx* ctx) const;

  struct Grads {
    Tensor norm_gamma, norm_beta, q_w, q_b, k_w, k_b, v_w, v_b, proj_w, proj_b;
    void init(const SelfAttention2d& a);
  };
  ImageTensor backward(const ImageTensor& dy, const Ctx& ctx, Grads* g) const;
};

struct SelfAttention2d::Ctx {
  ImageTensor x, xn, qm, km, vm, attn_out;
  std::vector<float> attn;  // [HW, HW] softmax rows
};

}  // namespace mdps::nn
