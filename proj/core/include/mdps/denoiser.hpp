// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "mdps/nn/layers.hpp"
#include "mdps/rng.hpp"
#include "mdps/tensor.hpp"

namespace mdps {

struct ParamRef {
  std::string name;
  nn::Tensor* value;
};

/// Gradient storage aligned one-to-one with a net's parameters() order.
struct GradBuffer {
  std::vector<nn::Tensor> grads;

  void init(const std::vector<ParamRef>& params);
  void zero();
  void add(const GradBuffer& other);
  void scale(float s);
};

/// Per-call activation record. One backward per forward.
class DenoiserCtx {
 public:
  virtual ~DenoiserCtx() = default;
  ImageTensor eps;  // predicted noise from the forward pass
};

/// Noise predictor eps(x_t, t). Evaluation is deterministic given fixed
/// parameters and safe for concurrent read-only use.
class Denoiser {
 public:
  virtual ~Denoiser() = default;

  virtual ImageTensor evaluate(const ImageTensor& x_t, int t) const = 0;

  virtual bool supports_input_gradient() const = 0;

  /// J^T upstream, where J is the Jacobian of eps with respect to x_t.
  /// Throws std::runtime_error if the backend has no gradient support.
  virtual ImageTensor input_vjp(const ImageTensor& x_t, int t,
                                const ImageTensor& upstream) const = 0;

  /// Prediction plus a reusable VJP closure that shares the forward pass.
  struct EvalVjp {
    ImageTensor eps;
    std::function<ImageTensor(const ImageTensor& upstream)> vjp;
  };
  virtual EvalVjp evaluate_with_vjp(const ImageTensor& x_t, int t) const;

  virtual std::string architecture() const = 0;
};

/// Backend with full backpropagation: parameter gradients for training and
/// input gradients for guidance.
class TrainableDenoiser : public Denoiser {
 public:
  /// Stable-ordered parameter listing (also the checkpoint tensor order).
  virtual std::vector<ParamRef> parameters() = 0;

  virtual std::unique_ptr<DenoiserCtx> forward_ctx(const ImageTensor& x_t, int t) const = 0;

  /// Backpropagates dL/d-eps. Parameter gradients accumulate into `gb` when
  /// non-null; returns dL/d-x_t when need_dx.
  virtual ImageTensor backward_ctx(const DenoiserCtx& ctx, const ImageTensor& d_eps,
                                   GradBuffer* gb, bool need_dx) const = 0;

  ImageTensor evaluate(const ImageTensor& x_t, int t) const override;
  bool supports_input_gradient() const override { return true; }
  ImageTensor input_vjp(const ImageTensor& x_t, int t,
                        const ImageTensor& upstream) const override;
  EvalVjp evaluate_with_vjp(const ImageTensor& x_t, int t) const override;
};

/// Architecture descriptor, round-tripped through checkpoints.
struct ArchDescriptor {
  std::string backend = "compact";  // "compact" | "unet"
  int in_channels = 3;
  int base_channels = 32;
  int time_embed_dim = 64;
  bool attention = false;  // unet bottleneck self-attention

  bool operator==(const ArchDescriptor&) const = default;
};

std::unique_ptr<TrainableDenoiser> make_denoiser(const ArchDescriptor& arch, Rng& init_rng);

}  // namespace mdps
