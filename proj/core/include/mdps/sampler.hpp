// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "mdps/ddim.hpp"
#include "mdps/denoiser.hpp"
#include "mdps/schedule.hpp"

namespace mdps {

/// Masked noisy observation of a normal image: y equals x0 on trusted pixels
/// (m = 0) and x0 plus Gaussian noise on suspected pixels (m = 1). The noise
/// scale sigma is conceptual only — it is absorbed into the guidance scale
/// and never enters the computation.
struct ObservationModel {
  ImageTensor y;
  MaskImage m;
  float sigma = 0.0f;

  void validate() const;
};

struct SamplerConfig {
  int noise_level = 200;  // T: forward-noising index for the start state
  int steps = 10;         // N: reverse steps, T divisible by N
  double rho = 100.0;     // guidance scale
  int n_samples = 16;     // N_s: posterior samples per image

  /// Clamp the final sample to model range (intermediates stay free). The
  /// Gaussian verification harness turns this off to keep moments exact.
  bool clamp_output = true;

  /// Restrict the guidance loss ||y - x0_hat||^2 to the masked region. Off by
  /// default: the gradient term is computed over all pixels and only applied
  /// on the mask through the blend.
  bool restrict_loss_to_mask = false;

  void validate(const NoiseSchedule& schedule) const;
};

/// Per-step observer for debugging dumps.
class SamplerTrace {
 public:
  virtual ~SamplerTrace() = default;
  virtual void on_step(int n, int t, int s, const ImageTensor& x0_hat, double guidance_grad_norm) = 0;
};

/// Posterior noise estimate (one step of the masked posterior denoiser):
///   eps_phi = (1-m) . (x_t - sqrt(a_t) y)/sqrt(1-a_t)
///           +   m  . (eps_theta + rho sqrt(1-a_t) grad ||y - x0_hat_prior||^2)
/// The gradient runs through the denoiser. Throws std::runtime_error when
/// rho > 0 on a nonempty mask and the backend has no input-gradient support.
ImageTensor posterior_denoiser(const ImageTensor& x_t, int t, const ObservationModel& obs,
                               const Denoiser& model, const NoiseSchedule& schedule, double rho,
                               bool restrict_loss_to_mask = false,
                               double* guidance_grad_norm = nullptr);

/// Masked diffusion posterior sampling: start from the forward-noised test
/// image x_T = sqrt(a_T) y + sqrt(1-a_T) eps and run `steps` reverse steps
/// with the posterior denoiser. Pure given (inputs, rng seed).
ImageTensor mdps_sample(const ObservationModel& obs, const Denoiser& model,
                        const NoiseSchedule& schedule, const SamplerConfig& cfg, Rng& rng,
                        SamplerTrace* trace = nullptr);

/// cfg.n_samples independent draws; sample j uses the child stream
/// rng.split(j), so results are order-stable and schedule-independent.
std::vector<ImageTensor> mdps_sample_many(const ObservationModel& obs, const Denoiser& model,
                                          const NoiseSchedule& schedule, const SamplerConfig& cfg,
                                          const Rng& rng);

}  // namespace mdps
