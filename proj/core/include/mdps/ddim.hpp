// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "mdps/denoiser.hpp"
#include "mdps/schedule.hpp"

namespace mdps {

/// One-shot clean-image estimate from x_t through the prior denoiser:
///   x0_hat = (x_t - sqrt(1-a_t) eps(x_t,t)) / sqrt(a_t)
ImageTensor estimate_x0_prior(const ImageTensor& x_t, int t, const Denoiser& model,
                              const NoiseSchedule& schedule);

/// Same estimate with a precomputed noise prediction.
ImageTensor estimate_x0_from_eps(const ImageTensor& x_t, const ImageTensor& eps_hat,
                                 double alpha_bar_t);

/// Accelerated reverse step t -> s (s < t), x0_hat-then-recombine form:
///   x0_hat = (x_t - sqrt(1-a_t) eps_hat)/sqrt(a_t)
///   x_s    = sqrt(a_s) x0_hat + sqrt(1-a_s-sigma^2) eps_hat + sigma eps_t
/// Always draws eps_t so random streams stay aligned across variants.
/// Throws on a negative sqrt(1-a_s-sigma^2) radicand (invalid schedule pair).
ImageTensor ddim_step(const ImageTensor& x_t, int t, int s, const ImageTensor& eps_hat,
                      const NoiseSchedule& schedule, Rng& rng);

/// Plain DDIM chain started from the forward-noised image:
///   x_T = sqrt(a_T) y + sqrt(1-a_T) eps,  then N reverse steps t = T n / N.
/// Output is clamped to the model range. T must be divisible by N.
ImageTensor ddim_sample(const ImageTensor& y, const Denoiser& model,
                        const NoiseSchedule& schedule, int noise_level, int steps, Rng& rng);

}  // namespace mdps
