// SPDX-License-Identifier: Apache-2.0
#include "mdps/sampler.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "mdps/parallel.hpp"

namespace mdps {

void ObservationModel::validate() const {
  y.validate();
  m.validate();
  if (!m.matches(y)) {
    throw std::invalid_argument("ObservationModel: mask shape does not match image");
  }
}

void SamplerConfig::validate(const NoiseSchedule& schedule) const {
  if (steps < 1) throw std::invalid_argument("SamplerConfig: N must be >= 1");
  if (noise_level < 1 || noise_level > schedule.t_max) {
    throw std::invalid_argument("SamplerConfig: T must lie in [1, t_max]");
  }
  if (noise_level % steps != 0) {
    throw std::invalid_argument("SamplerConfig: T must be divisible by N (t = Tn/N integral)");
  }
  if (!(rho >= 0.0)) throw std::invalid_argument("SamplerConfig: rho must be >= 0");
  if (n_samples < 1) throw std::invalid_argument("SamplerConfig: N_s must be >= 1");
}

ImageTensor posterior_denoiser(const ImageTensor& x_t, int t, const ObservationModel& obs,
                               const Denoiser& model, const NoiseSchedule& schedule, double rho,
                               bool restrict_loss_to_mask, double* guidance_grad_norm) {
  if (t < 1 || t > schedule.t_max) {
    throw std::invalid_argument("posterior_denoiser: t outside [1, t_max]");
  }
  if (!x_t.same_shape(obs.y) || !obs.m.matches(x_t)) {
    throw std::invalid_argument("posterior_denoiser: shape mismatch");
  }
  const double a_t = schedule.alpha_bar(t);
  const float sa = static_cast<float>(std::sqrt(a_t));
  const float sn = static_cast<float>(std::sqrt(1.0 - a_t));
  if (guidance_grad_norm) *guidance_grad_norm = 0.0;

  const std::size_t ones = obs.m.count_ones();
  const std::size_t plane = x_t.pixels();

  // Normal branch: the exactly-known noise (x_t - sqrt(a_t) y)/sqrt(1-a_t).
  ImageTensor eps_phi(x_t.channels, x_t.height, x_t.width, ValueRange::Free);
  if (ones < plane) {
    const float inv_sn = 1.0f / sn;
    for (std::size_t i = 0; i < x_t.size(); ++i) {
      eps_phi.data[i] = (x_t.data[i] - sa * obs.y.data[i]) * inv_sn;
    }
  }
  if (ones == 0) return eps_phi;

  // Anomaly branch: prior prediction plus the guidance gradient.
  ImageTensor eps_m;
  if (rho == 0.0) {
    eps_m = model.evaluate(x_t, t);
  } else {
    if (!model.supports_input_gradient()) {
      throw std::runtime_error("posterior_denoiser: rho > 0 requires a denoiser backend with "
                               "input-gradient support (" + model.architecture() + " has none)");
    }
    auto ev = model.evaluate_with_vjp(x_t, t);

    // residual r = y - x0_hat_prior
    ImageTensor r(x_t.channels, x_t.height, x_t.width, ValueRange::Free);
    const float inv_sa = 1.0f / sa;
    for (std::size_t i = 0; i < x_t.size(); ++i) {
      const float x0 = (x_t.data[i] - sn * ev.eps.data[i]) * inv_sa;
      r.data[i] = obs.y.data[i] - x0;
    }
    if (restrict_loss_to_mask) {
      for (int c = 0; c < r.channels; ++c) {
        float* p = &r.data[static_cast<std::size_t>(c) * plane];
        for (std::size_t i = 0; i < plane; ++i) {
          if (!obs.m.data[i]) p[i] = 0.0f;
        }
      }
    }

    // d||y - x0_hat||^2 / dx_t = (-2/sqrt(a)) r + (2 sqrt(1-a)/sqrt(a)) J^T r
    ImageTensor upstream(x_t.channels, x_t.height, x_t.width, ValueRange::Free);
    const float cu = 2.0f * sn * inv_sa;
    for (std::size_t i = 0; i < r.size(); ++i) upstream.data[i] = cu * r.data[i];
    ImageTensor jtr = ev.vjp(upstream);

    const float cd = -2.0f * inv_sa;
    const float cg = static_cast<float>(rho) * sn;
    eps_m = std::move(ev.eps);
    double norm_sq = 0.0;
    for (std::size_t i = 0; i < eps_m.size(); ++i) {
      const float g = cd * r.data[i] + jtr.data[i];
      norm_sq += static_cast<double>(g) * g;
      eps_m.data[i] += cg * g;
    }
    if (guidance_grad_norm) *guidance_grad_norm = std::sqrt(norm_sq);
  }

  if (ones == plane) return eps_m;

  // Hadamard blend of the two branches (binary mask: exact selection).
  for (int c = 0; c < x_t.channels; ++c) {
    float* dst = &eps_phi.data[static_cast<std::size_t>(c) * plane];
    const float* src = &eps_m.data[static_cast<std::size_t>(c) * plane];
    for (std::size_t i = 0; i < plane; ++i) {
      if (obs.m.data[i]) dst[i] = src[i];
    }
  }
  return eps_phi;
}

ImageTensor mdps_sample(const ObservationModel& obs, const Denoiser& model,
                        const NoiseSchedule& schedule, const SamplerConfig& cfg, Rng& rng,
                        SamplerTrace* trace) {
  obs.validate();
  cfg.validate(schedule);

  ImageTensor eps(obs.y.channels, obs.y.height, obs.y.width, ValueRange::Free);
  rng.fill_normal(eps.data.data(), eps.size());
  ImageTensor x = combine_forward(obs.y, eps, schedule.alpha_bar(cfg.noise_level));

  for (int n = cfg.steps; n >= 1; --n) {
    const int t = cfg.noise_level * n / cfg.steps;
    const int s = cfg.noise_level * (n - 1) / cfg.steps;
    double grad_norm = 0.0;
    ImageTensor eps_phi = posterior_denoiser(x, t, obs, model, schedule, cfg.rho,
                                             cfg.restrict_loss_to_mask,
                                             trace ? &grad_norm : nullptr);
    if (!eps_phi.all_finite()) {
      throw std::runtime_error("mdps_sample: non-finite posterior noise estimate at step n=" +
                               std::to_string(n) + " (t=" + std::to_string(t) + ")");
    }
    if (trace) {
      trace->on_step(n, t, s, estimate_x0_from_eps(x, eps_phi, schedule.alpha_bar(t)), grad_norm);
    }
    x = ddim_step(x, t, s, eps_phi, schedule, rng);
    if (!x.all_finite()) {
      throw std::runtime_error("mdps_sample: non-finite state after step n=" + std::to_string(n));
    }
  }
  return cfg.clamp_output ? clamp_to_range(x, ValueRange::Model) : x;
}

std::vector<ImageTensor> mdps_sample_many(const ObservationModel& obs, const Denoiser& model,
                                          const NoiseSchedule& schedule, const SamplerConfig& cfg,
                                          const Rng& rng) {
  obs.validate();
  cfg.validate(schedule);
  std::vector<ImageTensor> out(static_cast<std::size_t>(cfg.n_samples));
  parallel_for(out.size(), [&](std::size_t j) {
    Rng child = rng.split(j);
    out[j] = mdps_sample(obs, model, schedule, cfg, child);
  });
  return out;
}

}  // namespace mdps
