// SPDX-License-Identifier: Apache-2.0
#include "mdps/ddim.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace mdps {

ImageTensor estimate_x0_from_eps(const ImageTensor& x_t, const ImageTensor& eps_hat,
                                 double alpha_bar_t) {
  if (!x_t.same_shape(eps_hat)) {
    throw std::invalid_argument("estimate_x0_from_eps: shape mismatch");
  }
  const float sn = static_cast<float>(std::sqrt(1.0 - alpha_bar_t));
  const float inv_sa = static_cast<float>(1.0 / std::sqrt(alpha_bar_t));
  ImageTensor x0(x_t.channels, x_t.height, x_t.width, ValueRange::Free);
  for (std::size_t i = 0; i < x_t.size(); ++i) {
    x0.data[i] = (x_t.data[i] - sn * eps_hat.data[i]) * inv_sa;
  }
  return x0;
}

ImageTensor estimate_x0_prior(const ImageTensor& x_t, int t, const Denoiser& model,
                              const NoiseSchedule& schedule) {
  if (t < 1 || t > schedule.t_max) {
    throw std::invalid_argument("estimate_x0_prior: t outside [1, t_max]");
  }
  return estimate_x0_from_eps(x_t, model.evaluate(x_t, t), schedule.alpha_bar(t));
}

ImageTensor ddim_step(const ImageTensor& x_t, int t, int s, const ImageTensor& eps_hat,
                      const NoiseSchedule& schedule, Rng& rng) {
  if (!(0 <= s && s < t && t <= schedule.t_max)) {
    throw std::invalid_argument("ddim_step: need 0 <= s < t <= t_max, got s=" +
                                std::to_string(s) + " t=" + std::to_string(t));
  }
  if (!x_t.same_shape(eps_hat)) {
    throw std::invalid_argument("ddim_step: eps_hat shape mismatch");
  }
  const double a_t = schedule.alpha_bar(t);
  const double a_s = schedule.alpha_bar(s);
  const double sigma = sigma_t(schedule, s, t);
  double radicand = 1.0 - a_s - sigma * sigma;
  if (radicand < 0.0) {
    if (radicand < -1e-9) {
      throw std::invalid_argument("ddim_step: negative radicand for (s=" + std::to_string(s) +
                                  ", t=" + std::to_string(t) + ") — invalid schedule pair");
    }
    radicand = 0.0;
  }

  ImageTensor x0_hat = estimate_x0_from_eps(x_t, eps_hat, a_t);

  // eps_t is drawn even when sigma = 0 so streams stay aligned
  ImageTensor eps_t(x_t.channels, x_t.height, x_t.width, ValueRange::Free);
  rng.fill_normal(eps_t.data.data(), eps_t.size());

  const float c0 = static_cast<float>(std::sqrt(a_s));
  const float c1 = static_cast<float>(std::sqrt(radicand));
  const float c2 = static_cast<float>(sigma);
  ImageTensor x_s(x_t.channels, x_t.height, x_t.width, ValueRange::Free);
  for (std::size_t i = 0; i < x_s.size(); ++i) {
    x_s.data[i] = c0 * x0_hat.data[i] + c1 * eps_hat.data[i] + c2 * eps_t.data[i];
  }
  return x_s;
}

ImageTensor ddim_sample(const ImageTensor& y, const Denoiser& model,
                        const NoiseSchedule& schedule, int noise_level, int steps, Rng& rng) {
  if (steps < 1 || noise_level < 1 || noise_level > schedule.t_max ||
      noise_level % steps != 0) {
    throw std::invalid_argument("ddim_sample: need 1 <= T <= t_max with T divisible by N");
  }
  ImageTensor eps(y.channels, y.height, y.width, ValueRange::Free);
  rng.fill_normal(eps.data.data(), eps.size());
  ImageTensor x = combine_forward(y, eps, schedule.alpha_bar(noise_level));
  for (int n = steps; n >= 1; --n) {
    const int t = noise_level * n / steps;
    const int s = noise_level * (n - 1) / steps;
    ImageTensor eps_hat = model.evaluate(x, t);
    x = ddim_step(x, t, s, eps_hat, schedule, rng);
  }
  return clamp_to_range(x, ValueRange::Model);
}

}  // namespace mdps
