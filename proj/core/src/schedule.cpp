// SPDX-License-Identifier: Apache-2.0
#include "mdps/schedule.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace mdps {

double NoiseSchedule::beta(int t) const {
  if (t < 1 || t > t_max) {
    throw std::out_of_range("NoiseSchedule::beta: t=" + std::to_string(t) +
                            " outside [1," + std::to_string(t_max) + "]");
  }
  return betas[static_cast<std::size_t>(t) - 1];
}

double NoiseSchedule::alpha_bar(int t) const {
  if (t < 0 || t > t_max) {
    throw std::out_of_range("NoiseSchedule::alpha_bar: t=" + std::to_string(t) +
                            " outside [0," + std::to_string(t_max) + "]");
  }
  return alpha_bars[static_cast<std::size_t>(t)];
}

void NoiseSchedule::validate() const {
  if (t_max < 1 || betas.size() != static_cast<std::size_t>(t_max) ||
      alpha_bars.size() != static_cast<std::size_t>(t_max) + 1) {
    throw std::invalid_argument("NoiseSchedule: inconsistent sizes");
  }
  if (alpha_bars[0] != 1.0) {
    throw std::invalid_argument("NoiseSchedule: alpha_bar(0) must be 1");
  }
  for (int t = 1; t <= t_max; ++t) {
    double b = betas[static_cast<std::size_t>(t) - 1];
    if (!(b > 0.0 && b < 1.0)) {
      throw std::invalid_argument("NoiseSchedule: beta(" + std::to_string(t) +
                                  ") outside (0,1)");
    }
    double a = alpha_bars[static_cast<std::size_t>(t)];
    double prev = alpha_bars[static_cast<std::size_t>(t) - 1];
    if (!(a > 0.0 && a <= 1.0 && a < prev)) {
      throw std::invalid_argument("NoiseSchedule: alpha_bar not strictly decreasing at t=" +
                                  std::to_string(t));
    }
    double expect = prev * (1.0 - b);
    if (std::abs(a - expect) > 1e-12 * std::max(std::abs(expect), 1e-300)) {
      throw std::invalid_argument("NoiseSchedule: product recurrence violated at t=" +
                                  std::to_string(t));
    }
  }
}

NoiseSchedule build_schedule(int t_max, double beta_start, double beta_end) {
  if (t_max < 1) {
    throw std::invalid_argument("build_schedule: t_max must be >= 1");
  }
  if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0)) {
    throw std::invalid_argument("build_schedule: need 0 < beta_start <= beta_end < 1");
  }
  NoiseSchedule s;
  s.t_max = t_max;
  s.betas.resize(t_max);
  s.alpha_bars.resize(static_cast<std::size_t>(t_max) + 1);
  s.alpha_bars[0] = 1.0;
  for (int t = 1; t <= t_max; ++t) {
    double frac = (t_max == 1) ? 0.0 : static_cast<double>(t - 1) / (t_max - 1);
    double b = beta_start + (beta_end - beta_start) * frac;
    s.betas[static_cast<std::size_t>(t) - 1] = b;
    s.alpha_bars[static_cast<std::size_t>(t)] =
        s.alpha_bars[static_cast<std::size_t>(t) - 1] * (1.0 - b);
  }
  return s;
}

double sigma_t(const NoiseSchedule& schedule, int s, int t) {
  if (s < 0 || t > schedule.t_max || s >= t) {
    throw std::invalid_argument("sigma_t: need 0 <= s < t <= t_max, got s=" +
                                std::to_string(s) + " t=" + std::to_string(t));
  }
  const double a_s = schedule.alpha_bar(s);
  const double a_t = schedule.alpha_bar(t);
  if (a_s == 1.0 || a_s == a_t) return 0.0;
  return std::sqrt((1.0 - a_s) / (1.0 - a_t)) * std::sqrt(1.0 - a_t / a_s);
}

ImageTensor combine_forward(const ImageTensor& x0, const ImageTensor& eps, double alpha_bar) {
  if (!x0.same_shape(eps)) {
    throw std::invalid_argument("combine_forward: shape mismatch");
  }
  const float sa = static_cast<float>(std::sqrt(alpha_bar));
  const float sb = static_cast<float>(std::sqrt(1.0 - alpha_bar));
  ImageTensor xt(x0.channels, x0.height, x0.width, ValueRange::Free);
  for (std::size_t i = 0; i < x0.size(); ++i) {
    xt.data[i] = sa * x0.data[i] + sb * eps.data[i];
  }
  return xt;
}

std::pair<ImageTensor, ImageTensor> forward_noise(const ImageTensor& x0, int t,
                                                  const NoiseSchedule& schedule, Rng& rng) {
  if (t < 0 || t > schedule.t_max) {
    throw std::invalid_argument("forward_noise: t outside [0, t_max]");
  }
  if (!x0.all_finite()) {
    throw std::invalid_argument("forward_noise: x0 has non-finite entries");
  }
  ImageTensor eps(x0.channels, x0.height, x0.width, ValueRange::Free);
  rng.fill_normal(eps.data.data(), eps.size());
  ImageTensor xt = combine_forward(x0, eps, schedule.alpha_bar(t));
  if (t == 0) xt.range = x0.range;  // alpha_bar(0)=1: x_t is exactly x0
  return {std::move(xt), std::move(eps)};
}

}  // namespace mdps
