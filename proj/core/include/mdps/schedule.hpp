// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <utility>
#include <vector>

#include "mdps/rng.hpp"
#include "mdps/tensor.hpp"

namespace mdps {

/// Discrete diffusion noise schedule: the beta sequence and the cumulative
/// signal-retention products alpha_bar_t = prod_{s<=t}(1 - beta_s), with the
/// convention alpha_bar_0 = 1 so the final reverse step is exact.
struct NoiseSchedule {
  std::vector<double> betas;       // betas[t-1] = beta(t), t = 1..t_max
  std::vector<double> alpha_bars;  // alpha_bars[t], t = 0..t_max
  int t_max = 0;

  double beta(int t) const;       // t in [1, t_max]
  double alpha_bar(int t) const;  // t in [0, t_max]

  /// Checks 0 < beta < 1, strict monotone decrease of alpha_bar, and the
  /// product recurrence to 1e-12 relative. Throws std::invalid_argument.
  void validate() const;
};

/// Linear beta interpolation from beta_start to beta_end over t_max steps.
NoiseSchedule build_schedule(int t_max, double beta_start, double beta_end);

/// Reverse-step noise scale for a t -> s jump (s < t):
///   sigma = sqrt((1-a_s)/(1-a_t)) * sqrt(1 - a_t/a_s)
/// Returns 0 when a_s = 1 or a_s = a_t.
double sigma_t(const NoiseSchedule& schedule, int s, int t);

/// Forward noising x_t = sqrt(a_t) x0 + sqrt(1-a_t) eps with eps ~ N(0,I).
/// Returns (x_t, eps). t = 0 returns x0 itself and zero noise contribution.
std::pair<ImageTensor, ImageTensor> forward_noise(const ImageTensor& x0, int t,
                                                  const NoiseSchedule& schedule, Rng& rng);

/// Same combination with a caller-supplied eps (shared by tests and training).
ImageTensor combine_forward(const ImageTensor& x0, const ImageTensor& eps, double alpha_bar);

}  // namespace mdps
