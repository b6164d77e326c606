// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <memory>
#include <utility>

#include "mdps/denoiser.hpp"
#include "mdps/sampler.hpp"
#include "mdps/schedule.hpp"

namespace mdps {

/// Isotropic Gaussian prior over pixels: x0 ~ N(mu0, var0 I). With this prior
/// the optimal denoiser and the true posterior are closed-form, which gives a
/// ground-truth check of the sampling machinery independent of any trained
/// network.
struct GaussianPrior {
  double mu0 = 0.0;
  double var0 = 1.0;

  void validate() const;
};

/// Optimal noise predictor for the Gaussian prior: the forward marginal is
/// N(sqrt(a_t) mu0, a_t var0 + 1 - a_t), so
///   eps*(x_t, t) = sqrt(1-a_t) (x_t - sqrt(a_t) mu0) / (a_t var0 + 1 - a_t)
/// with an analytic input gradient (diagonal Jacobian).
std::unique_ptr<Denoiser> analytic_denoiser(const GaussianPrior& prior,
                                            const NoiseSchedule& schedule);

/// Conjugate-Gaussian posterior for the observation y ~ N(x0, sigma2):
///   mean = (sigma2 mu0 + var0 y) / (var0 + sigma2)
///   var  = var0 sigma2 / (var0 + sigma2)
/// sigma2 = +inf returns the prior moments.
std::pair<double, double> analytic_posterior(const GaussianPrior& prior, double y, double sigma2);

struct OracleReport {
  // configuration echo
  double y = 0.0;
  double rho = 0.0;
  int noise_level = 0;
  int steps = 0;
  int side = 1;  // images are 1 x side x side
  int n_samples = 0;
  std::uint64_t seed = 0;

  // closed-form references
  double prior_mean = 0.0;
  double prior_var = 0.0;
  double heuristic_sigma2 = 0.0;  // 1/(2 rho); +inf when rho = 0
  double posterior_mean = 0.0;
  double posterior_var = 0.0;

  // sampler moments
  double empirical_mean = 0.0;
  double empirical_var = 0.0;
  double prior_standard_error = 0.0;  // sqrt(prior_var / n_values)

  // distances
  double dist_to_prior_mean = 0.0;
  double dist_to_y = 0.0;
  double dist_to_posterior_mean = 0.0;
};

/// Runs n_samples MDPS draws with the analytic denoiser, m = all-ones, on
/// constant images y of shape 1 x side x side (side 1 or 8), and reports
/// empirical vs closed-form moments. Deterministic given the seed.
OracleReport oracle_check(const GaussianPrior& prior, double y, const SamplerConfig& cfg,
                          const NoiseSchedule& schedule, int n_samples, std::uint64_t seed,
                          int side = 1);

}  // namespace mdps
