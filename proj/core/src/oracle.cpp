// SPDX-License-Identifier: Apache-2.0
#include "mdps/oracle.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "mdps/parallel.hpp"

namespace mdps {

void GaussianPrior::validate() const {
  if (!(var0 > 0.0)) throw std::invalid_argument("GaussianPrior: var0 must be > 0");
  if (!std::isfinite(mu0)) throw std::invalid_argument("GaussianPrior: mu0 must be finite");
}

namespace {

class AnalyticGaussianDenoiser final : public Denoiser {
 public:
  AnalyticGaussianDenoiser(const GaussianPrior& prior, const NoiseSchedule& schedule)
      : prior_(prior), schedule_(schedule) {}

  ImageTensor evaluate(const ImageTensor& x_t, int t) const override {
    const double a = schedule_.alpha_bar(t);
    const double sn = std::sqrt(1.0 - a);
    const double sa = std::sqrt(a);
    const double marginal_var = a * prior_.var0 + (1.0 - a);
    ImageTensor eps(x_t.channels, x_t.height, x_t.width, ValueRange::Free);
    for (std::size_t i = 0; i < x_t.size(); ++i) {
      eps.data[i] = static_cast<float>(sn * (x_t.data[i] - sa * prior_.mu0) / marginal_var);
    }
    return eps;
  }

  bool supports_input_gradient() const override { return true; }

  ImageTensor input_vjp(const ImageTensor& x_t, int t, const ImageTensor& upstream) const override {
    const double a = schedule_.alpha_bar(t);
    const double c = std::sqrt(1.0 - a) / (a * prior_.var0 + (1.0 - a));
    ImageTensor g(x_t.channels, x_t.height, x_t.width, ValueRange::Free);
    for (std::size_t i = 0; i < upstream.size(); ++i) {
      g.data[i] = static_cast<float>(c * upstream.data[i]);
    }
    return g;
  }

  std::string architecture() const override { return "analytic-gaussian"; }

 private:
  GaussianPrior prior_;
  NoiseSchedule schedule_;
};

}  // namespace

std::unique_ptr<Denoiser> analytic_denoiser(const GaussianPrior& prior,
                                            const NoiseSchedule& schedule) {
  prior.validate();
  return std::make_unique<AnalyticGaussianDenoiser>(prior, schedule);
}

std::pair<double, double> analytic_posterior(const GaussianPrior& prior, double y, double sigma2) {
  prior.validate();
  if (std::isinf(sigma2)) return {prior.mu0, prior.var0};
  if (!(sigma2 > 0.0)) throw std::invalid_argument("analytic_posterior: sigma2 must be > 0");
  const double denom = prior.var0 + sigma2;
  return {(sigma2 * prior.mu0 + prior.var0 * y) / denom, prior.var0 * sigma2 / denom};
}

OracleReport oracle_check(const GaussianPrior& prior, double y, const SamplerConfig& cfg,
                          const NoiseSchedule& schedule, int n_samples, std::uint64_t seed,
                          int side) {
  prior.validate();
  cfg.validate(schedule);
  if (n_samples < 1) throw std::invalid_argument("oracle_check: n_samples must be >= 1");
  if (side != 1 && side != 8) throw std::invalid_argument("oracle_check: side must be 1 or 8");

  auto model = analytic_denoiser(prior, schedule);

  ObservationModel obs;
  obs.y = ImageTensor(1, side, side, ValueRange::Free, static_cast<float>(y));
  obs.m = MaskImage::ones(side, side);

  SamplerConfig run_cfg = cfg;
  run_cfg.clamp_output = false;  // moments must not be truncated

  Rng master(seed);
  std::vector<double> sums(static_cast<std::size_t>(n_samples), 0.0);
  std::vector<double> sqs(static_cast<std::size_t>(n_samples), 0.0);
  parallel_for(static_cast<std::size_t>(n_samples), [&](std::size_t j) {
    Rng child = master.split(j);
    ImageTensor x0 = mdps_sample(obs, *model, schedule, run_cfg, child);
    double s = 0.0, q = 0.0;
    for (float v : x0.data) {
      s += v;
      q += static_cast<double>(v) * v;
    }
    sums[j] = s;
    sqs[j] = q;
  });

  const double n_values = static_cast<double>(n_samples) * side * side;
  double total = 0.0, total_sq = 0.0;
  for (int j = 0; j < n_samples; ++j) {
    total += sums[static_cast<std::size_t>(j)];
    total_sq += sqs[static_cast<std::size_t>(j)];
  }
  const double mean = total / n_values;
  const double var = total_sq / n_values - mean * mean;

  OracleReport r;
  r.y = y;
  r.rho = cfg.rho;
  r.noise_level = cfg.noise_level;
  r.steps = cfg.steps;
  r.side = side;
  r.n_samples = n_samples;
  r.seed = seed;
  r.prior_mean = prior.mu0;
  r.prior_var = prior.var0;
  r.heuristic_sigma2 =
      cfg.rho > 0.0 ? 1.0 / (2.0 * cfg.rho) : std::numeric_limits<double>::infinity();
  auto post = analytic_posterior(prior, y, r.heuristic_sigma2);
  r.posterior_mean = post.first;
  r.posterior_var = post.second;
  r.empirical_mean = mean;
  r.empirical_var = var;
  r.prior_standard_error = std::sqrt(prior.var0 / n_values);
  r.dist_to_prior_mean = std::abs(mean - prior.mu0);
  r.dist_to_y = std::abs(mean - y);
  r.dist_to_posterior_mean = std::abs(mean - r.posterior_mean);
  return r;
}

}  // namespace mdps
